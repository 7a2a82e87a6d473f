//! Exact accumulation of floating-point sums.
//!
//! A global reduction must produce the same bits regardless of how the
//! elements were grouped into shards. Plain per-shard partial sums cannot
//! guarantee that: floating-point addition is not associative, so
//! `(a + b) + (c + d)` and `((a + b) + c) + d` may round differently. Each
//! shard therefore accumulates into a lossless expansion (a short list of
//! doubles whose exact sum equals the exact sum of the inputs, maintained
//! with error-free two-sum transformations), and the final value is produced
//! by one correctly-rounded conversion of the exact sum. Exact addition is
//! associative, so the result is independent of the sharding.
//!
//! Caveat: if a running shard sum overflows the finite range the accumulator
//! degrades to ordinary saturating arithmetic, and grouping independence is
//! no longer guaranteed. All quantities handled by the solvers stay far away
//! from that regime.

use num_bigint::{BigInt, BigUint};
use smallvec::SmallVec;

/// Error-free transformation: returns `(s, e)` with `s = fl(a + b)` and
/// `a + b = s + e` exactly (Knuth's branch-free two-sum).
#[inline(always)]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let a1 = s - b;
    let b1 = s - a1;
    let da = a - a1;
    let db = b - b1;
    (s, da + db)
}

/// A running sum held without rounding error.
///
/// Invariant: the exact (real-arithmetic) sum of `parts` equals the exact sum
/// of everything passed to [`ExactAcc::add`]. The component count stays small
/// (two to four) for data with bounded dynamic range; pathological inputs
/// only grow the list, never lose exactness.
#[derive(Clone, Debug, Default)]
pub(crate) struct ExactAcc {
    parts: SmallVec<[f64; 6]>,
    poison: Option<f64>,
}

impl ExactAcc {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        if let Some(p) = self.poison.as_mut() {
            *p += x;
            return;
        }
        if !x.is_finite() {
            self.poison = Some(x);
            self.parts.clear();
            return;
        }
        let mut carry = x;
        let mut kept = 0;
        for i in 0..self.parts.len() {
            let (s, e) = two_sum(carry, self.parts[i]);
            carry = s;
            if e != 0.0 {
                self.parts[kept] = e;
                kept += 1;
            }
        }
        self.parts.truncate(kept);
        if !carry.is_finite() {
            self.poison = Some(carry);
            self.parts.clear();
        } else if carry != 0.0 {
            self.parts.push(carry);
        }
    }

}

/// Combines per-shard accumulators (in slice order) into the correctly
/// rounded value of their exact sum.
pub(crate) fn combine_round(accs: &[ExactAcc]) -> f64 {
    if accs.iter().any(|a| a.poison.is_some()) {
        // Degraded path: fold plainly in shard order.
        let mut s = 0.0;
        for a in accs {
            match a.poison {
                Some(p) => s += p,
                None => s += a.parts.iter().sum::<f64>(),
            }
        }
        return s;
    }
    round_parts(accs.iter().flat_map(|a| a.parts.iter().copied()))
}

/// Decomposes a finite nonzero double into `(negative, mantissa, exponent)`
/// with `value = ±mantissa * 2^exponent`.
fn decompose(x: f64) -> (bool, u64, i64) {
    let bits = x.to_bits();
    let neg = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        (neg, frac, -1074)
    } else {
        (neg, frac | (1u64 << 52), biased - 1075)
    }
}

/// Rounds the exact sum of `parts` to the nearest double (ties to even).
///
/// The inputs must be finite. The result depends only on the exact value of
/// the sum, never on the order or grouping of the parts.
pub(crate) fn round_parts(parts: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = BigInt::from(0u32);
    let mut emin: i64 = 0;
    let mut terms: SmallVec<[(bool, u64, i64); 16]> = SmallVec::new();
    for x in parts {
        debug_assert!(x.is_finite());
        if x == 0.0 {
            continue;
        }
        let t = decompose(x);
        emin = emin.min(t.2);
        terms.push(t);
    }
    if terms.is_empty() {
        return 0.0;
    }
    for (neg, mant, exp) in terms {
        let shifted = BigInt::from(mant) << (exp - emin) as usize;
        if neg {
            acc -= shifted;
        } else {
            acc += shifted;
        }
    }
    round_scaled(&acc, emin)
}

/// Correctly rounds `a * 2^scale` to a double, ties to even.
fn round_scaled(a: &BigInt, scale: i64) -> f64 {
    use num_bigint::Sign;
    let neg = match a.sign() {
        Sign::NoSign => return 0.0,
        Sign::Minus => true,
        Sign::Plus => false,
    };
    let mag: &BigUint = a.magnitude();
    let nbits = mag.bits() as i64;
    // Exponent of the leading bit: the value lies in [2^lead, 2^(lead+1)).
    let lead = scale + nbits - 1;
    // Number of significant bits representable at this magnitude.
    let keep = if lead >= -1022 { 53 } else { lead + 1075 };
    let drop = nbits - keep;
    let (mut m, mut q) = if drop <= 0 {
        (u64::try_from(mag).expect("mantissa fits"), scale)
    } else {
        let drop = drop as u64;
        let high = u64::try_from(&(mag >> drop)).expect("rounded mantissa fits");
        let guard = ((mag >> (drop - 1)) & BigUint::from(1u32)) == BigUint::from(1u32);
        let sticky = mag.trailing_zeros().unwrap_or(0) < drop - 1;
        let up = guard && (sticky || high & 1 == 1);
        (high + up as u64, scale + drop as i64)
    };
    if m == 1u64 << 53 {
        m = 1u64 << 52;
        q += 1;
    }
    compose(neg, m, q)
}

/// Builds the double `±m * 2^q` bit-exactly (m < 2^53, already rounded to a
/// representable value at its magnitude).
fn compose(neg: bool, m: u64, q: i64) -> f64 {
    let sign = (neg as u64) << 63;
    if m == 0 {
        return f64::from_bits(sign);
    }
    let p = 63 - m.leading_zeros() as i64;
    let e = q + p;
    if e > 1023 {
        return if neg { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    let bits = if e >= -1022 {
        debug_assert!(p <= 52);
        let frac = (m << (52 - p)) & ((1u64 << 52) - 1);
        sign | (((e + 1023) as u64) << 52) | frac
    } else {
        let shift = q + 1074;
        debug_assert!(shift >= 0);
        let frac = m << shift;
        debug_assert!(frac < 1u64 << 52);
        sign | frac
    };
    f64::from_bits(bits)
}
