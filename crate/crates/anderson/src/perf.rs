//! Analytic synchronization-count and iteration-time model.
//!
//! The counts are closed forms of what the ledger measures on a real run:
//! filling a depth-`m` window costs `(m^2+m)/2` reductions with MGS and
//! `2m-1`, `3m-2`, `2m-1` with ICWY, CGS-2, DCGS-2; once the window is full
//! each further iteration costs `m`, 2, 3, 2 (plus one deletion reduction
//! for ICWY). Times combine the counts with a log-latency reduction cost and
//! a flop throughput term.

use crate::qr::OrthMethod;

/// Machine parameters for the time model.
///
/// A global reduction over `p` shards is charged
/// `latency_base + latency_log2 * log2(p)` seconds; arithmetic runs at
/// `flop_rate` flops/s per shard on vectors of length `n`.
#[derive(Clone, Copy, Debug)]
pub struct CostParams {
    pub latency_base: f64,
    pub latency_log2: f64,
    pub flop_rate: f64,
    pub n: usize,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            latency_base: 10e-6,
            latency_log2: 5e-6,
            flop_rate: 1e9,
            n: 1 << 20,
        }
    }
}

impl CostParams {
    /// Seconds per global reduction at shard count `p`.
    pub fn latency(&self, p: usize) -> f64 {
        assert!(p >= 1);
        self.latency_base + self.latency_log2 * (p as f64).log2()
    }

    /// A parameter set where reduction latency is the only cost.
    pub fn latency_dominated() -> Self {
        Self {
            flop_rate: f64::INFINITY,
            ..Self::default()
        }
    }
}

/// Which part of a solve the model prices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IterPhase {
    /// Filling the window: iterations 1..=m.
    Startup,
    /// One additional iteration with a full window.
    Recycle,
}

impl IterPhase {
    pub fn name(self) -> &'static str {
        match self {
            IterPhase::Startup => "startup",
            IterPhase::Recycle => "recycle",
        }
    }
}

/// Reductions spent filling the window (orthogonalization phases only).
pub fn startup_syncs(method: OrthMethod, m: usize) -> u64 {
    assert!(m >= 1, "startup needs m >= 1");
    let m = m as u64;
    match method {
        OrthMethod::Mgs => (m * m + m) / 2,
        OrthMethod::Icwy => 2 * m - 1,
        OrthMethod::Cgs2 => 3 * m - 2,
        OrthMethod::Dcgs2 => 2 * m - 1,
    }
}

/// Reductions of one full-window iteration. The deletion reduction that
/// ICWY needs to maintain its correction matrix is included only when
/// `include_delete` is set.
pub fn recycle_syncs(method: OrthMethod, m: usize, include_delete: bool) -> u64 {
    assert!(m >= 2, "a recycle iteration needs m >= 2");
    let base = match method {
        OrthMethod::Mgs => m as u64,
        OrthMethod::Icwy => 2,
        OrthMethod::Cgs2 => 3,
        OrthMethod::Dcgs2 => 2,
    };
    base + u64::from(include_delete && method == OrthMethod::Icwy)
}

/// Leading-order flop counts for the priced phase.
///
/// Per full-window iteration: MGS does one projection sweep (~4mn), CGS-2
/// two (~8mn); ICWY and DCGS-2 do ~6mn for the extra column inner products
/// plus O(m^2) triangular bookkeeping. Startup sums the per-iteration costs
/// over window sizes 1..=m.
pub fn flops(method: OrthMethod, m: usize, n: usize, phase: IterPhase) -> f64 {
    let (m, n) = (m as f64, n as f64);
    match phase {
        IterPhase::Recycle => match method {
            OrthMethod::Mgs => 4.0 * m * n,
            OrthMethod::Cgs2 => 8.0 * m * n,
            OrthMethod::Icwy | OrthMethod::Dcgs2 => 6.0 * m * n + m * m,
        },
        IterPhase::Startup => {
            let sum_k = m * (m + 1.0) / 2.0;
            let sum_k2 = m * (m + 1.0) * (2.0 * m + 1.0) / 6.0;
            match method {
                OrthMethod::Mgs => 4.0 * n * sum_k,
                OrthMethod::Cgs2 => 8.0 * n * sum_k,
                OrthMethod::Icwy | OrthMethod::Dcgs2 => 6.0 * n * sum_k + sum_k2,
            }
        }
    }
}

/// Predicted seconds for the phase at shard count `p`.
pub fn predict_time(
    params: &CostParams,
    p: usize,
    method: OrthMethod,
    m: usize,
    phase: IterPhase,
) -> f64 {
    let syncs = match phase {
        IterPhase::Startup => startup_syncs(method, m),
        IterPhase::Recycle => recycle_syncs(method, m, false),
    };
    syncs as f64 * params.latency(p) + flops(method, m, params.n, phase) / (p as f64 * params.flop_rate)
}

/// Smallest depth `m` in scan range where `a` is strictly faster than `b`,
/// or `None` if it never happens up to m = 64.
pub fn crossover_m(
    params: &CostParams,
    p: usize,
    a: OrthMethod,
    b: OrthMethod,
    phase: IterPhase,
) -> Option<usize> {
    let lo = match phase {
        IterPhase::Startup => 1,
        IterPhase::Recycle => 2,
    };
    (lo..=64).find(|&m| predict_time(params, p, a, m, phase) < predict_time(params, p, b, m, phase))
}
