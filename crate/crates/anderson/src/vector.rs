//! Sharded vectors and exact accounting of global reductions.
//!
//! A [`DistVector`] is a logically distributed vector: its entries are split
//! into contiguous shards by a [`ShardLayout`], mimicking a row-wise
//! partition across processes. All arithmetic runs in one process, but every
//! operation that would require a global reduction on a real machine — dot
//! products, norms, fused multi-dots — goes through a [`ReductionLedger`]
//! that counts exactly one synchronization per reduction, no matter how many
//! values the reduction carries.
//!
//! Reductions accumulate per-shard partials exactly (see the `exact` module)
//! and combine them in ascending shard order, so results are bitwise
//! identical for every shard count. Elementwise operations (axpy, scale,
//! gemv updates) are shard-local and never touch the ledger.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::{combine_round, ExactAcc};

/// Contiguous row-wise partition of `n` entries into `p` shards.
///
/// Shard `s` holds `n/p` entries, with the remainder spread over the leading
/// shards; boundaries are strictly increasing from 0 to `n`.
#[derive(Debug, PartialEq, Eq)]
pub struct ShardLayout {
    boundaries: Vec<usize>,
}

impl ShardLayout {
    pub fn new(n: usize, shards: usize) -> Result<Self> {
        if shards == 0 || shards > n {
            return Err(Error::BadLayout { shards, len: n });
        }
        let base = n / shards;
        let rem = n % shards;
        let mut boundaries = Vec::with_capacity(shards + 1);
        let mut at = 0;
        boundaries.push(0);
        for s in 0..shards {
            at += base + usize::from(s < rem);
            boundaries.push(at);
        }
        debug_assert_eq!(at, n);
        Ok(Self { boundaries })
    }

    pub fn len(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shard_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn shard_range(&self, shard: usize) -> Range<usize> {
        self.boundaries[shard]..self.boundaries[shard + 1]
    }
}

fn layouts_match(a: &DistVector, b: &DistVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if !Arc::ptr_eq(&a.layout, &b.layout) && a.layout != b.layout {
        return Err(Error::LayoutMismatch);
    }
    Ok(())
}

/// A real vector sharded by an immutable [`ShardLayout`].
#[derive(Clone, Debug)]
pub struct DistVector {
    layout: Arc<ShardLayout>,
    values: Vec<f64>,
}

impl DistVector {
    pub fn zeros(layout: &Arc<ShardLayout>) -> Self {
        Self {
            layout: Arc::clone(layout),
            values: vec![0.0; layout.len()],
        }
    }

    pub fn from_values(layout: &Arc<ShardLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::LengthMismatch(values.len(), layout.len()));
        }
        Ok(Self {
            layout: Arc::clone(layout),
            values,
        })
    }

    pub fn from_fn(layout: &Arc<ShardLayout>, f: impl FnMut(usize) -> f64) -> Self {
        Self {
            layout: Arc::clone(layout),
            values: (0..layout.len()).map(f).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layout(&self) -> &Arc<ShardLayout> {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Elementwise difference `self - other`.
    pub fn sub(&self, other: &DistVector) -> Result<DistVector> {
        layouts_match(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DistVector {
            layout: Arc::clone(&self.layout),
            values,
        })
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }
}

/// Solver phase a reduction is charged to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    QrAdd,
    QrDelete,
    LspRhs,
    NormCheck,
    Other,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::QrAdd,
        Phase::QrDelete,
        Phase::LspRhs,
        Phase::NormCheck,
        Phase::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::QrAdd => "qradd",
            Phase::QrDelete => "qrdelete",
            Phase::LspRhs => "lsp_rhs",
            Phase::NormCheck => "norm_check",
            Phase::Other => "other",
        }
    }
}

/// Phase-tagged counters of global reductions.
///
/// One fused reduction of any width counts one; a delayed reduction merged
/// into a later one counts one for the merged pair. Counters only grow
/// between explicit resets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReductionLedger {
    counts: [u64; 5],
}

impl ReductionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, phase: Phase) {
        self.counts[phase as usize] += 1;
    }

    pub fn count(&self, phase: Phase) -> u64 {
        self.counts[phase as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn reset(&mut self) {
        self.counts = [0; 5];
    }

    /// Per-phase difference `self - earlier` (the earlier snapshot must not
    /// exceed this one).
    pub fn since(&self, earlier: &ReductionLedger) -> ReductionLedger {
        let mut counts = [0u64; 5];
        for (i, c) in counts.iter_mut().enumerate() {
            *c = self.counts[i] - earlier.counts[i];
        }
        ReductionLedger { counts }
    }
}

/// Per-shard exact partials for one requested output value.
fn column_partials(col: &DistVector, v: &DistVector) -> Vec<ExactAcc> {
    let layout = &v.layout;
    let mut accs = Vec::with_capacity(layout.shard_count());
    for s in 0..layout.shard_count() {
        let range = layout.shard_range(s);
        let mut acc = ExactAcc::new();
        for (a, b) in col.values[range.clone()].iter().zip(&v.values[range]) {
            acc.add(a * b);
        }
        accs.push(acc);
    }
    accs
}

/// Counted dot product: one global reduction.
pub fn dot(
    a: &DistVector,
    b: &DistVector,
    ledger: &mut ReductionLedger,
    phase: Phase,
) -> Result<f64> {
    layouts_match(a, b)?;
    let partials = column_partials(a, b);
    ledger.record(phase);
    Ok(combine_round(&partials))
}

/// Uncounted exact dot product, for measurements that are not part of the
/// simulated distributed run.
pub(crate) fn raw_dot(a: &DistVector, b: &DistVector) -> f64 {
    let mut acc = ExactAcc::new();
    for (x, y) in a.values.iter().zip(&b.values) {
        acc.add(x * y);
    }
    combine_round(std::slice::from_ref(&acc))
}

/// Computes `cols^T v` for any number of columns in one global reduction.
pub fn fused_multi_dot(
    cols: &[DistVector],
    v: &DistVector,
    ledger: &mut ReductionLedger,
    phase: Phase,
) -> Result<Vec<f64>> {
    if cols.is_empty() {
        return Err(Error::EmptyReduction);
    }
    let mut pending = PendingReduction::empty(&v.layout, phase);
    pending.append(cols, v)?;
    Ok(pending.finalize(ledger))
}

/// Counted Euclidean norm: one global reduction.
pub fn norm2(v: &DistVector, ledger: &mut ReductionLedger, phase: Phase) -> f64 {
    let partials = column_partials(v, v);
    ledger.record(phase);
    combine_round(&partials).sqrt()
}

/// A reduction whose local partials have been computed but whose single
/// global combine is deferred, so it can be merged with later work.
///
/// Additional batches may be appended at no extra synchronization cost.
/// Finalizing consumes the value and performs the one counted reduction;
/// dropping an unfinalized reduction panics, since the deferred
/// synchronization would otherwise be silently lost.
#[derive(Debug)]
pub struct PendingReduction {
    layout: Arc<ShardLayout>,
    phase: Phase,
    outputs: Vec<Vec<ExactAcc>>,
    finalized: bool,
}

impl PendingReduction {
    /// A pending reduction with no accumulated work yet.
    pub fn empty(layout: &Arc<ShardLayout>, phase: Phase) -> Self {
        Self {
            layout: Arc::clone(layout),
            phase,
            outputs: Vec::new(),
            finalized: false,
        }
    }

    /// Accumulates local partials for `cols^T v`; no ledger increment.
    pub fn append(&mut self, cols: &[DistVector], v: &DistVector) -> Result<()> {
        if v.len() != self.layout.len() {
            return Err(Error::LengthMismatch(v.len(), self.layout.len()));
        }
        if !Arc::ptr_eq(&v.layout, &self.layout) && *v.layout != *self.layout {
            return Err(Error::LayoutMismatch);
        }
        for col in cols {
            layouts_match(col, v)?;
        }
        for col in cols {
            self.outputs.push(column_partials(col, v));
        }
        Ok(())
    }

    /// Number of output values accumulated so far.
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Performs the single counted global reduction and returns all
    /// accumulated output values in append order.
    pub fn finalize(mut self, ledger: &mut ReductionLedger) -> Vec<f64> {
        self.finalized = true;
        let outputs = std::mem::take(&mut self.outputs);
        ledger.record(self.phase);
        outputs.iter().map(|accs| combine_round(accs)).collect()
    }
}

impl Drop for PendingReduction {
    fn drop(&mut self) {
        if !self.finalized && !std::thread::panicking() {
            panic!(
                "PendingReduction dropped without finalize: a deferred global reduction was lost"
            );
        }
    }
}

/// Begins a delayed multi-dot: local partials now, the counted global
/// reduction at [`PendingReduction::finalize`].
pub fn begin_delayed_multi_dot(
    cols: &[DistVector],
    v: &DistVector,
    phase: Phase,
) -> Result<PendingReduction> {
    if cols.is_empty() {
        return Err(Error::EmptyReduction);
    }
    let mut pending = PendingReduction::empty(&v.layout, phase);
    pending.append(cols, v)?;
    Ok(pending)
}

/// In-place `v -= cols * coeffs`, applied column by column. Shard-local.
pub fn gemv_update(v: &mut DistVector, cols: &[DistVector], coeffs: &[f64]) -> Result<()> {
    if cols.len() != coeffs.len() {
        return Err(Error::CoefficientMismatch {
            coeffs: coeffs.len(),
            cols: cols.len(),
        });
    }
    for col in cols {
        layouts_match(col, v)?;
    }
    for (col, &c) in cols.iter().zip(coeffs) {
        for (vi, qi) in v.values.iter_mut().zip(&col.values) {
            *vi -= c * qi;
        }
    }
    Ok(())
}

/// In-place `y += alpha * x`. Shard-local.
pub fn axpy(y: &mut DistVector, alpha: f64, x: &DistVector) -> Result<()> {
    layouts_match(x, y)?;
    for (yi, xi) in y.values.iter_mut().zip(&x.values) {
        *yi += alpha * xi;
    }
    Ok(())
}

/// In-place `v *= alpha`. Shard-local.
pub fn scale(v: &mut DistVector, alpha: f64) {
    for vi in v.values.iter_mut() {
        *vi *= alpha;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout(n: usize, p: usize) -> Arc<ShardLayout> {
        Arc::new(ShardLayout::new(n, p).unwrap())
    }

    fn unit(l: &Arc<ShardLayout>, i: usize) -> DistVector {
        DistVector::from_fn(l, |k| if k == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn layout_distributes_remainder_to_leading_shards() {
        let l = ShardLayout::new(10, 3).unwrap();
        assert_eq!(l.shard_range(0), 0..4);
        assert_eq!(l.shard_range(1), 4..7);
        assert_eq!(l.shard_range(2), 7..10);
        assert!(ShardLayout::new(2, 4).is_err());
        assert!(ShardLayout::new(5, 0).is_err());
    }

    #[test]
    fn dot_unit_vectors() {
        let l = layout(4, 2);
        let e1 = unit(&l, 0);
        let mut ledger = ReductionLedger::new();
        let r = dot(&e1, &e1, &mut ledger, Phase::Other).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(ledger.count(Phase::Other), 1);
        assert_eq!(ledger.total(), 1);
    }

    #[test]
    fn dot_hand_sum() {
        let l = layout(4, 2);
        let a = DistVector::from_values(&l, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = DistVector::from_values(&l, vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        let mut ledger = ReductionLedger::new();
        assert_eq!(dot(&a, &b, &mut ledger, Phase::QrAdd).unwrap(), 20.0);
    }

    #[test]
    fn dot_rejects_mismatched_layouts() {
        let a = DistVector::zeros(&layout(4, 2));
        let b = DistVector::zeros(&layout(4, 4));
        let c = DistVector::zeros(&layout(6, 2));
        let mut ledger = ReductionLedger::new();
        assert!(matches!(
            dot(&a, &b, &mut ledger, Phase::Other),
            Err(Error::LayoutMismatch)
        ));
        assert!(matches!(
            dot(&a, &c, &mut ledger, Phase::Other),
            Err(Error::LengthMismatch(..))
        ));
        assert_eq!(ledger.total(), 0);
    }

    #[test]
    fn fused_multi_dot_counts_one() {
        let l = layout(4, 2);
        let v = DistVector::from_values(&l, vec![3.0, 5.0, 0.0, 0.0]).unwrap();
        let cols = vec![unit(&l, 0), unit(&l, 1)];
        let mut ledger = ReductionLedger::new();
        let r = fused_multi_dot(&cols, &v, &mut ledger, Phase::QrAdd).unwrap();
        assert_eq!(r, vec![3.0, 5.0]);
        assert_eq!(ledger.count(Phase::QrAdd), 1);

        // Seven columns still cost exactly one reduction.
        let cols7: Vec<_> = (0..7).map(|i| unit(&l, i % 4)).collect();
        ledger.reset();
        let r7 = fused_multi_dot(&cols7, &v, &mut ledger, Phase::QrAdd).unwrap();
        assert_eq!(r7.len(), 7);
        assert_eq!(ledger.count(Phase::QrAdd), 1);

        assert!(matches!(
            fused_multi_dot(&[], &v, &mut ledger, Phase::QrAdd),
            Err(Error::EmptyReduction)
        ));
    }

    #[test]
    fn fused_matches_separate_dots() {
        let l = layout(33, 4);
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let cols: Vec<_> = (0..5)
            .map(|_| DistVector::from_fn(&l, |_| next()))
            .collect();
        let v = DistVector::from_fn(&l, |_| next());
        let mut ledger = ReductionLedger::new();
        let fused = fused_multi_dot(&cols, &v, &mut ledger, Phase::Other).unwrap();
        assert_eq!(ledger.total(), 1);
        for (col, &f) in cols.iter().zip(&fused) {
            let d = dot(col, &v, &mut ledger, Phase::Other).unwrap();
            assert!((d - f).abs() <= 1e-14 * d.abs().max(1.0));
        }
        assert_eq!(ledger.total(), 6);
    }

    #[test]
    fn delayed_reduction_merges_batches() {
        let l = layout(8, 2);
        let cols1 = vec![unit(&l, 0), unit(&l, 1)];
        let cols2 = vec![unit(&l, 2)];
        let v = DistVector::from_fn(&l, |i| (i + 1) as f64);

        let mut ledger = ReductionLedger::new();
        let mut pending = begin_delayed_multi_dot(&cols1, &v, Phase::QrAdd).unwrap();
        assert_eq!(ledger.total(), 0);
        pending.append(&cols2, &v).unwrap();
        let merged = pending.finalize(&mut ledger);
        assert_eq!(ledger.count(Phase::QrAdd), 1);

        let mut ledger2 = ReductionLedger::new();
        let a = fused_multi_dot(&cols1, &v, &mut ledger2, Phase::QrAdd).unwrap();
        let b = fused_multi_dot(&cols2, &v, &mut ledger2, Phase::QrAdd).unwrap();
        assert_eq!(ledger2.count(Phase::QrAdd), 2);
        assert_eq!(merged, [a, b].concat());
    }

    #[test]
    fn empty_pending_finalize_counts_one() {
        let l = layout(4, 2);
        let mut ledger = ReductionLedger::new();
        let pending = PendingReduction::empty(&l, Phase::QrDelete);
        let vals = pending.finalize(&mut ledger);
        assert!(vals.is_empty());
        assert_eq!(ledger.count(Phase::QrDelete), 1);
    }

    #[test]
    fn dropping_pending_without_finalize_panics() {
        let l = layout(4, 2);
        let v = DistVector::from_fn(&l, |i| i as f64);
        let cols = vec![unit(&l, 0)];
        let result = std::panic::catch_unwind(|| {
            let _pending = begin_delayed_multi_dot(&cols, &v, Phase::QrAdd).unwrap();
            // dropped here
        });
        assert!(result.is_err());
    }

    #[test]
    fn norm_examples() {
        let l = layout(4, 2);
        let v = DistVector::from_values(&l, vec![3.0, 4.0, 0.0, 0.0]).unwrap();
        let mut ledger = ReductionLedger::new();
        assert_eq!(norm2(&v, &mut ledger, Phase::NormCheck), 5.0);
        assert_eq!(
            norm2(&DistVector::zeros(&l), &mut ledger, Phase::NormCheck),
            0.0
        );
        let d = dot(&v, &v, &mut ledger, Phase::Other).unwrap();
        assert_eq!(norm2(&v, &mut ledger, Phase::Other), d.sqrt());
        assert_eq!(ledger.count(Phase::NormCheck), 2);
    }

    #[test]
    fn gemv_update_examples() {
        let l = layout(4, 2);
        let mut v = DistVector::from_values(&l, vec![2.0, 3.0, 4.0, 5.0]).unwrap();
        let cols = vec![unit(&l, 0)];

        let orig = v.clone();
        gemv_update(&mut v, &cols, &[0.0]).unwrap();
        assert_eq!(v.as_slice(), orig.as_slice());

        gemv_update(&mut v, &cols, &[2.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 3.0, 4.0, 5.0]);

        assert!(matches!(
            gemv_update(&mut v, &cols, &[1.0, 2.0]),
            Err(Error::CoefficientMismatch { .. })
        ));
    }

    #[test]
    fn gemv_matches_axpy_loop() {
        let l = layout(16, 4);
        let cols: Vec<_> = (0..3)
            .map(|j| DistVector::from_fn(&l, |i| ((i * 3 + j) % 7) as f64 - 3.0))
            .collect();
        let coeffs = [0.5, -1.25, 2.0];
        let v0 = DistVector::from_fn(&l, |i| (i as f64).sin());

        let mut via_gemv = v0.clone();
        gemv_update(&mut via_gemv, &cols, &coeffs).unwrap();

        let mut via_axpy = v0.clone();
        for (col, &c) in cols.iter().zip(&coeffs) {
            axpy(&mut via_axpy, -c, col).unwrap();
        }
        for (a, b) in via_gemv.iter().zip(via_axpy.iter()) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn elementwise_trivials() {
        let l = layout(5, 2);
        let v = DistVector::from_fn(&l, |i| i as f64 - 2.0);

        let mut s = v.clone();
        scale(&mut s, 1.0);
        assert_eq!(s.as_slice(), v.as_slice());

        let mut y = v.clone();
        axpy(&mut y, 0.0, &v).unwrap();
        assert_eq!(y.as_slice(), v.as_slice());

        let copied = v.clone();
        assert!(copied
            .iter()
            .zip(v.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn ledger_counts_are_exact_across_widths_and_shards() {
        for &p in &[1usize, 2, 4, 8] {
            let l = layout(64, p);
            let v = DistVector::from_fn(&l, |i| (i as f64).cos());
            for &k in &[1usize, 2, 7, 33, 64] {
                let cols: Vec<_> = (0..k).map(|i| unit(&l, i % 64)).collect();
                let mut ledger = ReductionLedger::new();
                fused_multi_dot(&cols, &v, &mut ledger, Phase::QrAdd).unwrap();
                assert_eq!(ledger.count(Phase::QrAdd), 1, "k={k} p={p}");
            }
        }
    }

    proptest! {
        #[test]
        fn reductions_are_bitwise_identical_across_shard_counts(
            values in prop::collection::vec(-1e6f64..1e6, 8..200),
            others in prop::collection::vec(-1e6f64..1e6, 8..200),
        ) {
            let n = values.len().min(others.len());
            let vals = &values[..n];
            let oths = &others[..n];
            let reference = {
                let l = layout(n, 1);
                let a = DistVector::from_values(&l, vals.to_vec()).unwrap();
                let b = DistVector::from_values(&l, oths.to_vec()).unwrap();
                let mut ledger = ReductionLedger::new();
                dot(&a, &b, &mut ledger, Phase::Other).unwrap()
            };
            for p in [2usize, 3, 4, 8] {
                if p > n {
                    continue;
                }
                let l = layout(n, p);
                let a = DistVector::from_values(&l, vals.to_vec()).unwrap();
                let b = DistVector::from_values(&l, oths.to_vec()).unwrap();
                let mut ledger = ReductionLedger::new();
                let d = dot(&a, &b, &mut ledger, Phase::Other).unwrap();
                prop_assert_eq!(d.to_bits(), reference.to_bits(), "p = {}", p);
            }
        }
    }
}
