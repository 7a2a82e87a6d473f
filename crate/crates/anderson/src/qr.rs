//! Incremental QR factorization of the acceleration window.
//!
//! The window matrix is held as an explicit orthonormal column block `Q` and
//! a small upper-triangular `R`, updated one column at a time. Four update
//! kernels are provided, differing in how many global reductions one column
//! append costs (`k` = columns already held, so the appended column makes
//! `k + 1`):
//!
//! | kernel   | reductions per append | loss of orthogonality |
//! |----------|-----------------------|-----------------------|
//! | MGS      | `k + 1`               | O(eps)·kappa          |
//! | ICWY-MGS | 2                     | O(eps)·kappa          |
//! | CGS-2    | 3                     | O(eps)                |
//! | DCGS-2   | 2                     | O(eps)..O(eps)·kappa² |
//!
//! ICWY keeps a unit lower triangular correction `T` whose strict lower part
//! collects inner products of the held columns; the projection coefficients
//! are recovered through a forward solve with `T`, and the rows of `T` are
//! produced by a delayed reduction merged into the same synchronization as
//! the projection coefficients. DCGS-2 instead delays the
//! reorthogonalization of the previously added column and merges it into the
//! current append's reduction.
//!
//! Deleting the oldest column uses Givens rotations on `R` (no communication
//! at all); the ICWY variant additionally rebuilds `T`'s strict lower part
//! with one fused reduction.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::vector::{
    axpy, begin_delayed_multi_dot, dot, fused_multi_dot, gemv_update, norm2, raw_dot,
    DistVector, PendingReduction, Phase, ReductionLedger, ShardLayout,
};

/// Orthogonalization kernel used for column appends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrthMethod {
    Mgs,
    Icwy,
    Cgs2,
    Dcgs2,
}

impl OrthMethod {
    pub const ALL: [OrthMethod; 4] = [
        OrthMethod::Mgs,
        OrthMethod::Icwy,
        OrthMethod::Cgs2,
        OrthMethod::Dcgs2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OrthMethod::Mgs => "mgs",
            OrthMethod::Icwy => "icwy",
            OrthMethod::Cgs2 => "cgs2",
            OrthMethod::Dcgs2 => "dcgs2",
        }
    }
}

impl fmt::Display for OrthMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrthMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mgs" => Ok(OrthMethod::Mgs),
            "icwy" => Ok(OrthMethod::Icwy),
            "cgs2" => Ok(OrthMethod::Cgs2),
            "dcgs2" => Ok(OrthMethod::Dcgs2),
            other => Err(Error::InvalidConfig(format!(
                "unknown orthogonalization method `{other}` (expected mgs|icwy|cgs2|dcgs2)"
            ))),
        }
    }
}

/// Incrementally maintained QR factorization with bounded column count.
///
/// `Q` holds up to `capacity` orthonormal columns of length `n`; the active
/// top-left block of `R` is upper triangular with strictly positive
/// diagonal. For the ICWY kernel a unit lower triangular correction `T` is
/// carried alongside.
#[derive(Clone, Debug)]
pub struct QrFactorization {
    layout: Arc<ShardLayout>,
    method: OrthMethod,
    capacity: usize,
    q: Vec<DistVector>,
    r: DMatrix<f64>,
    t: Option<DMatrix<f64>>,
}

impl QrFactorization {
    pub fn new(layout: &Arc<ShardLayout>, capacity: usize, method: OrthMethod) -> Self {
        assert!(capacity >= 1, "window capacity must be at least 1");
        let t = match method {
            OrthMethod::Icwy => Some(DMatrix::identity(capacity, capacity)),
            _ => None,
        };
        Self {
            layout: Arc::clone(layout),
            method,
            capacity,
            q: Vec::with_capacity(capacity),
            r: DMatrix::zeros(capacity, capacity),
            t,
        }
    }

    pub fn active(&self) -> usize {
        self.q.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn method(&self) -> OrthMethod {
        self.method
    }

    pub fn layout(&self) -> &Arc<ShardLayout> {
        &self.layout
    }

    /// Active orthonormal columns, oldest first.
    pub fn columns(&self) -> &[DistVector] {
        &self.q
    }

    pub fn r_entry(&self, row: usize, col: usize) -> f64 {
        self.r[(row, col)]
    }

    /// Correction matrix entry (ICWY only).
    pub fn t_entry(&self, row: usize, col: usize) -> f64 {
        self.t.as_ref().expect("only the ICWY kernel carries T")[(row, col)]
    }

    /// Drops all columns; the factorization becomes empty.
    pub fn clear(&mut self) {
        self.q.clear();
        self.r.fill(0.0);
        if let Some(t) = self.t.as_mut() {
            t.fill_with_identity();
        }
    }

    /// Appends a column with the factorization's configured kernel.
    ///
    /// On an empty factorization every kernel degenerates to a single
    /// normalization (one reduction).
    pub fn qradd(&mut self, v: DistVector, ledger: &mut ReductionLedger) -> Result<()> {
        if self.active() == 0 {
            return self.init_first_column(v, ledger);
        }
        match self.method {
            OrthMethod::Mgs => self.qradd_mgs(v, ledger),
            OrthMethod::Icwy => self.qradd_icwy(v, ledger),
            OrthMethod::Cgs2 => self.qradd_cgs2(v, ledger),
            OrthMethod::Dcgs2 => self.qradd_dcgs2(v, ledger),
        }
    }

    fn check_add(&self, v: &DistVector) -> Result<()> {
        if self.active() == self.capacity {
            return Err(Error::WindowFull {
                capacity: self.capacity,
            });
        }
        if v.len() != self.layout.len() {
            return Err(Error::LengthMismatch(v.len(), self.layout.len()));
        }
        if !Arc::ptr_eq(v.layout(), &self.layout) && **v.layout() != *self.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(())
    }

    fn init_first_column(&mut self, v: DistVector, ledger: &mut ReductionLedger) -> Result<()> {
        self.check_add(&v)?;
        self.push_normalized(v, &[], ledger)
    }

    /// Sequential rank-1 projections: `k` dots plus one norm.
    pub fn qradd_mgs(&mut self, mut v: DistVector, ledger: &mut ReductionLedger) -> Result<()> {
        self.check_add(&v)?;
        let k = self.active();
        let new_col = k;
        for j in 0..k {
            let rj = dot(&self.q[j], &v, ledger, Phase::QrAdd)?;
            axpy(&mut v, -rj, &self.q[j])?;
            self.r[(j, new_col)] = rj;
        }
        let proj: Vec<f64> = (0..k).map(|j| self.r[(j, new_col)]).collect();
        self.push_normalized(v, &proj, ledger)
    }

    /// Inverse compact WY update: one merged reduction (new row of `T`
    /// together with the projection coefficients) plus one norm.
    pub fn qradd_icwy(&mut self, mut v: DistVector, ledger: &mut ReductionLedger) -> Result<()> {
        self.check_add(&v)?;
        let k = self.active();
        let new_col = k;

        // Delayed reduction: row k-1 of T's generator, merged with Q^T v.
        let mut pending = begin_delayed_multi_dot(&self.q[..k], &self.q[k - 1], Phase::QrAdd)?;
        pending.append(&self.q[..k], &v)?;
        let vals = pending.finalize(ledger);

        {
            let t = self.t.as_mut().expect("ICWY factorization carries T");
            for j in 0..k {
                t[(k - 1, j)] = vals[j];
            }
            t[(k - 1, k - 1)] = 1.0;
        }

        // Forward solve with the unit lower triangular T block.
        let mut coeffs: Vec<f64> = vals[k..2 * k].to_vec();
        let t = self.t.as_ref().unwrap();
        for i in 0..k {
            for j in 0..i {
                coeffs[i] -= t[(i, j)] * coeffs[j];
            }
        }

        for j in 0..k {
            self.r[(j, new_col)] = coeffs[j];
        }
        gemv_update(&mut v, &self.q[..k], &coeffs)?;
        self.push_normalized(v, &coeffs, ledger)
    }

    /// Classical Gram-Schmidt with one full reorthogonalization pass: three
    /// reductions.
    pub fn qradd_cgs2(&mut self, mut v: DistVector, ledger: &mut ReductionLedger) -> Result<()> {
        self.check_add(&v)?;
        let k = self.active();
        let new_col = k;

        let s = fused_multi_dot(&self.q[..k], &v, ledger, Phase::QrAdd)?;
        gemv_update(&mut v, &self.q[..k], &s)?;
        let z = fused_multi_dot(&self.q[..k], &v, ledger, Phase::QrAdd)?;
        gemv_update(&mut v, &self.q[..k], &z)?;

        let coeffs: Vec<f64> = s.iter().zip(&z).map(|(a, b)| a + b).collect();
        for j in 0..k {
            self.r[(j, new_col)] = coeffs[j];
        }
        self.push_normalized(v, &coeffs, ledger)
    }

    /// Classical Gram-Schmidt with the reorthogonalization of the previous
    /// column delayed one append and merged into the current reduction: two
    /// reductions.
    pub fn qradd_dcgs2(&mut self, mut v: DistVector, ledger: &mut ReductionLedger) -> Result<()> {
        self.check_add(&v)?;
        let k = self.active();
        let new_col = k;

        let mut pending = begin_delayed_multi_dot(&self.q[..k], &v, Phase::QrAdd)?;
        // Reorthogonalize the previous column on the fly once at least three
        // columns are held; its coefficients ride the same reduction.
        let reorth = k >= 3;
        if reorth {
            pending.append(&self.q[..k - 1], &self.q[k - 1])?;
        }
        let vals = pending.finalize(ledger);
        let coeffs = vals[..k].to_vec();

        if reorth {
            let s = &vals[k..2 * k - 1];
            let (head, tail) = self.q.split_at_mut(k - 1);
            gemv_update(&mut tail[0], head, s)?;
            for j in 0..k - 1 {
                self.r[(j, k - 1)] += s[j];
            }
        }

        for j in 0..k {
            self.r[(j, new_col)] = coeffs[j];
        }
        gemv_update(&mut v, &self.q[..k], &coeffs)?;
        self.push_normalized(v, &coeffs, ledger)
    }

    /// Normalization step shared by every kernel, with the breakdown test.
    ///
    /// The original column norm is not available without an extra counted
    /// reduction, so it is estimated from the projection coefficients:
    /// `|v|^2 ~= sum(proj^2) + |v_post|^2`, exact for orthonormal `Q`.
    fn push_normalized(
        &mut self,
        mut v: DistVector,
        proj: &[f64],
        ledger: &mut ReductionLedger,
    ) -> Result<()> {
        let norm = norm2(&v, ledger, Phase::QrAdd);
        let orig = (proj.iter().map(|c| c * c).sum::<f64>() + norm * norm).sqrt();
        let eps_a = 10.0 * f64::EPSILON * (self.layout.len() as f64).sqrt();
        if !norm.is_finite() || norm <= eps_a * orig {
            return Err(Error::Breakdown {
                detail: format!(
                    "residual norm {norm:e} below dependence threshold {:e}",
                    eps_a * orig
                ),
            });
        }
        let k = self.active();
        self.r[(k, k)] = norm;
        for vi in v.as_mut_slice() {
            *vi /= norm;
        }
        self.q.push(v);
        Ok(())
    }

    /// Removes the oldest column with Givens rotations; no reductions.
    ///
    /// Dropping `R`'s first column leaves an upper Hessenberg block; one
    /// rotation per remaining column restores triangular form (with positive
    /// diagonal) while `Q` absorbs the transposed rotations shard-locally.
    pub fn qrdelete_givens(&mut self) {
        let k = self.active();
        assert!(k >= 2, "qrdelete requires at least two active columns");

        for j in 0..k - 1 {
            for i in 0..k {
                self.r[(i, j)] = self.r[(i, j + 1)];
            }
        }
        for j in 0..k - 1 {
            let a = self.r[(j, j)];
            let b = self.r[(j + 1, j)];
            let rr = a.hypot(b);
            let (c, s) = if rr == 0.0 { (1.0, 0.0) } else { (a / rr, b / rr) };
            for col in j..k - 1 {
                let x = self.r[(j, col)];
                let y = self.r[(j + 1, col)];
                self.r[(j, col)] = c * x + s * y;
                self.r[(j + 1, col)] = -s * x + c * y;
            }
            self.r[(j + 1, j)] = 0.0;

            let (head, tail) = self.q.split_at_mut(j + 1);
            let qj = head[j].as_mut_slice();
            let qj1 = tail[0].as_mut_slice();
            for (xj, xj1) in qj.iter_mut().zip(qj1.iter_mut()) {
                let x = *xj;
                let y = *xj1;
                *xj = c * x + s * y;
                *xj1 = -s * x + c * y;
            }
        }
        self.q.pop();
        for i in 0..k {
            self.r[(i, k - 1)] = 0.0;
        }
        for j in 0..k - 1 {
            self.r[(k - 1, j)] = 0.0;
        }
    }

    /// Givens deletion plus a rebuild of `T`'s strict lower part as the
    /// strict lower triangle of `Q^T Q`, in exactly one fused reduction.
    pub fn qrdelete_icwy(&mut self, ledger: &mut ReductionLedger) -> Result<()> {
        self.qrdelete_givens();
        let k = self.active();

        let mut pending = PendingReduction::empty(&self.layout, Phase::QrDelete);
        for i in 1..k {
            pending.append(&self.q[..i], &self.q[i])?;
        }
        let vals = pending.finalize(ledger);

        let t = self.t.as_mut().expect("ICWY factorization carries T");
        t.fill_with_identity();
        let mut at = 0;
        for i in 1..k {
            for j in 0..i {
                t[(i, j)] = vals[at];
                at += 1;
            }
        }
        Ok(())
    }

    /// Solves `R gamma = rhs` over the active block by back substitution.
    pub fn back_substitute(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let k = self.active();
        debug_assert_eq!(rhs.len(), k);
        let mut x = rhs.to_vec();
        for i in (0..k).rev() {
            for j in i + 1..k {
                x[i] -= self.r[(i, j)] * x[j];
            }
            let d = self.r[(i, i)];
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Breakdown {
                    detail: format!("singular R diagonal entry {d:e} at index {i}"),
                });
            }
            x[i] /= d;
        }
        Ok(x)
    }

    /// `|I - Q^T Q|_F` over the active columns.
    pub fn loss_of_orthogonality(&self) -> f64 {
        loss_of_orthogonality(&self.q)
    }
}

/// Frobenius-norm departure of a column set from orthonormality.
///
/// Measured with exact (uncounted) dot products so the metric itself does
/// not drown eps-level losses in summation noise.
pub fn loss_of_orthogonality(cols: &[DistVector]) -> f64 {
    let k = cols.len();
    let mut sum = 0.0;
    for i in 0..k {
        for j in i..k {
            let g = raw_dot(&cols[i], &cols[j]);
            let d = if i == j { 1.0 - g } else { -g };
            sum += if i == j { d * d } else { 2.0 * d * d };
        }
    }
    sum.sqrt()
}

/// Request for a random test matrix with prescribed condition number.
#[derive(Clone, Copy, Debug)]
pub struct OrthoTestMatrix {
    pub n: usize,
    pub m: usize,
    pub kappa_target: f64,
    /// Machine precision of the working real type.
    pub eps: f64,
}

impl OrthoTestMatrix {
    pub fn new(n: usize, m: usize, kappa_target: f64) -> Self {
        Self {
            n,
            m,
            kappa_target,
            eps: f64::EPSILON,
        }
    }
}

/// Builds `U * diag(sigma) * V^T` with random orthogonal factors and
/// geometrically spaced singular values spanning `kappa_target`.
pub fn make_ortho_test_matrix(
    spec: &OrthoTestMatrix,
    layout: &Arc<ShardLayout>,
    seed: u64,
) -> Result<Vec<DistVector>> {
    if spec.m > spec.n || spec.m == 0 {
        return Err(Error::BadTestMatrix(format!(
            "need 1 <= m <= n, got m={} n={}",
            spec.m, spec.n
        )));
    }
    if spec.kappa_target.is_nan() || spec.kappa_target < 1.0 {
        return Err(Error::BadTestMatrix(format!(
            "condition target must be >= 1, got {}",
            spec.kappa_target
        )));
    }
    if layout.len() != spec.n {
        return Err(Error::LengthMismatch(layout.len(), spec.n));
    }
    let (n, m) = (spec.n, spec.m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gu = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let u = gu.qr().q();
    let gv = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let v = gv.qr().q();

    let mut scaled = u;
    for j in 0..m {
        let sigma = if m == 1 {
            1.0
        } else {
            spec.kappa_target.powf(-(j as f64) / (m as f64 - 1.0))
        };
        for i in 0..n {
            scaled[(i, j)] *= sigma;
        }
    }
    let a = scaled * v.transpose();

    Ok((0..m)
        .map(|j| DistVector::from_fn(layout, |i| a[(i, j)]))
        .collect())
}
