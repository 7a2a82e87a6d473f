//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)]

use std::cell::RefCell;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use anderson::aa::FixedPointProblem;
use anderson::error::Result;
use anderson::qr::QrFactorization;
use anderson::vector::{DistVector, ReductionLedger, ShardLayout};

pub fn layout(n: usize, p: usize) -> Arc<ShardLayout> {
    Arc::new(ShardLayout::new(n, p).unwrap())
}

/// Wraps a problem and records every iterate `G` is evaluated at.
pub struct Recorder<'a> {
    pub inner: &'a dyn FixedPointProblem,
    pub seen: RefCell<Vec<DistVector>>,
}

impl<'a> Recorder<'a> {
    pub fn new(inner: &'a dyn FixedPointProblem) -> Self {
        Self {
            inner,
            seen: RefCell::new(Vec::new()),
        }
    }
}

impl FixedPointProblem for Recorder<'_> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
    fn eval_g(&self, x: &DistVector, ledger: &mut ReductionLedger) -> Result<DistVector> {
        self.seen.borrow_mut().push(x.clone());
        self.inner.eval_g(x, ledger)
    }
}

pub fn dense_from_cols(cols: &[DistVector]) -> DMatrix<f64> {
    let n = cols[0].len();
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j].as_slice()[i])
}

/// Householder QR with R's diagonal normalized positive.
pub fn householder_oracle(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows() {
        if r[(j, j)] < 0.0 {
            for c in 0..r.ncols() {
                r[(j, c)] = -r[(j, c)];
            }
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    (q, r)
}

/// Largest entrywise deviation of the incrementally built factorization
/// from the Householder oracle of `cols` (both sign-normalized).
pub fn householder_deviation(fac: &QrFactorization, cols: &[DistVector]) -> f64 {
    let a = dense_from_cols(cols);
    let (oq, or) = householder_oracle(&a);
    let k = fac.active();
    let mut worst = 0.0f64;
    for j in 0..k {
        for i in 0..=j {
            let rel = (fac.r_entry(i, j) - or[(i, j)]).abs() / or[(j, j)].abs().max(1.0);
            worst = worst.max(rel);
        }
        for i in 0..cols[0].len() {
            worst = worst.max((fac.columns()[j].as_slice()[i] - oq[(i, j)]).abs());
        }
    }
    worst
}

/// Least-squares weights from the dense normal equations.
pub fn normal_equations_gamma(cols: &[DistVector], f: &DistVector) -> DVector<f64> {
    let n = f.len();
    let k = cols.len();
    let fm = DMatrix::from_fn(n, k, |i, j| cols[j].as_slice()[i]);
    let fv = DVector::from_fn(n, |i, _| f.as_slice()[i]);
    let gram = fm.transpose() * &fm;
    let rhs = fm.transpose() * &fv;
    gram.cholesky().expect("full-rank window").solve(&rhs)
}

/// Worst relative per-entry gap between two iterate trajectories.
pub fn trajectory_gap(a: &[DistVector], b: &[DistVector]) -> f64 {
    assert_eq!(a.len(), b.len(), "trajectories have different lengths");
    let mut worst = 0.0f64;
    for (xa, xb) in a.iter().zip(b) {
        let scale = xa
            .iter()
            .map(|v| v.abs())
            .fold(1.0f64, f64::max);
        for (va, vb) in xa.iter().zip(xb.iter()) {
            worst = worst.max((va - vb).abs() / scale);
        }
    }
    worst
}
