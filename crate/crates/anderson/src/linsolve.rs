//! Preconditioned conjugate gradients over sharded vectors.
//!
//! Used by the PDE fixed point functions for their inner solves. Every dot
//! product and norm goes through the reduction ledger (phase `Other`), so an
//! outer solver's ledger also accounts for the inner solve's communication.

use crate::error::{Error, Result};
use crate::vector::{axpy, dot, norm2, scale, DistVector, Phase, ReductionLedger};

/// Symmetric positive definite operator in matrix-free form.
pub trait LinearOperator {
    fn dimension(&self) -> usize;
    fn apply(&self, x: &DistVector) -> Result<DistVector>;
    /// Operator diagonal, when cheaply available (enables Jacobi
    /// preconditioning).
    fn diagonal(&self) -> Option<DistVector> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Clone, Copy, Debug)]
pub struct PcgConfig {
    /// Relative residual tolerance: stop at `|b - Ax| <= rel_tol * |b|`.
    pub rel_tol: f64,
    pub max_iters: usize,
    pub preconditioner: Preconditioner,
}

impl Default for PcgConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iters: 20_000,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl PcgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidConfig("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PcgOutcome {
    pub x: DistVector,
    pub iterations: usize,
    pub converged: bool,
    /// Final true relative residual `|b - Ax| / |b|`.
    pub rel_residual: f64,
    /// Preconditioned residual norms `sqrt(r^T M^-1 r)`, one entry before
    /// the first iteration and one after each.
    pub precond_residuals: Vec<f64>,
}

/// `z = D^-1 r` elementwise.
pub fn jacobi_apply(diag: &DistVector, r: &DistVector) -> Result<DistVector> {
    if diag.len() != r.len() {
        return Err(Error::LengthMismatch(diag.len(), r.len()));
    }
    if let Some(i) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal(i));
    }
    let mut z = r.clone();
    for (zi, di) in z.as_mut_slice().iter_mut().zip(diag.iter()) {
        *zi /= di;
    }
    Ok(z)
}

/// Solves `A x = b` for SPD `A` to `|b - Ax| <= rel_tol * |b|`.
///
/// Convergence is confirmed against the true residual before returning; if
/// the recurrence residual has drifted, iteration continues from the
/// recomputed one. Nonconvergence within `max_iters` is reported as a
/// flagged outcome, not an error; a nonpositive curvature `p^T A p` is.
pub fn pcg_solve(
    a: &dyn LinearOperator,
    b: &DistVector,
    config: &PcgConfig,
    x0: &DistVector,
    ledger: &mut ReductionLedger,
) -> Result<PcgOutcome> {
    config.validate()?;
    if b.len() != a.dimension() {
        return Err(Error::LengthMismatch(b.len(), a.dimension()));
    }
    if x0.len() != b.len() {
        return Err(Error::LengthMismatch(x0.len(), b.len()));
    }

    let diag = match config.preconditioner {
        Preconditioner::Jacobi => Some(a.diagonal().ok_or_else(|| {
            Error::InvalidConfig("Jacobi preconditioning needs an operator diagonal".into())
        })?),
        Preconditioner::None => None,
    };
    let precond = |r: &DistVector| -> Result<DistVector> {
        match &diag {
            Some(d) => jacobi_apply(d, r),
            None => Ok(r.clone()),
        }
    };

    let b_norm = norm2(b, ledger, Phase::Other);
    if b_norm == 0.0 {
        return Ok(PcgOutcome {
            x: DistVector::zeros(b.layout()),
            iterations: 0,
            converged: true,
            rel_residual: 0.0,
            precond_residuals: vec![0.0],
        });
    }

    let mut x = x0.clone();
    let mut r = if x.iter().all(|&v| v == 0.0) {
        b.clone()
    } else {
        let ax = a.apply(&x)?;
        b.sub(&ax)?
    };
    let mut z = precond(&r)?;
    let mut p = z.clone();
    let mut rho = dot(&r, &z, ledger, Phase::Other)?;
    let mut residuals = vec![rho.max(0.0).sqrt()];

    for it in 1..=config.max_iters {
        let ap = a.apply(&p)?;
        let pap = dot(&p, &ap, ledger, Phase::Other)?;
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::IndefiniteOperator(pap));
        }
        let alpha = rho / pap;
        axpy(&mut x, alpha, &p)?;
        axpy(&mut r, -alpha, &ap)?;

        let r_norm = norm2(&r, ledger, Phase::Other);
        if r_norm <= config.rel_tol * b_norm {
            // Confirm with the true residual; the recurrence may have
            // drifted over many iterations.
            let ax = a.apply(&x)?;
            let r_true = b.sub(&ax)?;
            let rt_norm = norm2(&r_true, ledger, Phase::Other);
            if rt_norm <= config.rel_tol * b_norm {
                z = precond(&r)?;
                rho = dot(&r, &z, ledger, Phase::Other)?;
                residuals.push(rho.max(0.0).sqrt());
                return Ok(PcgOutcome {
                    x,
                    iterations: it,
                    converged: true,
                    rel_residual: rt_norm / b_norm,
                    precond_residuals: residuals,
                });
            }
            // Restart the direction from the recomputed residual.
            r = r_true;
            z = precond(&r)?;
            p = z.clone();
            rho = dot(&r, &z, ledger, Phase::Other)?;
            residuals.push(rho.max(0.0).sqrt());
            continue;
        }

        z = precond(&r)?;
        let rho_next = dot(&r, &z, ledger, Phase::Other)?;
        let beta = rho_next / rho;
        rho = rho_next;
        scale(&mut p, beta);
        axpy(&mut p, 1.0, &z)?;
        residuals.push(rho.max(0.0).sqrt());
    }

    let ax = a.apply(&x)?;
    let r_true = b.sub(&ax)?;
    let rt_norm = norm2(&r_true, ledger, Phase::Other);
    Ok(PcgOutcome {
        x,
        iterations: config.max_iters,
        converged: false,
        rel_residual: rt_norm / b_norm,
        precond_residuals: residuals,
    })
}
