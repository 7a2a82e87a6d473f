//! Anderson acceleration of fixed point iterations.
//!
//! Given `G` with fixed point `x* = G(x*)`, plain Picard iteration applies
//! `x_{i+1} = G(x_i)`. Anderson acceleration instead combines the last
//! `m_i = min(m, i)` residual differences: it keeps QR factorizations of the
//! difference windows, solves a small least-squares problem for weights
//! `gamma`, and extrapolates `x_{i+1} = G(x_i) - sum_j gamma_j * dg_j`.
//!
//! The residual-difference window lives only inside the incremental
//! [`QrFactorization`]; the paired `G`-difference columns are kept in a
//! cyclic buffer aligned column-for-column with it.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::qr::{OrthMethod, QrFactorization};
use crate::vector::{
    axpy, fused_multi_dot, norm2, DistVector, Phase, ReductionLedger, ShardLayout,
};

/// A fixed point problem `x = G(x)`.
///
/// `eval_g` must be a pure function of `x` for a fixed problem
/// configuration; any global reductions it performs internally are charged
/// to the ledger (conventionally in [`Phase::Other`]).
pub trait FixedPointProblem {
    fn dimension(&self) -> usize;
    fn eval_g(&self, x: &DistVector, ledger: &mut ReductionLedger) -> Result<DistVector>;
}

#[derive(Clone, Copy, Debug)]
pub struct AaConfig {
    /// Window depth `m >= 1`.
    pub m: usize,
    /// Convergence tolerance on the iterate update norm.
    pub tol: f64,
    pub max_iters: usize,
    pub method: OrthMethod,
}

impl AaConfig {
    pub fn new(m: usize, tol: f64, max_iters: usize, method: OrthMethod) -> Self {
        Self {
            m,
            tol,
            max_iters,
            method,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidConfig("window depth m must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration trace of a solve.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|x_{i+1} - x_i|_2`.
    pub update_norm: f64,
    /// Active window size after this iteration's update.
    pub window: usize,
    /// Cumulative ledger snapshot at the end of the iteration.
    pub ledger: ReductionLedger,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: DistVector,
    pub iterations: usize,
    pub converged: bool,
    /// The iterate left the domain where `G` can be evaluated (overflow);
    /// the solve was abandoned at the last finite iterate.
    pub diverged: bool,
    pub history: Vec<IterationRecord>,
}

/// One least-squares update and solve.
///
/// Evicts the oldest column when the window is full (Givens deletion, or the
/// ICWY variant when the factorization carries a correction matrix), appends
/// `delta_f` with the configured kernel, then solves
/// `R gamma = Q^T f_i` with the right-hand side formed in one fused
/// reduction.
pub fn lsp_solve(
    fac: &mut QrFactorization,
    delta_f: DistVector,
    f_i: &DistVector,
    ledger: &mut ReductionLedger,
) -> Result<Vec<f64>> {
    if fac.active() == fac.capacity() {
        if fac.capacity() == 1 {
            fac.clear();
        } else if fac.method() == OrthMethod::Icwy {
            fac.qrdelete_icwy(ledger)?;
        } else {
            fac.qrdelete_givens();
        }
    }
    fac.qradd(delta_f, ledger)?;
    let rhs = fused_multi_dot(fac.columns(), f_i, ledger, Phase::LspRhs)?;
    fac.back_substitute(&rhs)
}

/// Runs Anderson acceleration from `x0` until the update norm drops below
/// `config.tol` or `config.max_iters` is reached (flagged, not an error).
///
/// An orthogonalization breakdown clears the window and restarts from the
/// current iterate with a plain Picard step; a second consecutive breakdown
/// is a hard error.
pub fn aa_solve(
    problem: &dyn FixedPointProblem,
    config: &AaConfig,
    x0: &DistVector,
    ledger: &mut ReductionLedger,
) -> Result<SolveResult> {
    config.validate()?;
    if x0.len() != problem.dimension() {
        return Err(Error::LengthMismatch(x0.len(), problem.dimension()));
    }

    let mut fac = QrFactorization::new(x0.layout(), config.m, config.method);
    let mut dg_window: VecDeque<DistVector> = VecDeque::with_capacity(config.m);
    let mut history = Vec::new();

    // Bootstrap: x_1 = G(x_0), f_0 = G(x_0) - x_0.
    let g0 = problem.eval_g(x0, ledger)?;
    let mut f_prev = g0.sub(x0)?;
    let mut g_prev = g0.clone();
    let mut x = g0;
    let mut consecutive_breakdowns = 0usize;

    for i in 1..=config.max_iters {
        // An iterate that overflows G's domain ends the solve as a flagged
        // nonconvergence at the last finite iterate.
        let gx = match problem.eval_g(&x, ledger) {
            Ok(gx) => gx,
            Err(Error::Diverged(_)) => {
                return Ok(SolveResult {
                    x,
                    iterations: i,
                    converged: false,
                    diverged: true,
                    history,
                })
            }
            Err(e) => return Err(e),
        };
        let f = gx.sub(&x)?;
        let delta_f = f.sub(&f_prev)?;
        let delta_g = gx.sub(&g_prev)?;

        let x_next = match lsp_solve(&mut fac, delta_f, &f, ledger) {
            Ok(gamma) => {
                if dg_window.len() == config.m {
                    dg_window.pop_front();
                }
                dg_window.push_back(delta_g);
                consecutive_breakdowns = 0;
                let mut next = gx.clone();
                for (col, &g) in dg_window.iter().zip(&gamma) {
                    axpy(&mut next, -g, col)?;
                }
                next
            }
            Err(Error::Breakdown { .. }) => {
                consecutive_breakdowns += 1;
                if consecutive_breakdowns >= 2 {
                    return Err(Error::RepeatedBreakdown);
                }
                fac.clear();
                dg_window.clear();
                gx.clone()
            }
            Err(e) => return Err(e),
        };

        let update = x_next.sub(&x)?;
        let update_norm = norm2(&update, ledger, Phase::NormCheck);
        history.push(IterationRecord {
            iteration: i,
            update_norm,
            window: fac.active(),
            ledger: ledger.clone(),
        });

        f_prev = f;
        g_prev = gx;
        x = x_next;

        if update_norm < config.tol {
            return Ok(SolveResult {
                x,
                iterations: i,
                converged: true,
                diverged: false,
                history,
            });
        }
    }

    Ok(SolveResult {
        x,
        iterations: config.max_iters,
        converged: false,
        diverged: false,
        history,
    })
}

/// Plain Picard iteration baseline: `x_{i+1} = G(x_i)` until the update norm
/// drops below `tol` or `max_iters` is reached.
pub fn fp_solve(
    problem: &dyn FixedPointProblem,
    tol: f64,
    max_iters: usize,
    x0: &DistVector,
    ledger: &mut ReductionLedger,
) -> Result<SolveResult> {
    if x0.len() != problem.dimension() {
        return Err(Error::LengthMismatch(x0.len(), problem.dimension()));
    }
    let mut x = x0.clone();
    let mut history = Vec::new();
    for i in 1..=max_iters {
        let x_next = match problem.eval_g(&x, ledger) {
            Ok(v) => v,
            Err(Error::Diverged(_)) => {
                return Ok(SolveResult {
                    x,
                    iterations: i,
                    converged: false,
                    diverged: true,
                    history,
                })
            }
            Err(e) => return Err(e),
        };
        let update = x_next.sub(&x)?;
        let update_norm = norm2(&update, ledger, Phase::NormCheck);
        history.push(IterationRecord {
            iteration: i,
            update_norm,
            window: 0,
            ledger: ledger.clone(),
        });
        x = x_next;
        if update_norm < tol {
            return Ok(SolveResult {
                x,
                iterations: i,
                converged: true,
                diverged: false,
                history,
            });
        }
    }
    Ok(SolveResult {
        x,
        iterations: max_iters,
        converged: false,
        diverged: false,
        history,
    })
}

/// Measured reduction counts for the window fill ("startup") and one
/// additional full-window iteration ("recycle").
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyncProfile {
    pub startup_qradd: u64,
    pub startup_qrdelete: u64,
    pub recycle_qradd: u64,
    pub recycle_qrdelete: u64,
}

impl SyncProfile {
    pub fn startup_total(&self) -> u64 {
        self.startup_qradd + self.startup_qrdelete
    }

    pub fn recycle_total(&self) -> u64 {
        self.recycle_qradd + self.recycle_qrdelete
    }
}

/// Drives the least-squares update with a synthetic residual sequence and
/// reports the ledger deltas of the startup and recycle phases.
pub fn measure_sync_profile(
    method: OrthMethod,
    m: usize,
    n: usize,
    shards: usize,
    seed: u64,
) -> Result<SyncProfile> {
    let n = n.max(4 * m).max(shards);
    let layout = Arc::new(ShardLayout::new(n, shards)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_vec =
        |rng: &mut ChaCha8Rng| DistVector::from_fn(&layout, |_| rng.sample::<f64, _>(StandardNormal));

    let mut fac = QrFactorization::new(&layout, m, method);
    let mut ledger = ReductionLedger::new();
    for _ in 1..=m {
        let delta_f = random_vec(&mut rng);
        let f = random_vec(&mut rng);
        lsp_solve(&mut fac, delta_f, &f, &mut ledger)?;
    }
    let startup = ledger.clone();

    let delta_f = random_vec(&mut rng);
    let f = random_vec(&mut rng);
    lsp_solve(&mut fac, delta_f, &f, &mut ledger)?;
    let recycle = ledger.since(&startup);

    Ok(SyncProfile {
        startup_qradd: startup.count(Phase::QrAdd),
        startup_qrdelete: startup.count(Phase::QrDelete),
        recycle_qradd: recycle.count(Phase::QrAdd),
        recycle_qrdelete: recycle.count(Phase::QrDelete),
    })
}
