//! 2D Bratu problem: `u_xx + u_yy + lambda e^u = 0` with zero Dirichlet
//! data, as the fixed point map `G(u) = (-lap_h)^{-1} (lambda e^u)`.
//!
//! Near the critical parameter (lambda ~ 6.8) the lower solution branch
//! still exists but the map is only weakly contractive, which makes this a
//! hard acceleration benchmark.

use std::sync::Arc;

use crate::aa::FixedPointProblem;
use crate::error::{Error, Result};
use crate::linsolve::{pcg_solve, PcgConfig};
use crate::vector::{DistVector, ReductionLedger, ShardLayout};

use super::grid::{Grid2D, NegLaplacian2D};

#[derive(Clone, Debug)]
pub struct BratuProblem {
    grid: Grid2D,
    lambda: f64,
    pcg: PcgConfig,
    layout: Arc<ShardLayout>,
    operator: NegLaplacian2D,
}

impl BratuProblem {
    pub fn new(grid: Grid2D, lambda: f64, pcg: PcgConfig, shards: usize) -> Result<Self> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        pcg.validate()?;
        let layout = Arc::new(ShardLayout::new(grid.len(), shards)?);
        let operator = NegLaplacian2D::new(grid, &layout)?;
        Ok(Self {
            grid,
            lambda,
            pcg,
            layout,
            operator,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn layout(&self) -> &Arc<ShardLayout> {
        &self.layout
    }

    pub fn operator(&self) -> &NegLaplacian2D {
        &self.operator
    }
}

impl FixedPointProblem for BratuProblem {
    fn dimension(&self) -> usize {
        self.grid.len()
    }

    fn eval_g(&self, u: &DistVector, ledger: &mut ReductionLedger) -> Result<DistVector> {
        if u.len() != self.grid.len() {
            return Err(Error::LengthMismatch(u.len(), self.grid.len()));
        }
        let mut rhs = DistVector::zeros(&self.layout);
        for (r, &ui) in rhs.as_mut_slice().iter_mut().zip(u.iter()) {
            // e^u must stay squarable inside the inner solve's reductions.
            if !ui.is_finite() || ui > 340.0 {
                return Err(Error::Diverged(format!("e^u overflows at u = {ui:e}")));
            }
            *r = self.lambda * ui.exp();
        }
        let x0 = DistVector::zeros(&self.layout);
        let out = pcg_solve(&self.operator, &rhs, &self.pcg, &x0, ledger)?;
        if !out.converged {
            return Err(Error::InnerSolve {
                iterations: out.iterations,
                rel_residual: out.rel_residual,
            });
        }
        Ok(out.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::LinearOperator;

    fn problem(n: usize, lambda: f64) -> BratuProblem {
        BratuProblem::new(Grid2D::square(n).unwrap(), lambda, PcgConfig::default(), 2).unwrap()
    }

    #[test]
    fn zero_iterate_gives_constant_source_solve() {
        let p = problem(12, 6.7);
        let mut ledger = ReductionLedger::new();
        let g = p.eval_g(&DistVector::zeros(p.layout()), &mut ledger).unwrap();
        // (-lap) g = lambda everywhere.
        let ag = p.operator().apply(&g).unwrap();
        for a in ag.iter() {
            assert!((a - 6.7).abs() <= 1e-8 * 6.7);
        }
    }

    #[test]
    fn lambda_zero_maps_everything_to_zero() {
        let p = problem(8, 0.0);
        let mut ledger = ReductionLedger::new();
        let u = DistVector::from_fn(p.layout(), |i| (i as f64 * 0.1).sin());
        let g = p.eval_g(&u, &mut ledger).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn overflowing_iterate_is_a_divergence_error() {
        let p = problem(8, 6.7);
        let mut bad = DistVector::zeros(p.layout());
        bad.as_mut_slice()[0] = 800.0;
        let mut ledger = ReductionLedger::new();
        assert!(matches!(
            p.eval_g(&bad, &mut ledger),
            Err(Error::Diverged(_))
        ));
    }

    #[test]
    fn negative_lambda_is_rejected() {
        assert!(BratuProblem::new(
            Grid2D::square(8).unwrap(),
            -1.0,
            PcgConfig::default(),
            1
        )
        .is_err());
    }
}
