//! Steady-state 2D heat equation with a nonlinear reaction term.
//!
//! The PDE `u_xx + u_yy + c(u) = f` on the unit square with zero Dirichlet
//! data, discretized with second-order centered differences, gives the
//! algebraic system `(-lap_h) u = c(u) - f_vec`, so the fixed point map is
//! `G(u) = (-lap_h)^{-1} (c(u) - f_vec)`, evaluated with an inner conjugate
//! gradient solve. The forcing is manufactured from the analytic solution
//! `u(x,y) = sin^2(pi x) sin^2(pi y)`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::aa::FixedPointProblem;
use crate::error::{Error, Result};
use crate::linsolve::{pcg_solve, PcgConfig};
use crate::vector::{DistVector, ReductionLedger, ShardLayout};

use super::grid::{Grid2D, NegLaplacian2D};

/// Nonlinear reaction term choices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeatTerm {
    /// `c(u) = u + u e^u + u e^{-u} + (u - e^u)^2`
    Term1,
    /// `c(u) = 100 (u - u^2)`
    Term2,
}

impl HeatTerm {
    pub fn c(self, u: f64) -> f64 {
        match self {
            HeatTerm::Term1 => {
                let eu = u.exp();
                let emu = (-u).exp();
                u + u * eu + u * emu + (u - eu) * (u - eu)
            }
            HeatTerm::Term2 => 100.0 * (u - u * u),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeatTerm::Term1 => "term1",
            HeatTerm::Term2 => "term2",
        }
    }
}

/// Analytic solution the forcing is manufactured from.
pub fn exact_solution(x: f64, y: f64) -> f64 {
    let s = (PI * x).sin() * (PI * y).sin();
    s * s
}

/// Samples the manufactured forcing (including `c(u_exact)`) at the
/// interior nodes.
pub fn heat_forcing(grid: &Grid2D, term: HeatTerm, layout: &Arc<ShardLayout>) -> DistVector {
    DistVector::from_fn(layout, |i| {
        let (x, y) = grid.coords(i);
        let sx2 = (PI * x).sin().powi(2);
        let cx2 = (PI * x).cos().powi(2);
        let sy2 = (PI * y).sin().powi(2);
        let cy2 = (PI * y).cos().powi(2);
        2.0 * PI * PI * (cx2 - sx2) * sy2
            + 2.0 * PI * PI * (cy2 - sy2) * sx2
            + term.c(exact_solution(x, y))
    })
}

#[derive(Clone, Debug)]
pub struct HeatProblem {
    grid: Grid2D,
    term: HeatTerm,
    pcg: PcgConfig,
    layout: Arc<ShardLayout>,
    operator: NegLaplacian2D,
    forcing: DistVector,
}

impl HeatProblem {
    pub fn new(grid: Grid2D, term: HeatTerm, pcg: PcgConfig, shards: usize) -> Result<Self> {
        pcg.validate()?;
        let layout = Arc::new(ShardLayout::new(grid.len(), shards)?);
        let operator = NegLaplacian2D::new(grid, &layout)?;
        let forcing = heat_forcing(&grid, term, &layout);
        Ok(Self {
            grid,
            term,
            pcg,
            layout,
            operator,
            forcing,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn term(&self) -> HeatTerm {
        self.term
    }

    pub fn layout(&self) -> &Arc<ShardLayout> {
        &self.layout
    }

    pub fn forcing(&self) -> &DistVector {
        &self.forcing
    }

    pub fn operator(&self) -> &NegLaplacian2D {
        &self.operator
    }

    /// The analytic solution sampled on this grid.
    pub fn exact_on_grid(&self) -> DistVector {
        DistVector::from_fn(&self.layout, |i| {
            let (x, y) = self.grid.coords(i);
            exact_solution(x, y)
        })
    }
}

impl FixedPointProblem for HeatProblem {
    fn dimension(&self) -> usize {
        self.grid.len()
    }

    fn eval_g(&self, u: &DistVector, ledger: &mut ReductionLedger) -> Result<DistVector> {
        if u.len() != self.grid.len() {
            return Err(Error::LengthMismatch(u.len(), self.grid.len()));
        }
        let mut rhs = DistVector::zeros(&self.layout);
        for (r, (&ui, &fi)) in rhs
            .as_mut_slice()
            .iter_mut()
            .zip(u.iter().zip(self.forcing.iter()))
        {
            *r = self.term.c(ui) - fi;
            // Reject magnitudes whose squares leave the finite range, so the
            // inner solve never sees overflow-poisoned reductions.
            if !r.is_finite() || r.abs() > 1e150 {
                return Err(Error::Diverged(format!(
                    "reaction term overflowed at u = {ui:e}"
                )));
            }
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
