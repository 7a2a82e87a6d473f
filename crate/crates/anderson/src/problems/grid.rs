//! Uniform interior grid on the unit square and the discrete Laplacian.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linsolve::LinearOperator;
use crate::vector::{DistVector, ShardLayout};

/// Interior points of a uniform grid on `[0,1]^2` with zero Dirichlet
/// boundary, ordered row-major (`idx = iy * nx + ix`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 2 interior points per dimension, got {nx}x{ny}"
            )));
        }
        Ok(Self { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hx(&self) -> f64 {
        1.0 / (self.nx as f64 + 1.0)
    }

    pub fn hy(&self) -> f64 {
        1.0 / (self.ny as f64 + 1.0)
    }

    /// Coordinates of interior node `idx`.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let ix = idx % self.nx;
        let iy = idx / self.nx;
        ((ix as f64 + 1.0) * self.hx(), (iy as f64 + 1.0) * self.hy())
    }
}

/// `out = (-lap_h) u` with the 5-point stencil and zero Dirichlet boundary.
///
/// The negated discrete Laplacian is symmetric positive definite, which is
/// the form the conjugate gradient solver needs.
pub fn apply_neg_laplacian(grid: &Grid2D, u: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx, grid.ny);
    debug_assert_eq!(u.len(), nx * ny);
    let ax = 1.0 / (grid.hx() * grid.hx());
    let ay = 1.0 / (grid.hy() * grid.hy());
    let diag = 2.0 * ax + 2.0 * ay;
    for iy in 0..ny {
        let row = iy * nx;
        for ix in 0..nx {
            let i = row + ix;
            let left = if ix > 0 { u[i - 1] } else { 0.0 };
            let right = if ix + 1 < nx { u[i + 1] } else { 0.0 };
            let down = if iy > 0 { u[i - nx] } else { 0.0 };
            let up = if iy + 1 < ny { u[i + nx] } else { 0.0 };
            out[i] = diag * u[i] - ax * (left + right) - ay * (down + up);
        }
    }
}

/// Matrix-free negated discrete Laplacian over sharded vectors.
#[derive(Clone, Debug)]
pub struct NegLaplacian2D {
    grid: Grid2D,
    layout: Arc<ShardLayout>,
}

impl NegLaplacian2D {
    pub fn new(grid: Grid2D, layout: &Arc<ShardLayout>) -> Result<Self> {
        if layout.len() != grid.len() {
            return Err(Error::LengthMismatch(layout.len(), grid.len()));
        }
        Ok(Self {
            grid,
            layout: Arc::clone(layout),
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
}

impl LinearOperator for NegLaplacian2D {
    fn dimension(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &DistVector) -> Result<DistVector> {
        if x.len() != self.grid.len() {
            return Err(Error::LengthMismatch(x.len(), self.grid.len()));
        }
        let mut out = DistVector::zeros(&self.layout);
        apply_neg_laplacian(&self.grid, x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    fn diagonal(&self) -> Option<DistVector> {
        let g = &self.grid;
        let d = 2.0 / (g.hx() * g.hx()) + 2.0 / (g.hy() * g.hy());
        Some(DistVector::from_fn(&self.layout, |_| d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::{dot, Phase, ReductionLedger};
    use std::f64::consts::PI;

    fn setup(n: usize, p: usize) -> (Grid2D, Arc<ShardLayout>) {
        let grid = Grid2D::square(n).unwrap();
        let layout = Arc::new(ShardLayout::new(grid.len(), p).unwrap());
        (grid, layout)
    }

    #[test]
    fn zero_maps_to_zero() {
        let (grid, layout) = setup(4, 2);
        let op = NegLaplacian2D::new(grid, &layout).unwrap();
        let v = op.apply(&DistVector::zeros(&layout)).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stencil_by_hand_at_center() {
        let (grid, layout) = setup(3, 3);
        let op = NegLaplacian2D::new(grid, &layout).unwrap();
        let center = 4; // (ix=1, iy=1) of the 3x3 interior
        let e = DistVector::from_fn(&layout, |i| if i == center { 1.0 } else { 0.0 });
        let v = op.apply(&e).unwrap();
        let h2 = grid.hx() * grid.hx();
        assert_eq!(v.as_slice()[center], 4.0 / h2);
        for &nb in &[1usize, 3, 5, 7] {
            assert_eq!(v.as_slice()[nb], -1.0 / h2);
        }
        for &far in &[0usize, 2, 6, 8] {
            assert_eq!(v.as_slice()[far], 0.0);
        }
    }

    #[test]
    fn discrete_eigenvectors_are_mapped_to_eigenvalues() {
        let n = 15;
        let (grid, layout) = setup(n, 4);
        let op = NegLaplacian2D::new(grid, &layout).unwrap();
        let h = grid.hx();
        for &(k, l) in &[(1usize, 1usize), (2, 5), (7, 3)] {
            let v = DistVector::from_fn(&layout, |i| {
                let (x, y) = grid.coords(i);
                (k as f64 * PI * x).sin() * (l as f64 * PI * y).sin()
            });
            let lambda = 4.0 / (h * h)
                * ((k as f64 * PI * h / 2.0).sin().powi(2)
                    + (l as f64 * PI * h / 2.0).sin().powi(2));
            let av = op.apply(&v).unwrap();
            for (a, x) in av.iter().zip(v.iter()) {
                assert!(
                    (a - lambda * x).abs() <= 1e-12 * lambda,
                    "k={k} l={l}: {a} vs {}",
                    lambda * x
                );
            }
        }
    }

    #[test]
    fn operator_is_symmetric_positive_definite() {
        let (grid, layout) = setup(10, 4);
        let op = NegLaplacian2D::new(grid, &layout).unwrap();
        let mut ledger = ReductionLedger::new();
        for seed in 0..5u64 {
            let u = DistVector::from_fn(&layout, |i| ((i as f64 + seed as f64 * 31.0) * 0.7).sin());
            let v = DistVector::from_fn(&layout, |i| ((i as f64 * 1.3 + seed as f64) * 0.9).cos());
            let au = op.apply(&u).unwrap();
            let av = op.apply(&v).unwrap();
            let uav = dot(&u, &av, &mut ledger, Phase::Other).unwrap();
            let vau = dot(&v, &au, &mut ledger, Phase::Other).unwrap();
            assert!((uav - vau).abs() <= 1e-12 * uav.abs().max(1.0));
            let uau = dot(&u, &au, &mut ledger, Phase::Other).unwrap();
            assert!(uau > 0.0);
        }
    }

    #[test]
    fn rejects_wrong_lengths() {
        let (grid, _) = setup(4, 2);
        let wrong = Arc::new(ShardLayout::new(7, 1).unwrap());
        assert!(NegLaplacian2D::new(grid, &wrong).is_err());
    }
}
