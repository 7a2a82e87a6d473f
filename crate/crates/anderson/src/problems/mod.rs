//! Benchmark fixed point problems: steady-state heat with a nonlinear
//! reaction term, the Bratu problem, and Gaussian-mixture EM mean
//! estimation.

mod bratu;
mod grid;
mod heat;
mod mixture;

pub use bratu::BratuProblem;
pub use grid::{apply_neg_laplacian, Grid2D, NegLaplacian2D};
pub use heat::{exact_solution, heat_forcing, HeatProblem, HeatTerm};
pub use mixture::{gen_samples, MixtureProblem};
