//! Anderson-accelerated fixed point solvers with interchangeable QR update
//! kernels and exact accounting of global reductions.
//!
//! The crate simulates a row-sharded distributed run inside a single process:
//! every vector is split into contiguous shards, and every operation that a
//! distributed implementation would realize as a global reduction (dot
//! products, norms, fused multi-dots) increments a [`vector::ReductionLedger`]
//! counter, tagged by solver phase. The counts are exact — a fused reduction
//! of any width costs one, a delayed reduction merged into a later one costs
//! one for the pair — so the ledger reproduces the synchronization behavior
//! of a real MPI run without MPI.
//!
//! On top of the vector backend sit:
//!
//! - [`qr`]: an incremental QR factorization of the acceleration window with
//!   four update kernels (MGS, ICWY-MGS, CGS-2, DCGS-2) and two column
//!   deletion routines,
//! - [`aa`]: the Anderson acceleration driver and least-squares solve,
//! - [`linsolve`]: preconditioned conjugate gradients for the PDE benchmarks,
//! - [`problems`]: steady-state heat, Bratu, and Gaussian-mixture EM fixed
//!   point problems,
//! - [`perf`]: an analytic synchronization/time model matching the ledger.

pub mod aa;
pub mod error;
mod exact;
pub mod linsolve;
pub mod perf;
pub mod problems;
pub mod qr;
pub mod vector;

pub use error::{Error, Result};
