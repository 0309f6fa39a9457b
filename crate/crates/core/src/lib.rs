//! Tomographic reconstruction toolkit for phase-insensitive photon detectors.
//!
//! The crate reconstructs the POVM matrix `Π` of a detector from
//! probe-state/outcome data by solving the constrained least-squares problem
//!
//! ```text
//!   min ||P - F Π||²   subject to  Π ≥ 0,  row sums of Π = 1
//! ```
//!
//! with a two-stage, two-metric projected truncated-Newton method. Around the
//! solver it ships everything needed to validate reconstructions end to end:
//!
//! - [`matrix`]/[`io`]: dense and banded matrix types, a portable binary
//!   format and CSV for debugging;
//! - [`mem`]: closed-form memory estimators for sizing runs;
//! - [`detector`]: the analytic model of a time-multiplexed click detector
//!   (probe matrices, bin-click probabilities, Poisson-binomial POVMs, a
//!   multinomial outcome simulator, and a parameter fit);
//! - [`projection`]: Euclidean simplex projections (Condat's algorithm plus a
//!   sort-based reference oracle);
//! - [`engine`]: row-block data distribution, the two-step banded `F·Π`
//!   kernel, tree reductions and micro-benchmarks;
//! - [`kernels`]: objective/gradient/Hessian-product kernels and the
//!   diagonally preconditioned CG used by the solver;
//! - [`solver`]: the two-stage driver, regularisation, long-range smoothing
//!   and convergence reporting;
//! - [`analysis`]: per-outcome fidelities and extended-precision Wigner
//!   functions of diagonal operators;
//! - [`wide`]: the wide-exponent software floats backing the Wigner
//!   recurrences.

pub mod analysis;
pub mod detector;
pub mod engine;
pub mod error;
pub mod io;
pub mod kernels;
pub mod matrix;
pub mod mem;
pub mod projection;
pub mod solver;
pub mod wide;

pub use error::{Error, Result};
pub use matrix::{BandedMatrix, DenseMatrix, PovmMatrix, ProblemInstance};
