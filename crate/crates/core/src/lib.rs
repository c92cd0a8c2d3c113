//! # qentropy
//!
//! Nonextensive (Tsallis) maximum-entropy and minimum relative-entropy
//! inference on finite weighted grids.
//!
//! The crate is organised bottom-up:
//!
//! - [`qalgebra`]: q-logarithm, q-exponential, q-product and the
//!   pseudo-additive combiner, all with the Tsallis cut-off.
//! - [`distribution`]: support grids, densities, moment constraints and the
//!   two expectation functionals (q-expectation and normalized q-expectation).
//! - [`entropy`]: Shannon/Tsallis entropy and KL/Tsallis relative-entropy.
//! - [`solver`]: Lagrange-multiplier solvers for the generalized maxent and
//!   minxent distributions, plus thermodynamic identity checks.
//! - [`triangle`]: expectation matching and the nonextensive triangle
//!   equality `I(l‖r) = I(l‖p) + I(p‖r) + (q-1) I(l‖p) I(p‖r)`.
//!
//! ```rust
//! use qentropy::{ConstraintSet, ConstraintKind, Distribution, MomentFunction, QIndex, SupportGrid};
//! use qentropy::solver::{solve, Reference, SolverOptions};
//!
//! let grid = SupportGrid::counting(2);
//! let prior = Distribution::new(grid, vec![0.5, 0.5]).unwrap();
//! let u = MomentFunction::new("u", vec![0.0, 1.0]);
//! let constraints = ConstraintSet::new(vec![u], vec![0.09], ConstraintKind::QExpectation).unwrap();
//! let q = QIndex::new(2.0).unwrap();
//!
//! let res = solve(&Reference::Prior(prior), &constraints, q, &SolverOptions::default()).unwrap();
//! assert!((res.multipliers[0] - 8.0 / 3.0).abs() < 1e-9);
//! assert!((res.divergence - 0.16).abs() < 1e-9);
//! ```

#![forbid(unsafe_code)]

pub mod distribution;
pub mod entropy;
mod error;
pub mod qalgebra;
pub mod solver;
pub mod triangle;

pub use distribution::{
    absolutely_continuous, integrate, normalized_q_expectation, q_expectation, uniform_on,
    ConstraintKind, ConstraintSet, Distribution, MomentFunction, SupportGrid,
};
pub use error::{Error, Result};
pub use qalgebra::{exp_q, ln_q, pseudo_add, q_log_ratio, q_product, Composition, QIndex};
