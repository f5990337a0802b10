//! Perron-root minimization for the zero-diagonal symmetric tridiagonal
//! family `B(λ)`, steady states of the ribosome flow model, and numerical
//! verification of the turnpike bounds satisfied by the optimal rates.
//!
//! The pieces fit together as follows:
//!
//! - [`spectral`] builds `B(λ)` and computes its Perron pair.
//! - [`rfm`] turns a Perron pair into a steady state (`R = σ^{-2}`), and
//!   also offers an eigensolver-free shooting route and an ODE integrator.
//! - [`optimizer`] finds the rates minimizing `σ(B(λ))` under the budget
//!   `Σλ_i ≤ n + 1`, by two independent methods.
//! - [`verifier`] checks the proven bounds on a computed optimum.
//!
//! ```
//! use turnpike_core::optimizer::solve_recursion;
//!
//! let sol = solve_recursion(3, 1e-12).unwrap();
//! assert!((sol.sigma - (1.0 + 0.5 * 2f64.sqrt())).abs() < 1e-12);
//! ```

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod optimizer;
pub mod ratesfile;
pub mod rfm;
pub mod spectral;
pub mod verifier;

pub use error::{Error, Result};
pub use optimizer::{solve_equalization, solve_recursion, OptimalSolution};
pub use rfm::{SensitivityVector, SteadyState, Trajectory};
pub use spectral::{build_matrix, perron, PerronPair, RateVector, TridiagSymMatrix};
pub use verifier::BoundsReport;
