//! Strong approximation of stochastic differential equations whose drift
//! grows superlinearly.
//!
//! The classical explicit Euler scheme applied to an SDE such as
//!
//! ```text
//! dX_t = -X_t^5 dt + X_t dW_t,    X_0 = 1,
//! ```
//!
//! diverges with positive probability: a single large Brownian increment
//! pushes the state into the region where the drift overpowers the step size
//! and the iterates explode super-exponentially. The *tamed* Euler scheme
//!
//! ```text
//! Y_{n+1} = Y_n + (h mu(Y_n)) / (1 + h ||mu(Y_n)||) + sigma(Y_n) dW_n,
//! h = T/N,
//! ```
//!
//! caps every drift increment at norm one while leaving the scheme's strong
//! convergence order untouched, and costs a fraction of an implicit
//! (backward) Euler solve per step. This crate implements the three schemes,
//! the coupled-path strong error machinery used to measure their convergence
//! order, and the pathwise domination diagnostics that certify the tamed
//! iterates remain controlled by an explicit dominating process.
//!
//! # Quick start
//!
//! ```
//! use tamed_sde::{brownian, error_analysis, model, schemes, Real};
//!
//! let problem = model::make_builtin::<Real>("cubic_gl", None).unwrap();
//! let grid = brownian::sample_grid(64, 1, 1.0, 7, 0).unwrap();
//! let path = schemes::tamed_euler(&problem, &grid).unwrap();
//! assert_eq!(path.recorded_steps(), 64);
//!
//! let cfg = error_analysis::StrongErrorConfig::new(16, 1024, 2.0, 50, 7);
//! let estimate = error_analysis::strong_error(&problem, schemes::Scheme::Tamed, &cfg).unwrap();
//! assert!(estimate.value > 0.0);
//! ```
//!
//! # Module map
//!
//! * [`model`] — SDE problem descriptions and the built-in test problems.
//! * [`brownian`] — reproducible Brownian increment grids and coupling by
//!   block-sum coarsening.
//! * [`schemes`] — explicit, tamed, and implicit Euler steppers plus the
//!   closed-form cubic implicit step.
//! * [`dominator`] — the dominating process, its event flags, and the
//!   pathwise domination check.
//! * [`error_analysis`] — strong `L^p` error estimation, convergence-order
//!   fitting, moment sweeps, and the divergence demonstration.
//! * [`bench`] — wall-clock comparisons of the schemes.
//! * [`rng`] — the counter-addressable Gaussian generator shared by all
//!   sampling.
//!
//! All numerical code is generic over the [`Scalar`] floating-point trait;
//! the [`Real`] alias (`f64`) is what the command-line tools and most tests
//! use.

// Validation guards are written as negated comparisons (`!(x > 0)`) so that
// a NaN argument lands in the rejection branch instead of passing.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod brownian;
pub mod dominator;
mod error;
pub mod error_analysis;
mod la;
pub mod model;
pub mod rng;
mod scalar;
pub mod schemes;

pub use error::{Result, SdeError};
pub use scalar::Scalar;

/// Default scalar type of the command-line tools and acceptance tests.
pub type Real = f64;
/// An SDE problem over the default scalar type.
pub type Problem = model::SdeProblem<Real>;
/// A Brownian increment grid over the default scalar type.
pub type Grid = brownian::IncrementGrid<Real>;
/// A discrete trajectory over the default scalar type.
pub type Trajectory = schemes::DiscretePath<Real>;
/// A strong error estimate over the default scalar type.
pub type Estimate = error_analysis::ErrorEstimate<Real>;
/// A dominating-process trace over the default scalar type.
pub type Trace = dominator::DominatorTrace<Real>;
