//! Numerical laboratory for stochastic variational inequalities
//! dX ∈ b(X)dt + σ(X)∘dw - ∂φ(X)dt.
//!
//! The crate is organized around five layers:
//!
//! * [`monotone`] — the convex-function catalog with resolvents, Yosida
//!   regularizations, minimal sections, graph sampling and interior
//!   certificates;
//! * [`paths`] — uniform-grid paths with total variation, path-space
//!   metric, sup distance and time-change inverses;
//! * [`dvi`] — the implicit proximal integrator for deterministic
//!   variational inequalities and controlled skeleton pairs;
//! * [`svi`] — dyadic Brownian drivers, piecewise-linear approximants of
//!   the stochastic problem, the exact reflected oracle and the solution
//!   validator;
//! * [`experiments`] — seeded Monte Carlo studies with reproducible,
//!   worker-count-independent reports.

pub mod coeffs;
pub mod dvi;
pub mod error;
pub mod experiments;
pub mod monotone;
pub mod paths;
pub mod svi;
pub(crate) mod vecmath;

pub use error::{Error, Result};
