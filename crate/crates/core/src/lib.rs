//! Cubic Kolmogorov systems on R^3 carrying the unit sphere as an invariant
//! algebraic surface.
//!
//! The crate has an exact side and a numerical side. [`poly`] and [`model`]
//! certify sphere invariance with rational arithmetic. The other modules
//! simulate the canonical six-parameter system, both deterministically and
//! under linear multiplicative noise, and classify what they observe.

pub mod deterministic;
pub mod equilibria;
pub mod error;
pub mod harness;
pub mod model;
pub mod ode;
pub mod poly;
pub mod stochastic;

pub use error::{Error, Result};
pub use model::{CubicField, ExactParams, GeneralCubicCoeffs, ModelParams};
pub use ode::{IntegratorConfig, Method, Trajectory};
pub use poly::SparsePoly;
