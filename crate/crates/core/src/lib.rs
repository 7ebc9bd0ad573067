//! Generalized ODEs driven by Kurzweil-Stieltjes integrals.
//!
//! The crate is organised bottom-up:
//!
//! * [`funcspace`] holds regulated piecewise paths, Stieltjes measures and gauges.
//! * [`kurzweil`] evaluates gauge-limit Riemann sums and Perron-Stieltjes integrals.
//! * [`linsys`] builds the fundamental operator of a linear generalized ODE.
//! * [`dichotomy`] extracts a projection family and fits exponential-dichotomy constants.
//! * [`lp_manifold`] solves the Lyapunov-Perron fixed point for the stable manifold.
//! * [`apps`] converts impulsive and measure differential equations into that setting.
//! * [`config`] is the JSON run-configuration schema shared with the CLI.

pub mod apps;
pub mod config;
pub mod dichotomy;
pub mod error;
pub mod funcspace;
pub mod kurzweil;
pub mod linalg;
pub mod linsys;
pub mod lp_manifold;
pub mod nonlinear;
pub mod ode;
pub mod quad;

pub use error::{Error, Result};
pub use funcspace::{Breakpoint, Gauge, PiecewisePath, Segment, StieltjesMeasure, TaggedDivision};
pub use nalgebra::{DMatrix, DVector};

/// Crate version, stamped into CLI output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
