//! Zig-Zag sampling on one-dimensional heavy-tailed targets.
//!
//! The sampler produces exact event skeletons; path functionals are then
//! integrated in closed form. The `theory` module evaluates Lyapunov drift
//! conditions and the convergence bounds that follow from them, and
//! `experiments` runs Monte Carlo studies of estimator error.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod quadrature;
pub mod pdmp;
pub mod rng;
pub mod targets;
pub mod theory;

pub use error::{Error, Result};
pub use estimators::{occupation_curve, occupation_time, time_average, IndicatorQuery, OccupationResult};
pub use pdmp::{simulate, simulate_with, Event, EventKind, SimOptions, Skeleton, Velocity, ZigZagState};
pub use rng::RngStream;
pub use targets::{tail_probability_truth, RefreshPolicy, Target};
