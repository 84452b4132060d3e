//! Steepest descent on Euclidean space and the unit sphere.
//!
//! The crate provides
//!
//! * [`manifold`]: points, tangent vectors, exponential map and retraction;
//! * [`objective`]: built-in test functions with exact gradients and a
//!   finite-difference checker;
//! * [`optimize`]: Riemannian, momentum and stochastic descent runners;
//! * [`noise`]: seeded zero-mean noise with moment audits;
//! * [`analysis`]: traces, seed averaging and convergence-rate fits.
//!
//! ```
//! use descent::{Manifold, Objective, RunConfig, ScheduleSpec, StepRule, run_rgd};
//! use nalgebra::{DMatrix, DVector};
//!
//! let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
//! let f = Objective::quadratic(a, DVector::from_column_slice(&[1.0, 2.0])).unwrap();
//! let x0 = Manifold::euclidean(2).unwrap().point_from_slice(&[0.0, 0.0]).unwrap();
//! let cfg = RunConfig::new(f, x0, ScheduleSpec::fixed(0.25).unwrap())
//!     .with_step_rule(StepRule::Ambient)
//!     .with_max_iters(100);
//! let trace = run_rgd(&cfg).unwrap();
//! assert!(trace.last().unwrap().gap.unwrap() < 1e-12);
//! ```

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod noise;
pub mod objective;
pub mod optimize;

pub use analysis::{
    check_bound, energy_series, fit_rate, mean_trace, monte_carlo_mean, BoundConstant, BoundReport, Column, RateFit,
    Record, Trace,
};
pub use error::{Error, Result};
pub use manifold::{Manifold, Point, Tangent};
pub use noise::{NoiseFamily, NoiseSpec, RngState};
pub use objective::{Objective, ObjectiveKind, ScalarField};
pub use optimize::{
    run, run_momentum, run_rgd, run_sgd, Method, Momentum, RunConfig, ScheduleSpec, StepRule, StepSize,
};
