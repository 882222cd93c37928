//! Energy-adaptive gradient descent (AEGD) and friends.
//!
//! * [`optimizers`]: AEGD (global and element-wise), stochastic AEGD, AEGDW,
//!   and the GD / heavy-ball / Adam baselines, plus a seeded run loop.
//! * [`objectives`]: benchmark problems with analytic gradients and
//!   finite-sum sampling.
//! * [`kmeans`]: k-means as an optimisation problem, with a Lloyd baseline.
//! * [`analysis`]: checks of the energy identity, step-size thresholds,
//!   convergence rates and stochastic estimates.
//! * [`cli`]: the `aegd` command-line front end.

// `!(x > 0.0)` is how NaN gets rejected alongside the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod kmeans;
pub mod objectives;
pub mod optimizers;
pub mod rng;

pub use error::{Error, Result};
pub use objectives::Objective;
pub use optimizers::{
    run, run_recorded, OptimizerConfig, OptimizerKind, Recording, StoppingRule, Trace,
};
