//! Simulation-based calibration of model-based inferences.
//!
//! The crate is organised around a small set of building blocks:
//!
//! * [`model_space`]: parameter spaces, data generating processes, priors and
//!   the joint samplers every calibration consumes.
//! * [`posterior_grid`]: deterministic grid-quadrature posteriors with
//!   evidence, marginals, quantiles and interval probabilities.
//! * [`frequentist`]: estimators, losses, expected loss, minimax selection
//!   and coverage.
//! * [`hypothesis`]: p-values, power, profile likelihood, likelihood ratio
//!   tests and Wilks calibration.
//! * [`decision`]: discovery decision rules and their false/true discovery
//!   rate tables.
//! * [`bayes_calibration`]: the joint-simulation pipeline (z-scores,
//!   shrinkages, quantile ranks, eye-chart data).
//! * [`predictive`]: predictive distributions, predictive scores and
//!   Monte Carlo KL divergence.
//! * [`limits`]: anchored confidence intervals and posterior-quantile upper
//!   limits.
//!
//! Every Monte Carlo loop draws from a [`SeedStream`]: replication `i` of a
//! study always sees the same random numbers, whatever the thread count.
//!
//! Significance follows the convention `reject when p < 1 - alpha`, so
//! `alpha = 0.95` gives a 5% false discovery rate.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes_calibration;
pub mod csv;
pub mod decision;
mod error;
pub mod frequentist;
pub mod hypothesis;
pub mod limits;
pub mod mc;
pub mod model_space;
pub mod optimize;
pub mod posterior_grid;
pub mod predictive;
pub mod rng;
pub mod stats;

pub use error::{CalibError, Result};
pub use mc::RiskEstimate;
pub use model_space::{
    GaussianSignalBackground, IndependentPrior, Marginal, Model, NormalMean, Observation, ParamComponent, ParamPoint,
    ParamSpace, Prior,
};

pub use posterior_grid::{GridAxis, GridPosterior, GridSpec};
pub use rng::{SeedStream, StreamRng};
