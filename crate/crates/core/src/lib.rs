//! Counterfactual slope estimands and their doubly robust estimators.
//!
//! A counterfactual slope is the slope of the linear projection of
//! `E(Y_d | G)` (or of its logit) onto a background variable `G`, where `Y_d`
//! is the potential outcome under universal assignment of transition status
//! `d`. The crate provides:
//!
//! - [`data`]: loading and filtering of analysis-ready tables,
//! - [`nuisance`]: propensity, outcome and `tau` regressions (parametric GLMs
//!   or single-hidden-layer networks, optionally cross-fitted),
//! - [`eif`]: pseudo-outcomes, slope estimators and their influence functions,
//! - [`inference`]: contrasts of slopes with Wald inference,
//! - [`simulation`]: synthetic data with stored potential outcomes, oracle
//!   truths and Monte Carlo experiments.

pub mod data;
pub mod eif;
pub mod error;
pub mod inference;
pub mod nuisance;
pub mod rng;
pub mod simulation;
pub mod stats;

pub use data::{Dataset, FilterSpec, VariableRoles};
pub use eif::{Estimand, EstimationSpec, PseudoOutcome, SlopeEstimate};
pub use error::{Error, Result};
pub use inference::{StFormulation, TestName, TestResult};
pub use nuisance::{Backend, ModelSpec, NuisanceFit};
