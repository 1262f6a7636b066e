//! Fair linear regression under sample selection bias.
//!
//! A probit selection equation yields the inverse Mills ratio, which corrects
//! the second-stage regression (Heckman two-step). Fairness-constrained least
//! squares is then solved on the corrected design, in closed form for the mean
//! difference and MSE-difference notions and by Lagrangian dual ascent for the
//! correlation-based ones.

pub mod data;
pub mod error;
pub mod experiment;
pub mod heckman;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod normal;
pub mod probit;
pub mod random;
pub mod selfcheck;
pub mod solvers;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use model::{
    validate, AttributeKind, ConstraintForm, Dataset, FairnessConstraint, FittedModel, Method,
    MetricsReport, Multiplier, Notion, Slice, Standardization, Targets, INTERCEPT,
};
pub use normal::inverse_mills;
pub use probit::{fit_probit, imr_column, probit_loglik, probit_loglik_grad, ProbitConfig, ProbitFit};
pub use heckman::{augment, fit_heckman, fit_lr, ols, plain_design, predict, AugmentedDesign};
pub use metrics::{full_report, GroupedPredictions};
pub use data::{generate_synthetic, ingest, ratio_split, DatasetConfig, SyntheticConfig};
pub use experiment::{run_fit, run_ratio_sweep, ExperimentSpec};
pub use selfcheck::{run_selfcheck, Kernels};
