//! ROC curve and AUC estimation for a continuous biomarker when the true
//! disease status is only observed for a verified subset and the
//! verification mechanism may depend on the unobserved status itself.
//!
//! The disease status among verified subjects follows a logistic model in
//! the biomarker and covariates; verification follows a logistic model in
//! the biomarker, covariates and the disease status. Both are fitted jointly
//! by maximum likelihood ([`likelihood::fit_mle`]), the fitted posterior
//! disease probabilities weight two empirical CDFs ([`curve`]), and plug-in
//! asymptotic variances give Wald intervals ([`inference`]).
//!
//! ```no_run
//! use niroc::{inference::PluginContext, likelihood::{fit_mle, FitOptions}, simulation};
//!
//! let sample = simulation::simulate_dataset(&simulation::Scenario::scenario2(), 5000, 7);
//! let fit = fit_mle(&sample.data, None, &FitOptions::default()).unwrap();
//! let ctx = PluginContext::new(&sample.data, &fit).unwrap();
//! let auc = ctx.auc(0.05).unwrap();
//! println!("AUC {:.3} [{:.3}, {:.3}]", auc.point, auc.ci.0, auc.ci.1);
//! ```

pub mod cli;
pub mod comparators;
pub mod curve;
pub mod data;
pub mod error;
pub mod gof;
pub mod inference;
pub mod likelihood;
pub mod logistic;
pub mod model;
pub mod simulation;
mod summation;

pub use crate::data::{Dataset, Record};
pub use crate::error::{Error, Result};
pub use crate::model::{DiseaseParams, ParameterVector, VerificationParams};
