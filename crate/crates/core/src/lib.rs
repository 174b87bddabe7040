//! Next-day Bitcoin direction forecasting with a leakage-audited research pipeline.
//!
//! The crate is organised around the stages of the pipeline:
//!
//! - [`ingestion`]: load daily CSV sources, align them on a contiguous calendar,
//!   impute per-category, and select the longest fully-observed training range.
//! - [`features`]: technical indicators, cyclical calendar features, and the
//!   one-day-lag binary direction target.
//! - [`reduce`]: standardisation and PCA to an explained-variance target, fitted
//!   on training rows only.
//! - [`models`]: native SVM (SMO), gradient-boosted trees, random forest, and
//!   Bernoulli naive Bayes classifiers with a shared fit/predict contract.
//! - [`validation`]: nested walk-forward cross-validation, classification
//!   metrics, grid search over categoricals, and GP-based sequential
//!   optimisation over numeric hyperparameters.
//! - [`trading`]: daily-neutralised one-unit backtest with a geometric-mean
//!   optimal threshold and a risk-tolerance abstention band.
//! - [`audit`]: fit-scope fingerprints and the leaky-vs-clean demonstration.
//! - [`config`] / [`pipeline`] / [`report`]: declarative configuration, staged
//!   artifact handoff, and report/plot emission used by the CLI.

pub mod audit;
pub mod config;
pub mod error;
pub mod features;
pub mod ingestion;
pub mod models;
pub mod pipeline;
pub mod reduce;
pub mod report;
pub mod trading;
pub mod validation;

pub use error::{Error, Result};
