//! From-scratch regressors behind a single fit/predict contract: the
//! sample-weighted gradient boosted trees used as the main model, plus
//! weighted linear regression, random forest, and ARIMA baselines.

pub mod arima;
pub mod forest;
pub mod gbdt;
pub mod linear;
pub mod tree;

pub use arima::{ar_is_stationary, fit_arima, forecast_arima, ArimaModel};
pub use forest::{fit_rf, Forest, RfParams};
pub use gbdt::{
    fit_gbdt, fit_gbdt_traced, fit_gbdt_weighted, predict_gbdt, sample_weights, Ensemble,
    GbdtFit, GbdtParams,
};
pub use linear::{fit_linear, LinearModel};
pub use tree::{RegressionTree, TreeNode};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in training input")]
    NonFiniteInput,
    #[error("insufficient data: need {needed} rows, have {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("normal equations are singular even with ridge fallback")]
    SingularSystem,
}
