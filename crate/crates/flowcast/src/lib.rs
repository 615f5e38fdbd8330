//! Event-aware forecasting of daily cross-city visitor flows.
//!
//! The crate covers the full pipeline:
//!
//! - [`event_catalog`]: structured events, prompt-driven time structuring /
//!   summarization / classification, and heuristic event filtering.
//! - [`llm_gateway`]: prompt templates, a chat-completion HTTP client, and a
//!   deterministic offline mock so everything is testable without network.
//! - [`popularity`]: engagement counting, promotional vs. experience post
//!   splits, and word-of-mouth redistribution across event sessions.
//! - [`features`]: day-indexed design matrices (holidays, weather, weighted
//!   moving-average trend, per-type event popularity) with strict
//!   no-future-leakage discipline.
//! - [`models`]: from-scratch sample-weighted gradient boosted trees plus
//!   weighted linear regression, random forest, and ARIMA baselines.
//! - [`rolling`]: expanding-window rolling-origin prediction, horizon
//!   averaging, MAE/R² scoring, grid search, and feature-set ablations.
//! - [`attribution`]: exact path-dependent tree SHAP and permutation
//!   importance.
//! - [`synth`]: a deterministic synthetic corpus generator with planted,
//!   recoverable event effects.
//! - [`io`]: readers and writers for every file contract used by the CLI.

pub mod attribution;
pub mod event_catalog;
pub mod features;
pub mod io;
pub mod llm_gateway;
pub mod matrix;
pub mod models;
pub mod popularity;
pub mod rolling;
pub mod synth;
pub mod text;

pub use matrix::Matrix;
