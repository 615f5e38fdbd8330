//! Expanding-window rolling-origin prediction with horizon averaging,
//! MAE/R² scoring, hyperparameter grid search, and feature-set ablation.
//!
//! At each origin the model is refit from scratch on all days up to the
//! origin and forecasts the next `horizon` days. A target day's final
//! prediction is the arithmetic mean of every forecast aimed at it (up to
//! `horizon` of them; fewer near the boundaries). Forecast feature rows
//! carry the origin's own trend value, since later rows' trend would embed
//! flows the origin has not seen yet; everything else about a future row
//! (calendar, weather, event schedule) is known in advance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureMatrix, FeatureSet, TREND_COLUMN};
use crate::matrix::Matrix;
use crate::models::{
    fit_arima, fit_gbdt_weighted, fit_linear, fit_rf, forecast_arima, sample_weights,
    GbdtParams, ModelError, RfParams,
};

#[derive(Debug, Error)]
pub enum RollingError {
    #[error("invalid rolling config: {0}")]
    InvalidConfig(String),
    #[error("insufficient history: first origin {first_origin} needs at least {needed} rows, matrix has {rows}")]
    InsufficientHistory { first_origin: usize, needed: usize, rows: usize },
    #[error("model failed at origin {origin}: {source}")]
    AtOrigin {
        origin: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Score(#[from] EvalError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 scored days, have {0}")]
    TooShort(usize),
    #[error("R² undefined: actuals have zero variance (MAE = {mae})")]
    ZeroVariance { mae: f64 },
}

/// MAE and R² of an averaged prediction series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub r2: f64,
}

/// Mean absolute error and `1 - SSE/SST`.
pub fn score(actual: &[f64], predicted: &[f64]) -> Result<Metrics, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.len() < 2 {
        return Err(EvalError::TooShort(actual.len()));
    }
    let n = actual.len() as f64;
    let mae = actual.iter().zip(predicted).map(|(y, p)| (y - p).abs()).sum::<f64>() / n;
    let mean = actual.iter().sum::<f64>() / n;
    let sst: f64 = actual.iter().map(|y| (y - mean).powi(2)).sum();
    if sst <= 0.0 || sst.is_nan() {
        return Err(EvalError::ZeroVariance { mae });
    }
    let sse: f64 = actual.iter().zip(predicted).map(|(y, p)| (y - p).powi(2)).sum();
    Ok(Metrics { mae, r2: 1.0 - sse / sst })
}

/// Anything the rolling harness can drive: refit on the training slice and
/// forecast one value per future feature row.
pub trait RollingModel: Sync {
    fn fit_forecast(
        &self,
        x_train: &Matrix,
        y_train: &[f64],
        x_future: &Matrix,
    ) -> Result<Vec<f64>, ModelError>;
}

/// Model choice for a rolling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Gbdt(GbdtParams),
    Linear { weight_decay: f64 },
    #[serde(rename = "rf")]
    RandomForest { params: RfParams, weight_decay: f64 },
    Arima { p: usize, d: usize, q: usize },
}

impl RollingModel for ModelSpec {
    fn fit_forecast(
        &self,
        x_train: &Matrix,
        y_train: &[f64],
        x_future: &Matrix,
    ) -> Result<Vec<f64>, ModelError> {
        match self {
            ModelSpec::Gbdt(params) => {
                let w = sample_weights(y_train.len(), params.weight_decay);
                let model = fit_gbdt_weighted(x_train, y_train, &w, params)?;
                model.predict(x_future)
            }
            ModelSpec::Linear { weight_decay } => {
                let w = sample_weights(y_train.len(), *weight_decay);
                let model = fit_linear(x_train, y_train, &w)?;
                model.predict(x_future)
            }
            ModelSpec::RandomForest { params, weight_decay } => {
                let w = sample_weights(y_train.len(), *weight_decay);
                let model = fit_rf(x_train, y_train, &w, params)?;
                model.predict(x_future)
            }
            ModelSpec::Arima { p, d, q } => {
                let model = fit_arima(y_train, *p, *d, *q)?;
                Ok(forecast_arima(&model, x_future.n_rows()))
            }
        }
    }
}

/// Rolling run parameters. `first_origin` is the number of leading days in
/// the first training window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub first_origin: usize,
    pub horizon: usize,
}

/// One model fit's output: the forecast issued from a training window of
/// `train_len` days for day index `target` (`lead` days ahead).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawForecast {
    pub train_len: usize,
    pub target: usize,
    pub lead: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayForecast {
    pub date: chrono::NaiveDate,
    pub actual: f64,
    pub predicted_avg: f64,
    pub n_forecasts: usize,
}

/// Per-lead-time metrics over the raw (unaveraged) forecasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadMetrics {
    pub lead: usize,
    pub mae: f64,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingReport {
    pub feature_set: FeatureSet,
    pub first_origin: usize,
    pub horizon: usize,
    pub days: Vec<DayForecast>,
    pub raw_forecasts: Vec<RawForecast>,
    pub mae: f64,
    pub r2: f64,
    pub per_lead: Vec<LeadMetrics>,
}

/// Run expanding-window rolling prediction over an assembled matrix.
pub fn run_rolling<M: RollingModel>(
    data: &FeatureMatrix,
    model: &M,
    cfg: &RollingConfig,
) -> Result<RollingReport, RollingError> {
    if !(1..=7).contains(&cfg.horizon) {
        return Err(RollingError::InvalidConfig(format!(
            "horizon {} outside the allowed range 1..7",
            cfg.horizon
        )));
    }
    let n = data.n_rows();
    if cfg.first_origin < 2 || cfg.first_origin >= n {
        return Err(RollingError::InsufficientHistory {
            first_origin: cfg.first_origin,
            needed: cfg.first_origin.max(2) + 1,
            rows: n,
        });
    }
    let trend_col = data
        .column_index(TREND_COLUMN)
        .ok_or_else(|| RollingError::InvalidConfig(format!("matrix lacks {TREND_COLUMN}")))?;

    let origins: Vec<usize> = (cfg.first_origin..n).collect();
    let per_origin: Vec<Result<Vec<RawForecast>, RollingError>> = origins
        .par_iter()
        .map(|&origin| {
            let x_train = data.values.slice_rows(0..origin);
            let y_train = &data.target[..origin];
            let n_targets = cfg.horizon.min(n - origin);
            let frozen_trend = data.values.get(origin, trend_col);
            let rows: Vec<Vec<f64>> = (0..n_targets)
                .map(|k| {
                    let mut row = data.values.row(origin + k).to_vec();
                    row[trend_col] = frozen_trend;
                    row
                })
                .collect();
            let x_future = Matrix::from_rows(&rows);
            let values = model
                .fit_forecast(&x_train, y_train, &x_future)
                .map_err(|source| RollingError::AtOrigin { origin, source })?;
            if values.len() != n_targets {
                return Err(RollingError::InvalidConfig(format!(
                    "model returned {} forecasts for {} targets",
                    values.len(),
                    n_targets
                )));
            }
            Ok(values
                .into_iter()
                .enumerate()
                .map(|(k, value)| RawForecast {
                    train_len: origin,
                    target: origin + k,
                    lead: k + 1,
                    value,
                })
                .collect())
        })
        .collect();

    let mut raw_forecasts = Vec::new();
    for r in per_origin {
        raw_forecasts.extend(r?);
    }

    let scored_days = n - cfg.first_origin;
    let mut sums = vec![0.0; scored_days];
    let mut counts = vec![0usize; scored_days];
    for f in &raw_forecasts {
        let slot = f.target - cfg.first_origin;
        sums[slot] += f.value;
        counts[slot] += 1;
    }
    let days: Vec<DayForecast> = (0..scored_days)
        .map(|i| {
            let row = cfg.first_origin + i;
            DayForecast {
                date: data.dates[row],
                actual: data.target[row],
                predicted_avg: sums[i] / counts[i] as f64,
                n_forecasts: counts[i],
            }
        })
        .collect();

    let actual: Vec<f64> = days.iter().map(|d| d.actual).collect();
    let predicted: Vec<f64> = days.iter().map(|d| d.predicted_avg).collect();
    let metrics = score(&actual, &predicted)?;

    let per_lead: Vec<LeadMetrics> = (1..=cfg.horizon)
        .map(|lead| {
            let (ys, ps): (Vec<f64>, Vec<f64>) = raw_forecasts
                .iter()
                .filter(|f| f.lead == lead)
                .map(|f| (data.target[f.target], f.value))
                .unzip();
            match score(&ys, &ps) {
                Ok(m) => LeadMetrics { lead, mae: m.mae, r2: Some(m.r2) },
                Err(EvalError::ZeroVariance { mae }) => LeadMetrics { lead, mae, r2: None },
                Err(_) => LeadMetrics { lead, mae: f64::NAN, r2: None },
            }
        })
        .collect();

    Ok(RollingReport {
        feature_set: data.feature_set,
        first_origin: cfg.first_origin,
        horizon: cfg.horizon,
        days,
        raw_forecasts,
        mae: metrics.mae,
        r2: metrics.r2,
        per_lead,
    })
}

/// Hyperparameter axes for the boosted-tree grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub max_depths: Vec<usize>,
    pub n_estimators: Vec<usize>,
    pub weight_decays: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            learning_rates: vec![0.01, 0.05, 0.1],
            max_depths: vec![3, 5, 7],
            n_estimators: vec![100, 200, 500, 1000],
            weight_decays: (0..=6).map(|i| i as f64 * 0.001).collect(),
        }
    }
}

impl GridSpec {
    pub fn combination_count(&self) -> usize {
        self.learning_rates.len()
            * self.max_depths.len()
            * self.n_estimators.len()
            * self.weight_decays.len()
    }

    pub fn combinations<'a>(
        &'a self,
        base: &'a GbdtParams,
    ) -> impl Iterator<Item = GbdtParams> + 'a {
        self.learning_rates.iter().flat_map(move |&lr| {
            self.max_depths.iter().flat_map(move |&d| {
                self.n_estimators.iter().flat_map(move |&i| {
                    self.weight_decays.iter().map(move |&delta| GbdtParams {
                        learning_rate: lr,
                        max_depth: d,
                        n_estimators: i,
                        weight_decay: delta,
                        ..base.clone()
                    })
                })
            })
        })
    }

    pub fn validate(&self) -> Result<(), RollingError> {
        if self.combination_count() == 0 {
            return Err(RollingError::InvalidConfig("grid has an empty axis".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub weight_decay: f64,
    pub r2: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GbdtParams,
    pub rows: Vec<GridRow>,
}

/// Pick the best grid row: highest R², ties broken toward fewer estimators,
/// then shallower depth, then lower learning rate, then lower decay.
pub fn best_grid_row(rows: &[GridRow]) -> Option<&GridRow> {
    rows.iter().min_by(|a, b| {
        b.r2
            .partial_cmp(&a.r2)
            .unwrap()
            .then(a.n_estimators.cmp(&b.n_estimators))
            .then(a.max_depth.cmp(&b.max_depth))
            .then(a.learning_rate.partial_cmp(&b.learning_rate).unwrap())
            .then(a.weight_decay.partial_cmp(&b.weight_decay).unwrap())
    })
}

/// Evaluate every grid combination with a one-day-horizon rolling run.
pub fn grid_search(
    data: &FeatureMatrix,
    base: &GbdtParams,
    first_origin: usize,
    grid: &GridSpec,
) -> Result<GridSearchResult, RollingError> {
    grid.validate()?;
    let cfg = RollingConfig { first_origin, horizon: 1 };
    let combos: Vec<GbdtParams> = grid.combinations(base).collect();
    let rows: Vec<GridRow> = combos
        .par_iter()
        .map(|params| {
            let report = run_rolling(data, &ModelSpec::Gbdt(params.clone()), &cfg)?;
            Ok(GridRow {
                learning_rate: params.learning_rate,
                max_depth: params.max_depth,
                n_estimators: params.n_estimators,
                weight_decay: params.weight_decay,
                r2: report.r2,
                mae: report.mae,
            })
        })
        .collect::<Result<_, RollingError>>()?;
    let best_row = best_grid_row(&rows).expect("grid is non-empty");
    let best = GbdtParams {
        learning_rate: best_row.learning_rate,
        max_depth: best_row.max_depth,
        n_estimators: best_row.n_estimators,
        weight_decay: best_row.weight_decay,
        ..base.clone()
    };
    Ok(GridSearchResult { best, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub feature_set: FeatureSet,
    pub r2: f64,
    pub mae: f64,
}

/// Run the same model spec over several feature-set matrices.
pub fn ablation<M: RollingModel>(
    matrices: &[FeatureMatrix],
    model: &M,
    cfg: &RollingConfig,
) -> Result<Vec<AblationRow>, RollingError> {
    matrices
        .iter()
        .map(|m| {
            let report = run_rolling(m, model, cfg)?;
            Ok(AblationRow { feature_set: m.feature_set, r2: report.r2, mae: report.mae })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    /// Stub that predicts its training length for every target.
    struct TrainLenModel;

    impl RollingModel for TrainLenModel {
        fn fit_forecast(
            &self,
            _x: &Matrix,
            y: &[f64],
            x_future: &Matrix,
        ) -> Result<Vec<f64>, ModelError> {
            Ok(vec![y.len() as f64; x_future.n_rows()])
        }
    }

    /// Stub that reads the first feature as its prediction.
    struct FirstFeatureModel;

    impl RollingModel for FirstFeatureModel {
        fn fit_forecast(
            &self,
            _x: &Matrix,
            _y: &[f64],
            x_future: &Matrix,
        ) -> Result<Vec<f64>, ModelError> {
            Ok(x_future.rows().map(|r| r[0]).collect())
        }
    }

    fn toy_matrix(n: usize) -> FeatureMatrix {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![100.0 + i as f64, 0.01 * i as f64]).collect();
        let target: Vec<f64> = (0..n).map(|i| 100.0 + i as f64).collect();
        FeatureMatrix {
            feature_set: FeatureSet::FS1,
            dates,
            columns: vec!["signal".into(), TREND_COLUMN.into()],
            values: Matrix::from_rows(&rows),
            target,
        }
    }

    #[test]
    fn score_matches_hand_arithmetic() {
        let m = score(&[1.0, 5.0], &[2.0, 4.0]).unwrap();
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.r2, 0.75);
        let perfect = score(&[3.0, 4.0, 5.0], &[3.0, 4.0, 5.0]).unwrap();
        assert_eq!((perfect.mae, perfect.r2), (0.0, 1.0));
    }

    #[test]
    fn zero_variance_keeps_the_mae() {
        match score(&[2.0, 2.0], &[1.0, 3.0]) {
            Err(EvalError::ZeroVariance { mae }) => assert_eq!(mae, 1.0),
            other => panic!("expected ZeroVariance, got {other:?}"),
        }
    }

    #[test]
    fn one_step_averages_equal_raw_forecasts_bitwise() {
        let data = toy_matrix(12);
        let cfg = RollingConfig { first_origin: 4, horizon: 1 };
        let report = run_rolling(&data, &TrainLenModel, &cfg).unwrap();
        assert_eq!(report.days.len(), report.raw_forecasts.len());
        for (day, raw) in report.days.iter().zip(&report.raw_forecasts) {
            assert!(day.predicted_avg.to_bits() == raw.value.to_bits());
            assert_eq!(day.n_forecasts, 1);
        }
    }

    #[test]
    fn perfect_model_scores_zero_mae_unit_r2() {
        let data = toy_matrix(15);
        // The first feature equals the target.
        let report =
            run_rolling(&data, &FirstFeatureModel, &RollingConfig { first_origin: 3, horizon: 2 })
                .unwrap();
        assert_eq!(report.mae, 0.0);
        assert_eq!(report.r2, 1.0);
    }

    #[test]
    fn two_step_toy_matches_hand_unrolled_schedule() {
        let data = toy_matrix(5);
        let cfg = RollingConfig { first_origin: 2, horizon: 2 };
        let report = run_rolling(&data, &TrainLenModel, &cfg).unwrap();
        // Hand-unrolled (train_len, target) pairs:
        //   train 2 -> targets 2, 3 with value 2
        //   train 3 -> targets 3, 4 with value 3
        //   train 4 -> target 4 with value 4
        let expected_raw = vec![(2, 2, 2.0), (2, 3, 2.0), (3, 3, 3.0), (3, 4, 3.0), (4, 4, 4.0)];
        let got: Vec<(usize, usize, f64)> =
            report.raw_forecasts.iter().map(|f| (f.train_len, f.target, f.value)).collect();
        assert_eq!(got, expected_raw);
        let avg: Vec<f64> = report.days.iter().map(|d| d.predicted_avg).collect();
        assert_eq!(avg, vec![2.0, 2.5, 3.5]);
        assert_eq!(
            report.days.iter().map(|d| d.n_forecasts).collect::<Vec<_>>(),
            vec![1, 2, 2]
        );
    }

    #[test]
    fn horizon_out_of_range_is_rejected() {
        let data = toy_matrix(10);
        for horizon in [0, 8] {
            let err =
                run_rolling(&data, &TrainLenModel, &RollingConfig { first_origin: 3, horizon })
                    .unwrap_err();
            assert!(matches!(err, RollingError::InvalidConfig(_)));
        }
    }

    #[test]
    fn raw_forecasts_are_invariant_to_horizon() {
        let data = toy_matrix(20);
        let gbdt = ModelSpec::Gbdt(GbdtParams {
            n_estimators: 20,
            max_depth: 2,
            min_samples_leaf: 1,
            ..Default::default()
        });
        let r1 = run_rolling(&data, &gbdt, &RollingConfig { first_origin: 8, horizon: 1 }).unwrap();
        let r3 = run_rolling(&data, &gbdt, &RollingConfig { first_origin: 8, horizon: 3 }).unwrap();
        for f1 in &r1.raw_forecasts {
            let same = r3
                .raw_forecasts
                .iter()
                .find(|f| f.train_len == f1.train_len && f.target == f1.target)
                .unwrap();
            assert_eq!(f1.value.to_bits(), same.value.to_bits());
        }
    }

    #[test]
    fn deterministic_end_to_end() {
        let data = toy_matrix(20);
        let gbdt = ModelSpec::Gbdt(GbdtParams { n_estimators: 10, ..Default::default() });
        let cfg = RollingConfig { first_origin: 8, horizon: 2 };
        let a = run_rolling(&data, &gbdt, &cfg).unwrap();
        let b = run_rolling(&data, &gbdt, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_of_one_returns_that_combination() {
        let data = toy_matrix(25);
        let grid = GridSpec {
            learning_rates: vec![0.1],
            max_depths: vec![2],
            n_estimators: vec![15],
            weight_decays: vec![0.0],
        };
        let base = GbdtParams { min_samples_leaf: 1, ..Default::default() };
        let result = grid_search(&data, &base, 10, &grid).unwrap();
        assert_eq!(result.rows.len(), 1);
        assert_eq!(result.best.n_estimators, 15);
        assert_eq!(result.best.learning_rate, 0.1);
    }

    #[test]
    fn full_grid_has_one_row_per_combination() {
        let grid = GridSpec::default();
        assert_eq!(grid.combination_count(), 3 * 3 * 4 * 7);
        let base = GbdtParams::default();
        assert_eq!(grid.combinations(&base).count(), grid.combination_count());
    }

    #[test]
    fn best_row_tie_break_prefers_smaller_models() {
        let mk = |lr: f64, d: usize, i: usize, delta: f64, r2: f64| GridRow {
            learning_rate: lr,
            max_depth: d,
            n_estimators: i,
            weight_decay: delta,
            r2,
            mae: 1.0,
        };
        let rows = vec![
            mk(0.1, 5, 500, 0.001, 0.9),
            mk(0.05, 3, 100, 0.002, 0.9),
            mk(0.01, 7, 100, 0.0, 0.9),
            mk(0.05, 3, 100, 0.0, 0.9),
        ];
        // Lower I beats everything, then lower depth (dropping the 0.01 row),
        // then lower learning rate, then lower decay.
        let best = best_grid_row(&rows).unwrap();
        assert_eq!(
            (best.n_estimators, best.max_depth, best.learning_rate, best.weight_decay),
            (100, 3, 0.05, 0.0)
        );
    }

    #[test]
    fn ablation_reports_one_row_per_matrix() {
        let mut a = toy_matrix(15);
        a.feature_set = FeatureSet::FS1;
        let mut b = toy_matrix(15);
        b.feature_set = FeatureSet::FS5;
        let rows =
            ablation(&[a, b], &TrainLenModel, &RollingConfig { first_origin: 5, horizon: 1 })
                .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].feature_set, FeatureSet::FS1);
        assert_eq!(rows[1].feature_set, FeatureSet::FS5);
    }
}
