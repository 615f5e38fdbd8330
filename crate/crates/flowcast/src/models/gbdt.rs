//! Sample-weighted gradient boosted regression trees.
//!
//! Squared-error loss throughout: the negative gradient is the plain
//! residual, each tree is fit to residuals with weighted variance-reduction
//! splits, and leaves carry weighted residual means. Complexity is
//! controlled structurally by `max_depth` and `min_samples_leaf`. Recency
//! weighting follows `w_t = max(1 - (T - t) * decay, 0)`, so the newest row
//! always has weight 1 and sufficiently old rows drop out entirely.

use serde::{Deserialize, Serialize};

use super::tree::{build_tree, sorted_feature_indices, FeatureSampling, RegressionTree, TreeSpec};
use super::ModelError;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub weight_decay: f64,
    pub min_samples_leaf: usize,
    pub random_seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_depth: 3,
            n_estimators: 500,
            weight_decay: 0.005,
            min_samples_leaf: 5,
            random_seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(ModelError::InvalidParams("learning_rate must be positive".into()));
        }
        if self.n_estimators < 1 {
            return Err(ModelError::InvalidParams("n_estimators must be >= 1".into()));
        }
        if self.weight_decay < 0.0 || self.weight_decay.is_nan() {
            return Err(ModelError::InvalidParams("weight_decay must be >= 0".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(ModelError::InvalidParams("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

/// Recency weights for `t_len` chronologically ordered rows:
/// `w_t = max(1 - (T - t) * decay, 0)`, so the last weight is always 1.
pub fn sample_weights(t_len: usize, decay: f64) -> Vec<f64> {
    (0..t_len).map(|i| (1.0 - (t_len - 1 - i) as f64 * decay).max(0.0)).collect()
}

/// Base score plus shrunken trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub n_features: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl Ensemble {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut value = self.base_score;
        for tree in &self.trees {
            value += self.learning_rate * tree.predict_one(row);
        }
        value
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        if x.n_cols() != self.n_features {
            return Err(ModelError::DimensionMismatch(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.n_cols()
            )));
        }
        Ok(x.rows().map(|row| self.predict_row(row)).collect())
    }
}

/// Ensemble plus the weighted training MSE recorded after every iteration.
#[derive(Debug, Clone)]
pub struct GbdtFit {
    pub ensemble: Ensemble,
    pub train_mse: Vec<f64>,
}

fn validate_training_inputs(x: &Matrix, y: &[f64], w: &[f64]) -> Result<(), ModelError> {
    if x.n_rows() != y.len() || y.len() != w.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} rows, {} targets, {} weights",
            x.n_rows(),
            y.len(),
            w.len()
        )));
    }
    if x.n_rows() < 2 {
        return Err(ModelError::InsufficientData { needed: 2, got: x.n_rows() });
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) || w.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteInput);
    }
    if w.iter().any(|&v| v < 0.0) {
        return Err(ModelError::InvalidWeights("negative weight".into()));
    }
    let w_total = w.iter().sum::<f64>();
    if w_total <= 0.0 || w_total.is_nan() {
        return Err(ModelError::InvalidWeights("all weights are zero".into()));
    }
    Ok(())
}

/// Fit with recency weights derived from `params.weight_decay`.
pub fn fit_gbdt(x: &Matrix, y: &[f64], params: &GbdtParams) -> Result<Ensemble, ModelError> {
    let w = sample_weights(y.len(), params.weight_decay);
    fit_gbdt_weighted(x, y, &w, params)
}

/// Fit with explicit per-row weights.
pub fn fit_gbdt_weighted(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    params: &GbdtParams,
) -> Result<Ensemble, ModelError> {
    Ok(fit_gbdt_traced(x, y, w, params)?.ensemble)
}

/// Fit with explicit weights, keeping the per-iteration training MSE.
pub fn fit_gbdt_traced(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    params: &GbdtParams,
) -> Result<GbdtFit, ModelError> {
    params.validate()?;
    validate_training_inputs(x, y, w)?;
    let n = x.n_rows();
    let w_total: f64 = w.iter().sum();
    let base_score = w.iter().zip(y).map(|(wi, yi)| wi * yi).sum::<f64>() / w_total;

    let active: Vec<u32> = (0..n as u32).filter(|&i| w[i as usize] > 0.0).collect();
    let sorted = sorted_feature_indices(x, &active);
    let spec = TreeSpec { max_depth: params.max_depth, min_samples_leaf: params.min_samples_leaf };

    let mut predictions = vec![base_score; n];
    let mut residuals = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut train_mse = Vec::with_capacity(params.n_estimators);
    for _ in 0..params.n_estimators {
        for i in 0..n {
            residuals[i] = y[i] - predictions[i];
        }
        let tree = build_tree(x, &residuals, w, &sorted, spec, &mut FeatureSampling::All);
        for (pred, row) in predictions.iter_mut().zip(x.rows()) {
            *pred += params.learning_rate * tree.predict_one(row);
        }
        trees.push(tree);
        let mse = x
            .rows()
            .enumerate()
            .map(|(i, _)| w[i] * (y[i] - predictions[i]).powi(2))
            .sum::<f64>()
            / w_total;
        train_mse.push(mse);
    }
    Ok(GbdtFit {
        ensemble: Ensemble {
            n_features: x.n_cols(),
            base_score,
            learning_rate: params.learning_rate,
            trees,
        },
        train_mse,
    })
}

/// Free-function prediction mirroring [`Ensemble::predict`].
pub fn predict_gbdt(model: &Ensemble, x: &Matrix) -> Result<Vec<f64>, ModelError> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params(depth: usize, n_estimators: usize, lr: f64) -> GbdtParams {
        GbdtParams {
            learning_rate: lr,
            max_depth: depth,
            n_estimators,
            weight_decay: 0.0,
            min_samples_leaf: 1,
            random_seed: 0,
        }
    }

    #[test]
    fn decay_zero_gives_unit_weights() {
        assert_eq!(sample_weights(5, 0.0), vec![1.0; 5]);
    }

    #[test]
    fn weights_match_hand_evaluation() {
        let w = sample_weights(300, 0.005);
        assert_eq!(w[299], 1.0);
        assert!((w[259] - 0.8).abs() < 1e-12); // 1 - 40 * 0.005
        assert_eq!(w[99], 0.0); // max(1 - 200*0.005, 0) = 0
        assert!(w.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn stump_with_equal_weights_predicts_the_mean() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let model = fit_gbdt_weighted(&x, &[1.0, 3.0], &[1.0, 1.0], &small_params(0, 1, 1.0)).unwrap();
        assert_eq!(model.predict(&x).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn zero_weight_removes_a_row_from_the_mean() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        let model = fit_gbdt_weighted(&x, &[1.0, 3.0], &[1.0, 0.0], &small_params(0, 1, 1.0)).unwrap();
        assert_eq!(model.predict(&x).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn paper_optimum_parameters_run() {
        let params = GbdtParams::default();
        assert_eq!(
            (params.learning_rate, params.max_depth, params.n_estimators, params.weight_decay),
            (0.05, 3, 500, 0.005)
        );
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64, (i % 3) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| ((i % 7) * 2 + i % 3) as f64).collect();
        let x = Matrix::from_rows(&rows);
        let params = GbdtParams { n_estimators: 50, ..params };
        let model = fit_gbdt(&x, &y, &params).unwrap();
        assert_eq!(model.trees.len(), 50);
    }

    #[test]
    fn empty_tree_list_predicts_base_everywhere() {
        let model =
            Ensemble { n_features: 1, base_score: 4.25, learning_rate: 0.1, trees: vec![] };
        let x = Matrix::from_rows(&[vec![0.0], vec![9.0]]);
        assert_eq!(model.predict(&x).unwrap(), vec![4.25, 4.25]);
    }

    #[test]
    fn one_stump_gives_two_level_output() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![10.0], vec![11.0]]);
        let y = [0.0, 0.0, 8.0, 8.0];
        let model = fit_gbdt_weighted(&x, &y, &[1.0; 4], &small_params(1, 1, 1.0)).unwrap();
        // base = 4, one stump of residuals ±4.
        let preds = model.predict(&x).unwrap();
        assert_eq!(preds, vec![0.0, 0.0, 8.0, 8.0]);
        let distinct: std::collections::BTreeSet<String> =
            preds.iter().map(|p| format!("{p:.6}")).collect();
        assert_eq!(distinct.len(), 2);
    }

    #[test]
    fn ensemble_prediction_matches_fold_left_oracle() {
        let rows: Vec<Vec<f64>> =
            (0..60).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - 2.0 * r[1]).collect();
        let x = Matrix::from_rows(&rows);
        let model = fit_gbdt_weighted(&x, &y, &vec![1.0; 60], &small_params(3, 25, 0.1)).unwrap();
        let preds = model.predict(&x).unwrap();
        for (i, row) in rows.iter().enumerate() {
            // Accumulation oracle: explicit fold over trees.
            let folded = model
                .trees
                .iter()
                .fold(model.base_score, |acc, t| acc + model.learning_rate * t.predict_one(row));
            assert!((preds[i] - folded).abs() < 1e-12);
        }
    }

    #[test]
    fn training_mse_never_increases() {
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|i| vec![(i as f64 * 0.531).sin() * 3.0, (i % 5) as f64, (i as f64 * 0.17).cos()])
            .collect();
        let y: Vec<f64> =
            rows.iter().enumerate().map(|(i, r)| r[0] * 2.0 + r[1] - (i % 3) as f64).collect();
        let x = Matrix::from_rows(&rows);
        let w = sample_weights(80, 0.005);
        let fit = fit_gbdt_traced(&x, &y, &w, &small_params(3, 80, 0.1)).unwrap();
        for pair in fit.train_mse.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "MSE increased: {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn deterministic_across_refits() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.7).sin(), i as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 5.0 + r[1] * 0.1).collect();
        let x = Matrix::from_rows(&rows);
        let params = small_params(3, 30, 0.1);
        let a = fit_gbdt(&x, &y, &params).unwrap();
        let b = fit_gbdt(&x, &y, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_and_finite_validation() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert!(matches!(
            fit_gbdt(&x, &[1.0], &small_params(1, 1, 0.1)),
            Err(ModelError::DimensionMismatch(_))
        ));
        assert!(matches!(
            fit_gbdt(&x, &[1.0, f64::NAN], &small_params(1, 1, 0.1)),
            Err(ModelError::NonFiniteInput)
        ));
        let model = fit_gbdt(&x, &[1.0, 2.0], &small_params(1, 1, 0.1)).unwrap();
        let wide = Matrix::from_rows(&[vec![0.0, 1.0]]);
        assert!(matches!(model.predict(&wide), Err(ModelError::DimensionMismatch(_))));
    }
}
