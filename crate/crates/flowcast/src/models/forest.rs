//! Random forest regression: weighted bootstrap resampling plus per-split
//! feature subsampling, averaged with equal tree weights.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, sorted_feature_indices, FeatureSampling, RegressionTree, TreeSpec};
use super::ModelError;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; defaults to ceil(n_features / 3).
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        Self { n_trees: 200, max_depth: 10, min_samples_leaf: 2, mtry: None, bootstrap: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_one(row)).sum();
        sum / self.trees.len() as f64
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

pub fn fit_rf(x: &Matrix, y: &[f64], w: &[f64], params: &RfParams) -> Result<Forest, ModelError> {
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
    if params.n_trees < 1 {
        return Err(ModelError::InvalidParams("n_trees must be >= 1".into()));
    }
    let w_total: f64 = w.iter().sum();
    if w.iter().any(|&v| v < 0.0) || w_total <= 0.0 || w_total.is_nan() {
        return Err(ModelError::InvalidWeights("weights must be non-negative with positive sum".into()));
    }

    let n = x.n_rows();
    let m = x.n_cols();
    let mtry = params.mtry.unwrap_or_else(|| m.div_ceil(3)).clamp(1, m);
    let spec = TreeSpec { max_depth: params.max_depth, min_samples_leaf: params.min_samples_leaf };
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let master_sorted = sorted_feature_indices(x, &all_rows);
    let cumulative: Vec<f64> = w
        .iter()
        .scan(0.0, |acc, wi| {
            *acc += wi;
            Some(*acc)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let tree_weights: Vec<f64> = if params.bootstrap {
            let mut counts = vec![0.0; n];
            use rand::Rng;
            for _ in 0..n {
                let u: f64 = rng.gen_range(0.0..w_total);
                let idx = cumulative.partition_point(|&c| c <= u).min(n - 1);
                counts[idx] += 1.0;
            }
            counts
        } else {
            w.to_vec()
        };
        // Restrict the master ordering to this tree's active rows.
        let sorted: Vec<Vec<u32>> = master_sorted
            .iter()
            .map(|list| list.iter().copied().filter(|&i| tree_weights[i as usize] > 0.0).collect())
            .collect();
        let mut sampling = if mtry == m {
            FeatureSampling::All
        } else {
            FeatureSampling::Subset { mtry, rng: &mut rng }
        };
        trees.push(build_tree(x, y, &tree_weights, &sorted, spec, &mut sampling));
    }
    Ok(Forest { n_features: m, trees })
}
