//! Additive feature attribution for tree ensembles, plus permutation
//! importance as an independent cross-check.
//!
//! The tree attribution is the path-dependent polynomial-time algorithm:
//! descending a tree it tracks, for every subset size, the proportion of
//! feature subsets that would send the sample down the current path, using
//! stored training covers to weight the paths a subset blocks. Per sample
//! the contributions plus the base value reproduce the model prediction
//! exactly (local accuracy).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::models::{Ensemble, ModelError, RegressionTree, TreeNode};

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Per-sample, per-feature contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapResult {
    pub base_value: f64,
    /// `n_samples x n_features`.
    pub contributions: Matrix,
    pub feature_names: Vec<String>,
}

impl ShapResult {
    /// `base + Σ contributions` for one sample.
    pub fn reconstructed_prediction(&self, sample: usize) -> f64 {
        self.base_value + self.contributions.row(sample).iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PathElement {
    feature: i64,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: i64) {
    let pweight = if path.is_empty() { 1.0 } else { 0.0 };
    path.push(PathElement { feature, zero_fraction, one_fraction, pweight });
    let depth = path.len() - 1;
    for i in (0..depth).rev() {
        path[i + 1].pweight +=
            one_fraction * path[i].pweight * (i + 1) as f64 / (depth + 1) as f64;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / (depth + 1) as f64;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut next = path[depth].pweight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next * (depth + 1) as f64 / ((i + 1) as f64 * one);
            next = tmp - path[i].pweight * zero * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            path[i].pweight = path[i].pweight * (depth + 1) as f64 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        let after = path[i + 1];
        path[i].feature = after.feature;
        path[i].zero_fraction = after.zero_fraction;
        path[i].one_fraction = after.one_fraction;
    }
    path.pop();
}

fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut total = 0.0;
    let mut next = path[depth].pweight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * (depth + 1) as f64 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].pweight - tmp * zero * (depth - i) as f64 / (depth + 1) as f64;
        } else if zero != 0.0 {
            total += path[i].pweight * (depth + 1) as f64 / (zero * (depth - i) as f64);
        }
    }
    total
}

fn node_cover(node: &TreeNode) -> f64 {
    match node {
        TreeNode::Leaf { cover, .. } => *cover,
        TreeNode::Internal { cover, .. } => *cover,
    }
}

#[allow(clippy::too_many_arguments)]
fn tree_shap_recurse(
    nodes: &[TreeNode],
    node: usize,
    row: &[f64],
    path: &mut Vec<PathElement>,
    parent_zero: f64,
    parent_one: f64,
    parent_feature: i64,
    phi: &mut [f64],
) {
    extend_path(path, parent_zero, parent_one, parent_feature);
    match &nodes[node] {
        TreeNode::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w = unwound_path_sum(path, i);
                let el = path[i];
                phi[el.feature as usize] += w * (el.one_fraction - el.zero_fraction) * value;
            }
        }
        TreeNode::Internal { feature, threshold, left, right, .. } => {
            let (hot, cold) = if row[*feature] < *threshold {
                (*left, *right)
            } else {
                (*right, *left)
            };
            let total = node_cover(&nodes[node]);
            let hot_zero = node_cover(&nodes[hot]) / total;
            let cold_zero = node_cover(&nodes[cold]) / total;
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            // A feature met twice on one path keeps a single path entry.
            if let Some(pos) = path.iter().skip(1).position(|e| e.feature == *feature as i64) {
                let index = pos + 1;
                incoming_zero = path[index].zero_fraction;
                incoming_one = path[index].one_fraction;
                unwind_path(path, index);
            }
            let mut hot_path = path.clone();
            tree_shap_recurse(
                nodes,
                hot,
                row,
                &mut hot_path,
                hot_zero * incoming_zero,
                incoming_one,
                *feature as i64,
                phi,
            );
            tree_shap_recurse(
                nodes,
                cold,
                row,
                path,
                cold_zero * incoming_zero,
                0.0,
                *feature as i64,
                phi,
            );
        }
    }
}

/// Contributions of one tree for one sample; sums to
/// `tree(row) - tree.expected_value()`.
pub fn tree_shap_single(tree: &RegressionTree, row: &[f64], phi: &mut [f64]) {
    let mut path = Vec::with_capacity(16);
    tree_shap_recurse(&tree.nodes, 0, row, &mut path, 1.0, 1.0, -1, phi);
}

/// Exact additive attribution for every sample under the ensemble.
pub fn tree_shap(
    ensemble: &Ensemble,
    x: &Matrix,
    feature_names: &[String],
) -> Result<ShapResult, AttributionError> {
    if x.n_cols() != ensemble.n_features {
        return Err(AttributionError::SchemaMismatch(format!(
            "model expects {} features, matrix has {}",
            ensemble.n_features,
            x.n_cols()
        )));
    }
    if feature_names.len() != x.n_cols() {
        return Err(AttributionError::SchemaMismatch(format!(
            "{} feature names for {} columns",
            feature_names.len(),
            x.n_cols()
        )));
    }
    let m = x.n_cols();
    let rows: Vec<Vec<f64>> = (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            let mut phi = vec![0.0; m];
            let mut tree_phi = vec![0.0; m];
            for tree in &ensemble.trees {
                tree_phi.iter_mut().for_each(|v| *v = 0.0);
                tree_shap_single(tree, row, &mut tree_phi);
                for (acc, v) in phi.iter_mut().zip(&tree_phi) {
                    *acc += ensemble.learning_rate * v;
                }
            }
            phi
        })
        .collect();
    let base_value = ensemble.base_score
        + ensemble.learning_rate
            * ensemble.trees.iter().map(RegressionTree::expected_value).sum::<f64>();
    Ok(ShapResult {
        base_value,
        contributions: Matrix::from_rows(&rows),
        feature_names: feature_names.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub score: f64,
}

/// Features ranked by descending importance score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub ranking: Vec<FeatureImportance>,
}

impl ImportanceReport {
    fn from_scores(names: &[String], scores: Vec<f64>) -> Self {
        let mut ranking: Vec<FeatureImportance> = names
            .iter()
            .zip(scores)
            .map(|(feature, score)| FeatureImportance { feature: feature.clone(), score })
            .collect();
        ranking.sort_by(|a, b| {
            b.score.partial_cmp(&a.score).unwrap().then_with(|| a.feature.cmp(&b.feature))
        });
        Self { ranking }
    }

    pub fn top(&self, k: usize) -> &[FeatureImportance] {
        &self.ranking[..k.min(self.ranking.len())]
    }
}

/// Mean |contribution| ranking from attribution output.
pub fn shap_importance(shap: &ShapResult) -> ImportanceReport {
    let n = shap.contributions.n_rows().max(1) as f64;
    let m = shap.contributions.n_cols();
    let mut scores = vec![0.0; m];
    for row in shap.contributions.rows() {
        for (s, v) in scores.iter_mut().zip(row) {
            *s += v.abs();
        }
    }
    scores.iter_mut().for_each(|s| *s /= n);
    ImportanceReport::from_scores(&shap.feature_names, scores)
}

/// A `(feature value, contribution)` pair for beeswarm-style plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub feature: String,
    pub sample: usize,
    pub value: f64,
    pub contribution: f64,
}

/// Ranking plus scatter rows for the `top_k` most important features.
pub fn export_summary(
    shap: &ShapResult,
    x: &Matrix,
    top_k: usize,
) -> Result<(ImportanceReport, Vec<SummaryPoint>), AttributionError> {
    if x.n_cols() != shap.contributions.n_cols() || x.n_rows() != shap.contributions.n_rows() {
        return Err(AttributionError::SchemaMismatch(
            "matrix shape differs from contributions".into(),
        ));
    }
    let report = shap_importance(shap);
    let mut points = Vec::new();
    for fi in report.top(top_k) {
        let col = shap.feature_names.iter().position(|n| n == &fi.feature).unwrap();
        for sample in 0..x.n_rows() {
            points.push(SummaryPoint {
                feature: fi.feature.clone(),
                sample,
                value: x.get(sample, col),
                contribution: shap.contributions.get(sample, col),
            });
        }
    }
    Ok((report, points))
}

/// Scoring rule for permutation importance: degradation is measured as an
/// increase for error metrics and a decrease for R².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMetric {
    Mae,
    Mse,
    R2,
}

fn metric_value(metric: ImportanceMetric, y: &[f64], pred: &[f64]) -> f64 {
    let n = y.len() as f64;
    match metric {
        ImportanceMetric::Mae => y.iter().zip(pred).map(|(a, p)| (a - p).abs()).sum::<f64>() / n,
        ImportanceMetric::Mse => {
            y.iter().zip(pred).map(|(a, p)| (a - p).powi(2)).sum::<f64>() / n
        }
        ImportanceMetric::R2 => {
            let mean = y.iter().sum::<f64>() / n;
            let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            let sse: f64 = y.iter().zip(pred).map(|(a, p)| (a - p).powi(2)).sum();
            1.0 - sse / sst
        }
    }
}

/// Anything with batch prediction; the importance cross-check is
/// model-agnostic.
pub trait Predictor: Sync {
    fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>, ModelError>;
}

impl Predictor for Ensemble {
    fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        self.predict(x)
    }
}

impl Predictor for crate::models::Forest {
    fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        self.predict(x)
    }
}

impl Predictor for crate::models::LinearModel {
    fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>, ModelError> {
        self.predict(x)
    }
}

/// Mean metric degradation over `repeats` independent shuffles per feature.
pub fn permutation_importance(
    model: &dyn Predictor,
    x: &Matrix,
    y: &[f64],
    names: &[String],
    metric: ImportanceMetric,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport, AttributionError> {
    if repeats < 1 {
        return Err(AttributionError::InvalidArgument("repeats must be >= 1".into()));
    }
    if y.len() != x.n_rows() || names.len() != x.n_cols() {
        return Err(AttributionError::SchemaMismatch(
            "target or name length differs from matrix shape".into(),
        ));
    }
    let baseline = metric_value(metric, y, &model.predict_batch(x)?);
    let n = x.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(x.n_cols());
    let mut scratch = x.clone();
    for col in 0..x.n_cols() {
        let mut total = 0.0;
        for _ in 0..repeats {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for (row, &src) in order.iter().enumerate() {
                scratch.set(row, col, x.get(src, col));
            }
            let degraded = metric_value(metric, y, &model.predict_batch(&scratch)?);
            total += match metric {
                ImportanceMetric::R2 => baseline - degraded,
                _ => degraded - baseline,
            };
        }
        for row in 0..n {
            scratch.set(row, col, x.get(row, col));
        }
        scores.push(total / repeats as f64);
    }
    Ok(ImportanceReport::from_scores(names, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit_gbdt_weighted, GbdtParams};

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    fn leaf(value: f64, cover: f64) -> TreeNode {
        TreeNode::Leaf { value, cover }
    }

    /// Brute-force Shapley values with cover-weighted marginalization.
    fn exhaustive_shap(tree: &RegressionTree, row: &[f64], m: usize) -> Vec<f64> {
        fn expectation(nodes: &[TreeNode], node: usize, row: &[f64], subset: u32) -> f64 {
            match &nodes[node] {
                TreeNode::Leaf { value, .. } => *value,
                TreeNode::Internal { feature, threshold, left, right, .. } => {
                    if subset & (1 << feature) != 0 {
                        let next = if row[*feature] < *threshold { *left } else { *right };
                        expectation(nodes, next, row, subset)
                    } else {
                        let cl = node_cover(&nodes[*left]);
                        let cr = node_cover(&nodes[*right]);
                        (cl * expectation(nodes, *left, row, subset)
                            + cr * expectation(nodes, *right, row, subset))
                            / (cl + cr)
                    }
                }
            }
        }
        let factorial = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
        let mut phi = vec![0.0; m];
        for (j, slot) in phi.iter_mut().enumerate() {
            for subset in 0u32..(1 << m) {
                if subset & (1 << j) != 0 {
                    continue;
                }
                let size = subset.count_ones() as usize;
                let weight = factorial(size) * factorial(m - size - 1) / factorial(m);
                let with = expectation(&tree.nodes, 0, row, subset | (1 << j));
                let without = expectation(&tree.nodes, 0, row, subset);
                *slot += weight * (with - without);
            }
        }
        phi
    }

    #[test]
    fn depth_zero_ensemble_attributes_nothing() {
        let tree = RegressionTree { nodes: vec![leaf(3.5, 10.0)] };
        let ensemble =
            Ensemble { n_features: 2, base_score: 1.0, learning_rate: 0.5, trees: vec![tree] };
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![9.0, -4.0]]);
        let shap = tree_shap(&ensemble, &x, &names(2)).unwrap();
        for i in 0..2 {
            assert_eq!(shap.contributions.row(i), &[0.0, 0.0]);
            assert_eq!(shap.reconstructed_prediction(i), ensemble.predict(&x).unwrap()[i]);
        }
    }

    #[test]
    fn single_split_tree_attributes_only_the_split_feature() {
        let tree = RegressionTree {
            nodes: vec![
                TreeNode::Internal { feature: 1, threshold: 0.5, left: 1, right: 2, cover: 10.0 },
                leaf(-2.0, 4.0),
                leaf(3.0, 6.0),
            ],
        };
        let ensemble =
            Ensemble { n_features: 3, base_score: 0.0, learning_rate: 1.0, trees: vec![tree.clone()] };
        let x = Matrix::from_rows(&[vec![7.0, 0.0, -1.0], vec![7.0, 1.0, 5.0]]);
        let shap = tree_shap(&ensemble, &x, &names(3)).unwrap();
        for i in 0..2 {
            let row = shap.contributions.row(i);
            assert_eq!(row[0], 0.0);
            assert_eq!(row[2], 0.0);
            let oracle = exhaustive_shap(&tree, x.row(i), 3);
            for (a, b) in row.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9, "{a} vs oracle {b}");
            }
        }
    }

    #[test]
    fn matches_exhaustive_oracle_on_small_trees() {
        // Depth-3 tree over 4 features with repeated features on a path.
        let tree = RegressionTree {
            nodes: vec![
                TreeNode::Internal { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 100.0 },
                TreeNode::Internal { feature: 1, threshold: 0.3, left: 3, right: 4, cover: 60.0 },
                TreeNode::Internal { feature: 2, threshold: 0.7, left: 5, right: 6, cover: 40.0 },
                leaf(1.0, 20.0),
                TreeNode::Internal { feature: 0, threshold: 0.2, left: 7, right: 8, cover: 40.0 },
                leaf(-1.5, 10.0),
                TreeNode::Internal { feature: 3, threshold: 0.9, left: 9, right: 10, cover: 30.0 },
                leaf(2.0, 15.0),
                leaf(-0.5, 25.0),
                leaf(4.0, 12.0),
                leaf(0.25, 18.0),
            ],
        };
        let samples = [
            vec![0.1, 0.1, 0.1, 0.1],
            vec![0.4, 0.9, 0.2, 0.95],
            vec![0.9, 0.0, 0.8, 0.5],
            vec![0.3, 0.3, 0.7, 0.9],
        ];
        for row in &samples {
            let mut phi = vec![0.0; 4];
            tree_shap_single(&tree, row, &mut phi);
            let oracle = exhaustive_shap(&tree, row, 4);
            for (a, b) in phi.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-6, "path {a} vs oracle {b} for row {row:?}");
            }
            // Local accuracy at tree level.
            let total: f64 = phi.iter().sum();
            assert!((total - (tree.predict_one(row) - tree.expected_value())).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_features_receive_equal_contributions() {
        // f0 and f1 play interchangeable roles with equal covers.
        let tree = RegressionTree {
            nodes: vec![
                TreeNode::Internal { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 40.0 },
                TreeNode::Internal { feature: 1, threshold: 0.5, left: 3, right: 4, cover: 20.0 },
                TreeNode::Internal { feature: 1, threshold: 0.5, left: 5, right: 6, cover: 20.0 },
                leaf(0.0, 10.0),
                leaf(1.0, 10.0),
                leaf(1.0, 10.0),
                leaf(2.0, 10.0),
            ],
        };
        let mut phi = vec![0.0; 2];
        tree_shap_single(&tree, &[1.0, 1.0], &mut phi);
        assert!((phi[0] - phi[1]).abs() < 1e-12);
    }

    #[test]
    fn ensemble_shap_is_linear_in_trees() {
        let rows: Vec<Vec<f64>> =
            (0..40).map(|i| vec![(i % 5) as f64, (i % 7) as f64, (i % 3) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] - r[1] + 0.5 * r[2]).collect();
        let x = Matrix::from_rows(&rows);
        let params = GbdtParams {
            n_estimators: 2,
            max_depth: 3,
            min_samples_leaf: 1,
            learning_rate: 0.3,
            weight_decay: 0.0,
            random_seed: 0,
        };
        let model = fit_gbdt_weighted(&x, &y, &vec![1.0; 40], &params).unwrap();
        assert_eq!(model.trees.len(), 2);
        let shap = tree_shap(&model, &x, &names(3)).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let mut phi0 = vec![0.0; 3];
            tree_shap_single(&model.trees[0], row, &mut phi0);
            let mut phi1 = vec![0.0; 3];
            tree_shap_single(&model.trees[1], row, &mut phi1);
            for j in 0..3 {
                let combined = model.learning_rate * (phi0[j] + phi1[j]);
                assert!((shap.contributions.get(i, j) - combined).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn local_accuracy_on_fitted_ensembles() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i % 4) as f64, (i as f64 * 0.11).cos(), i as f64])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + r[1] * r[2] - 0.05 * r[3]).collect();
        let x = Matrix::from_rows(&rows);
        let params = GbdtParams { n_estimators: 40, min_samples_leaf: 2, ..Default::default() };
        let model = fit_gbdt_weighted(&x, &y, &vec![1.0; 60], &params).unwrap();
        let shap = tree_shap(&model, &x, &names(4)).unwrap();
        let preds = model.predict(&x).unwrap();
        for (i, pred) in preds.iter().enumerate() {
            assert!(
                (shap.reconstructed_prediction(i) - pred).abs() <= 1e-6,
                "sample {i}: {} vs {}",
                shap.reconstructed_prediction(i),
                pred
            );
        }
    }

    #[test]
    fn schema_mismatch_is_detected() {
        let ensemble = Ensemble { n_features: 2, base_score: 0.0, learning_rate: 1.0, trees: vec![] };
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        assert!(matches!(
            tree_shap(&ensemble, &x, &names(3)),
            Err(AttributionError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn permutation_ranks_the_generating_feature_first() {
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|i| vec![(i as f64 * 0.7).sin() * 2.0, (i as f64 * 0.13).cos(), (i % 9) as f64 * 0.01])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + 0.001 * r[2]).collect();
        let x = Matrix::from_rows(&rows);
        let params = GbdtParams { n_estimators: 60, min_samples_leaf: 2, ..Default::default() };
        let model = fit_gbdt_weighted(&x, &y, &vec![1.0; 80], &params).unwrap();
        let report = permutation_importance(
            &model,
            &x,
            &y,
            &names(3),
            ImportanceMetric::Mse,
            5,
            11,
        )
        .unwrap();
        assert_eq!(report.ranking[0].feature, "f0");
        // f1 never enters the target; its importance is within noise of zero.
        let f1 = report.ranking.iter().find(|r| r.feature == "f1").unwrap();
        assert!(f1.score.abs() < report.ranking[0].score * 0.05);
    }

    #[test]
    fn duplicated_columns_share_importance() {
        let rows: Vec<Vec<f64>> =
            (0..60).map(|i| vec![(i as f64 * 0.41).sin(), (i as f64 * 0.41).sin()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 5.0 * r[0]).collect();
        let x = Matrix::from_rows(&rows);
        let params = GbdtParams { n_estimators: 40, min_samples_leaf: 2, ..Default::default() };
        let model = fit_gbdt_weighted(&x, &y, &vec![1.0; 60], &params).unwrap();
        let dup = permutation_importance(&model, &x, &y, &names(2), ImportanceMetric::Mse, 5, 3)
            .unwrap();
        // Single-column run.
        let rows1: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0]]).collect();
        let x1 = Matrix::from_rows(&rows1);
        let model1 = fit_gbdt_weighted(&x1, &y, &vec![1.0; 60], &params).unwrap();
        let single =
            permutation_importance(&model1, &x1, &y, &names(1), ImportanceMetric::Mse, 5, 3)
                .unwrap();
        let single_score = single.ranking[0].score;
        for fi in &dup.ranking {
            assert!(fi.score <= single_score * 1.05, "{} > {}", fi.score, single_score);
        }
    }

    #[test]
    fn export_truncates_to_top_k() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 3) as f64, 1.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] + r[1]).collect();
        let x = Matrix::from_rows(&rows);
        let params = GbdtParams { n_estimators: 20, min_samples_leaf: 1, ..Default::default() };
        let model = fit_gbdt_weighted(&x, &y, &vec![1.0; 30], &params).unwrap();
        let shap = tree_shap(&model, &x, &names(3)).unwrap();
        let (report, points) = export_summary(&shap, &x, 2).unwrap();
        assert_eq!(report.ranking.len(), 3);
        assert_eq!(points.len(), 2 * 30);
        let (_, all_points) = export_summary(&shap, &x, 99).unwrap();
        assert_eq!(all_points.len(), 3 * 30);
    }

    #[test]
    fn ranking_is_invariant_to_row_shuffles() {
        let rows: Vec<Vec<f64>> =
            (0..50).map(|i| vec![(i as f64 * 0.3).sin(), (i % 5) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 + r[1]).collect();
        let x = Matrix::from_rows(&rows);
        let params = GbdtParams { n_estimators: 25, min_samples_leaf: 1, ..Default::default() };
        let model = fit_gbdt_weighted(&x, &y, &vec![1.0; 50], &params).unwrap();
        let shap = tree_shap(&model, &x, &names(2)).unwrap();
        let order: Vec<String> =
            shap_importance(&shap).ranking.iter().map(|r| r.feature.clone()).collect();
        // Reverse the rows and recompute.
        let rev_rows: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let xr = Matrix::from_rows(&rev_rows);
        let shap_r = tree_shap(&model, &xr, &names(2)).unwrap();
        let order_r: Vec<String> =
            shap_importance(&shap_r).ranking.iter().map(|r| r.feature.clone()).collect();
        assert_eq!(order, order_r);
    }
}
