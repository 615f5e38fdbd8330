//! Weighted regression trees with exact greedy splits.
//!
//! Split search scans every boundary between distinct values of each
//! candidate feature, maximizing weighted variance reduction. Thresholds are
//! midpoints; rows with `value < threshold` go left. Ties are broken toward
//! the lowest feature index and lowest threshold, so fitting is fully
//! deterministic. Rows with zero weight are excluded from everything:
//! candidate thresholds, leaf counts, and leaf values.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal { feature: usize, threshold: f64, left: usize, right: usize, cover: f64 },
    Leaf { value: f64, cover: f64 },
}

/// A fitted regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict_one(&self, row: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Internal { feature, threshold, left, right, .. } => {
                    node = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], id: usize) -> usize {
            match &nodes[id] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Cover-weighted mean of leaf values (the tree's expected prediction).
    pub fn expected_value(&self) -> f64 {
        fn walk(nodes: &[TreeNode], id: usize) -> (f64, f64) {
            match &nodes[id] {
                TreeNode::Leaf { value, cover } => (*value * *cover, *cover),
                TreeNode::Internal { left, right, .. } => {
                    let (lv, lc) = walk(nodes, *left);
                    let (rv, rc) = walk(nodes, *right);
                    (lv + rv, lc + rc)
                }
            }
        }
        let (weighted, cover) = walk(&self.nodes, 0);
        if cover > 0.0 {
            weighted / cover
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeSpec {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

/// How split candidates pick features: everything, or a per-node random
/// subset (random forest).
pub(crate) enum FeatureSampling<'r> {
    All,
    Subset { mtry: usize, rng: &'r mut ChaCha8Rng },
}

/// Per-feature index lists of `active` rows sorted by feature value
/// (ties by row index). Reusable across trees that share the active set.
pub(crate) fn sorted_feature_indices(x: &Matrix, active: &[u32]) -> Vec<Vec<u32>> {
    (0..x.n_cols())
        .map(|f| {
            let mut idx = active.to_vec();
            idx.sort_by(|&a, &b| {
                x.get(a as usize, f)
                    .partial_cmp(&x.get(b as usize, f))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect()
}

struct Builder<'a> {
    x: &'a Matrix,
    targets: &'a [f64],
    weights: &'a [f64],
    spec: TreeSpec,
    /// One array per feature, all holding the same row set per segment.
    lists: Vec<Vec<u32>>,
    scratch: Vec<u32>,
    nodes: Vec<TreeNode>,
}

struct NodeStats {
    w: f64,
    wy: f64,
    sse: f64,
}

impl NodeStats {
    fn from_rows(rows: &[u32], targets: &[f64], weights: &[f64]) -> Self {
        let (mut w, mut wy, mut wyy) = (0.0, 0.0, 0.0);
        for &i in rows {
            let wi = weights[i as usize];
            let yi = targets[i as usize];
            w += wi;
            wy += wi * yi;
            wyy += wi * yi * yi;
        }
        let sse = if w > 0.0 { (wyy - wy * wy / w).max(0.0) } else { 0.0 };
        NodeStats { w, wy, sse }
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<'a> Builder<'a> {
    fn leaf(&mut self, stats: &NodeStats) -> usize {
        self.nodes.push(TreeNode::Leaf { value: stats.wy / stats.w, cover: stats.w });
        self.nodes.len() - 1
    }

    fn build(&mut self, lo: usize, hi: usize, depth: usize, sampling: &mut FeatureSampling) -> usize {
        let n = hi - lo;
        let stats = NodeStats::from_rows(&self.lists[0][lo..hi], self.targets, self.weights);
        if depth >= self.spec.max_depth || n < 2 * self.spec.min_samples_leaf || stats.sse <= 0.0 {
            return self.leaf(&stats);
        }
        let candidates: Vec<usize> = match sampling {
            FeatureSampling::All => (0..self.x.n_cols()).collect(),
            FeatureSampling::Subset { mtry, rng } => {
                sample_features(self.x.n_cols(), *mtry, rng)
            }
        };
        let best = self.best_split(lo, hi, &stats, &candidates);
        let Some(split) = best else {
            return self.leaf(&stats);
        };
        let n_left = self.partition(lo, hi, split.feature, split.threshold);
        debug_assert!(n_left > 0 && n_left < n);
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: 0.0, cover: 0.0 }); // placeholder
        let left = self.build(lo, lo + n_left, depth + 1, sampling);
        let right = self.build(lo + n_left, hi, depth + 1, sampling);
        self.nodes[id] = TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            cover: stats.w,
        };
        id
    }

    fn best_split(
        &self,
        lo: usize,
        hi: usize,
        parent: &NodeStats,
        candidates: &[usize],
    ) -> Option<Split> {
        let n = hi - lo;
        let min_leaf = self.spec.min_samples_leaf;
        let mut best: Option<Split> = None;
        for &feature in candidates {
            let rows = &self.lists[feature][lo..hi];
            let (mut wl, mut wyl, mut wyyl) = (0.0, 0.0, 0.0);
            for i in 0..n - 1 {
                let row = rows[i] as usize;
                let wi = self.weights[row];
                let yi = self.targets[row];
                wl += wi;
                wyl += wi * yi;
                wyyl += wi * yi * yi;
                let left_count = i + 1;
                if left_count < min_leaf || n - left_count < min_leaf {
                    continue;
                }
                let a = self.x.get(row, feature);
                let b = self.x.get(rows[i + 1] as usize, feature);
                if a >= b {
                    continue; // not a boundary between distinct values
                }
                let threshold = a + (b - a) / 2.0;
                if !(a < threshold && threshold <= b) {
                    continue; // midpoint collapsed onto `a` in float space
                }
                if wl <= 0.0 || parent.w - wl <= 0.0 {
                    continue;
                }
                let sse_left = (wyyl - wyl * wyl / wl).max(0.0);
                let wr = parent.w - wl;
                let wyr = parent.wy - wyl;
                let wyy_parent = parent.sse + parent.wy * parent.wy / parent.w;
                let sse_right = (wyy_parent - wyyl - wyr * wyr / wr).max(0.0);
                let gain = parent.sse - sse_left - sse_right;
                if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                    best = Some(Split { feature, threshold, gain });
                }
            }
        }
        best
    }

    /// Stable partition of every feature list's segment; returns the left size.
    fn partition(&mut self, lo: usize, hi: usize, feature: usize, threshold: f64) -> usize {
        let mut n_left = 0;
        for f in 0..self.lists.len() {
            self.scratch.clear();
            let mut write = lo;
            for read in lo..hi {
                let row = self.lists[f][read];
                if self.x.get(row as usize, feature) < threshold {
                    self.lists[f][write] = row;
                    write += 1;
                } else {
                    self.scratch.push(row);
                }
            }
            self.lists[f][write..hi].copy_from_slice(&self.scratch);
            n_left = write - lo;
        }
        n_left
    }
}

/// `mtry` distinct feature indices, ascending, drawn deterministically.
fn sample_features(n_features: usize, mtry: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::Rng;
    let mtry = mtry.clamp(1, n_features);
    let mut pool: Vec<usize> = (0..n_features).collect();
    for i in 0..mtry {
        let j = rng.gen_range(i..n_features);
        pool.swap(i, j);
    }
    let mut chosen = pool[..mtry].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Fit one tree on the active rows of the pre-sorted index lists.
pub(crate) fn build_tree(
    x: &Matrix,
    targets: &[f64],
    weights: &[f64],
    sorted: &[Vec<u32>],
    spec: TreeSpec,
    sampling: &mut FeatureSampling,
) -> RegressionTree {
    let lists: Vec<Vec<u32>> = sorted.to_vec();
    let n = lists.first().map_or(0, Vec::len);
    let mut builder = Builder {
        x,
        targets,
        weights,
        spec,
        scratch: Vec::with_capacity(n),
        lists,
        nodes: Vec::new(),
    };
    if n == 0 {
        return RegressionTree { nodes: vec![TreeNode::Leaf { value: 0.0, cover: 0.0 }] };
    }
    builder.build(0, n, 0, sampling);
    RegressionTree { nodes: builder.nodes }
}
