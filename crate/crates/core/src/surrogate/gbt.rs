//! Least-squares gradient boosting over exact-greedy regression trees.

use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAX_TREES: usize = 10_000;
pub const MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 3, learning_rate: 0.1, min_samples_leaf: 1 }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::HyperparameterOutOfRange(m));
        if self.n_trees > MAX_TREES {
            return bad(format!("n_trees {} > {MAX_TREES}", self.n_trees));
        }
        if !(1..=MAX_DEPTH).contains(&self.max_depth) {
            return bad(format!("max_depth {} outside [1, {MAX_DEPTH}]", self.max_depth));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Binary regression tree; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Boosted ensemble for a single target:
/// `base_prediction + learning_rate * sum(tree outputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    trees: Vec<RegressionTree>,
    learning_rate: f64,
    base_prediction: f64,
    feature_gains: Vec<f64>,
    max_depth: usize,
}

impl GbtModel {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn base_prediction(&self) -> f64 {
        self.base_prediction
    }

    /// Squared-error reduction accumulated per feature over every split.
    pub fn feature_gains(&self) -> &[f64] {
        &self.feature_gains
    }

    pub fn n_features(&self) -> usize {
        self.feature_gains.len()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.predict_row_truncated(x, self.trees.len())
    }

    /// Prediction using only the first `n_trees` trees.
    pub fn predict_row_truncated(&self, x: &[f64], n_trees: usize) -> f64 {
        let boost: f64 = self.trees[..n_trees].iter().map(|t| t.predict(x)).sum();
        self.base_prediction + self.learning_rate * boost
    }

    /// Fits `y` from the rows of `x`.
    pub fn fit(x: &Matrix, y: &[f64], params: &GbtParams) -> Result<Self> {
        params.validate()?;
        let n = x.rows();
        if n == 0 {
            return Err(Error::InvalidDataset("cannot fit on zero rows".into()));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: y.len() });
        }
        let d = x.cols();
        let base = exact_mean(y);
        let mut residual: Vec<f64> = y.iter().map(|v| v - base).collect();
        let initial_sse: f64 = residual.iter().map(|r| r * r).sum();

        let presorted: Vec<Vec<usize>> = (0..d)
            .map(|j| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut builder = TreeBuilder {
            x,
            params,
            min_gain: 1e-12 * initial_sse,
            gains: vec![0.0; d],
            go_left: vec![false; n],
        };
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            let mut nodes = Vec::new();
            builder.grow(&residual, presorted.clone(), 0, &mut nodes);
            let tree = RegressionTree { nodes };
            for (i, r) in residual.iter_mut().enumerate() {
                *r -= params.learning_rate * tree.predict(x.row(i));
            }
            trees.push(tree);
        }
        Ok(Self {
            trees,
            learning_rate: params.learning_rate,
            base_prediction: base,
            feature_gains: builder.gains,
            max_depth: params.max_depth,
        })
    }
}

/// Mean that is exact for constant input.
pub(crate) fn exact_mean(y: &[f64]) -> f64 {
    let first = y[0];
    first + y.iter().map(|v| v - first).sum::<f64>() / y.len() as f64
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    params: &'a GbtParams,
    min_gain: f64,
    gains: Vec<f64>,
    go_left: Vec<bool>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    /// `sorted[j]` holds the node's samples ordered by feature `j`.
    fn grow(&mut self, residual: &[f64], sorted: Vec<Vec<usize>>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let samples = &sorted[0];
        let n = samples.len();
        let value = exact_mean(&samples.iter().map(|&i| residual[i]).collect::<Vec<_>>());
        let me = nodes.len();
        nodes.push(Node::Leaf { value });

        let min_leaf = self.params.min_samples_leaf;
        if depth >= self.params.max_depth || n < 2 * min_leaf {
            return me;
        }
        let best = match self.best_split(residual, &sorted) {
            Some(b) if b.gain > self.min_gain => b,
            _ => return me,
        };

        for &i in samples {
            self.go_left[i] = self.x.get(i, best.feature) <= best.threshold;
        }
        let (left_sorted, right_sorted): (Vec<Vec<usize>>, Vec<Vec<usize>>) = sorted
            .into_iter()
            .map(|list| list.into_iter().partition(|&i| self.go_left[i]))
            .unzip();
        self.gains[best.feature] += best.gain;

        let left = self.grow(residual, left_sorted, depth + 1, nodes);
        let right = self.grow(residual, right_sorted, depth + 1, nodes);
        nodes[me] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        me
    }

    /// Exact greedy variance-reduction search; ties keep the lowest feature
    /// index, then the lowest threshold.
    fn best_split(&self, residual: &[f64], sorted: &[Vec<usize>]) -> Option<BestSplit> {
        let n = sorted[0].len();
        let min_leaf = self.params.min_samples_leaf;
        let total: f64 = sorted[0].iter().map(|&i| residual[i]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<BestSplit> = None;
        for (j, list) in sorted.iter().enumerate() {
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += residual[list[k - 1]];
                if k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let (lo, hi) = (self.x.get(list[k - 1], j), self.x.get(list[k], j));
                if lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64 - parent;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit { feature: j, threshold, gain });
                }
            }
        }
        best
    }
}

/// Trains the boosted model for one target column of `train`.
pub fn train_gbt(train: &TabularDataset, target_index: usize, params: &GbtParams) -> Result<GbtModel> {
    if target_index >= train.n_targets() {
        return Err(Error::InvalidArgument(format!(
            "target index {target_index} out of range for {} targets",
            train.n_targets()
        )));
    }
    if train.n_rows() < 2 {
        return Err(Error::InvalidDataset("boosting needs at least 2 rows".into()));
    }
    GbtModel::fit(train.features(), &train.targets().column(target_index), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn mse(model: &GbtModel, x: &Matrix, y: &[f64], n_trees: usize) -> f64 {
        (0..x.rows()).map(|i| (model.predict_row_truncated(x.row(i), n_trees) - y[i]).powi(2)).sum::<f64>()
            / x.rows() as f64
    }

    #[test]
    fn zero_trees_predict_mean() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let m = GbtModel::fit(&x, &[1.0, 2.0, 6.0], &GbtParams { n_trees: 0, ..Default::default() }).unwrap();
        assert_eq!(m.predict_row(&[10.0]), 3.0);
        assert!(m.feature_gains().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn stump_fits_step_exactly() {
        let xs: Vec<[f64; 1]> = (0..20).map(|i| [i as f64 / 19.0]).collect();
        let y: Vec<f64> = xs.iter().map(|x| if x[0] < 0.5 { 0.0 } else { 1.0 }).collect();
        let x = Matrix::from_rows(&xs).unwrap();
        let p = GbtParams { n_trees: 1, max_depth: 1, learning_rate: 1.0, min_samples_leaf: 1 };
        let m = GbtModel::fit(&x, &y, &p).unwrap();
        assert_eq!(mse(&m, &x, &y, 1), 0.0);
        assert_eq!(m.trees()[0].depth(), 1);
    }

    #[test]
    fn training_mse_never_increases() {
        let mut rng = crate::rng::rng_from(4);
        let rows: Vec<[f64; 3]> = (0..120).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| (6.0 * r[0]).sin() + r[1] * r[2] + 0.1 * rng.gen::<f64>()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = GbtParams { n_trees: 60, max_depth: 3, learning_rate: 0.3, min_samples_leaf: 2 };
        let m = GbtModel::fit(&x, &y, &p).unwrap();
        let mut prev = mse(&m, &x, &y, 0);
        for t in 1..=60 {
            let cur = mse(&m, &x, &y, t);
            assert!(cur <= prev * (1.0 + 1e-12), "tree {t}: {cur} > {prev}");
            prev = cur;
        }
        assert!(m.trees().iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn unused_features_have_zero_gain() {
        let rows: Vec<[f64; 3]> = (0..40).map(|i| [0.0, i as f64, 7.0]).collect();
        let y: Vec<f64> = (0..40).map(|i| (i as f64).sqrt()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = GbtModel::fit(&x, &y, &GbtParams::default()).unwrap();
        assert_eq!(m.feature_gains()[0], 0.0);
        assert_eq!(m.feature_gains()[2], 0.0);
        assert!(m.feature_gains()[1] > 0.0);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both columns separate the classes identically
        let rows = [[0.0, 0.0], [1.0, 1.0]];
        let x = Matrix::from_rows(&rows).unwrap();
        let p = GbtParams { n_trees: 1, max_depth: 1, learning_rate: 1.0, min_samples_leaf: 1 };
        let m = GbtModel::fit(&x, &[0.0, 1.0], &p).unwrap();
        match m.trees()[0].nodes()[0] {
            Node::Split { feature, threshold, .. } => assert_eq!((feature, threshold), (0, 0.5)),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn out_of_range_params_rejected() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        for p in [
            GbtParams { learning_rate: 0.0, ..Default::default() },
            GbtParams { learning_rate: 1.5, ..Default::default() },
            GbtParams { max_depth: 0, ..Default::default() },
            GbtParams { min_samples_leaf: 0, ..Default::default() },
        ] {
            assert!(matches!(GbtModel::fit(&x, &[0.0, 1.0], &p), Err(Error::HyperparameterOutOfRange(_))));
        }
    }

    #[test]
    fn constant_target_is_fit_exactly() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let m = GbtModel::fit(&x, &[0.1, 0.1, 0.1], &GbtParams::default()).unwrap();
        assert_eq!(m.predict_row(&[5.0]), 0.1);
    }
}
