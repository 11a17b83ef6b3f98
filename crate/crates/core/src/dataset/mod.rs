//! Tabular design datasets: ingestion, cleaning, splitting, scaling, and
//! design-of-experiments sampling.

mod io;
mod sampling;
mod scaler;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

pub use io::{load_csv, write_csv, LoadedDataset};
pub use sampling::{latin_hypercube, uniform_random};
pub use scaler::{Scaler, ScalerKind};

/// Feature matrix plus target matrix with column names.
///
/// Every stored value is finite and the two name lists are disjoint and
/// duplicate-free; rows of `features` and `targets` correspond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    feature_names: Vec<String>,
    target_names: Vec<String>,
    features: Matrix,
    targets: Matrix,
}

impl TabularDataset {
    pub fn new(
        feature_names: Vec<String>,
        target_names: Vec<String>,
        features: Matrix,
        targets: Matrix,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidDataset(msg));
        if features.rows() == 0 {
            return invalid("dataset has no rows".into());
        }
        if features.cols() == 0 || targets.cols() == 0 {
            return invalid("need at least one feature and one target column".into());
        }
        if features.rows() != targets.rows() {
            return invalid(format!(
                "{} feature rows vs {} target rows",
                features.rows(),
                targets.rows()
            ));
        }
        if feature_names.len() != features.cols() || target_names.len() != targets.cols() {
            return invalid("column name count does not match matrix width".into());
        }
        let mut seen = HashSet::new();
        for name in feature_names.iter().chain(&target_names) {
            if !seen.insert(name.as_str()) {
                return invalid(format!("duplicate column name {name:?}"));
            }
        }
        if !features.is_finite() || !targets.is_finite() {
            return invalid("non-finite value".into());
        }
        Ok(Self { feature_names, target_names, features, targets })
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.cols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            features: self.features.select_rows(idx),
            targets: self.targets.select_rows(idx),
        }
    }

    /// Appends the rows of `other`, which must share the column layout.
    pub fn concat(&self, other: &TabularDataset) -> Result<Self> {
        if self.feature_names != other.feature_names || self.target_names != other.target_names {
            return Err(Error::InvalidDataset("column layouts differ".into()));
        }
        Ok(Self {
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            features: self.features.vstack(&other.features)?,
            targets: self.targets.vstack(&other.targets)?,
        })
    }

    /// Observed per-feature minimum and maximum.
    pub fn feature_bounds(&self) -> FeatureBounds {
        let d = self.n_features();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for row in self.features.iter_rows() {
            for j in 0..d {
                lower[j] = lower[j].min(row[j]);
                upper[j] = upper[j].max(row[j]);
            }
        }
        FeatureBounds { lower, upper }
    }
}

/// Axis-aligned box domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl FeatureBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("bounds need at least one dimension".into()));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!("bad bounds [{lo}, {hi}] in dimension {j}")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^d`.
    pub fn uniform(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// Number of test rows for `n` rows at `test_fraction`.
///
/// Rounds up, so 691 rows at 0.2 give 139 test rows and 1000 rows give 200.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    (n as f64 * test_fraction - 1e-9).ceil().max(0.0) as usize
}

/// Seeded shuffle split into `(train, test)`.
pub fn split(ds: &TabularDataset, test_fraction: f64, seed: u64) -> Result<(TabularDataset, TabularDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n = ds.n_rows();
    let n_test = test_size(n, test_fraction);
    if n_test < 1 || n_test >= n {
        return Err(Error::InvalidDataset(format!(
            "{n} rows are too few to split at fraction {test_fraction}"
        )));
    }
    let idx = shuffled_indices(n, seed);
    let (test_idx, train_idx) = idx.split_at(n_test);
    Ok((ds.select_rows(train_idx), ds.select_rows(test_idx)))
}

pub(crate) fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::rng_from(seed));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> TabularDataset {
        let f: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let t: Vec<Vec<f64>> = (0..n).map(|i| vec![2.0 * i as f64]).collect();
        TabularDataset::new(
            vec!["x".into()],
            vec!["y".into()],
            Matrix::from_rows(&f).unwrap(),
            Matrix::from_rows(&t).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn split_sizes_match_reported_designs() {
        let (tr, te) = split(&toy(691), 0.2, 1).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (552, 139));
        let (tr, te) = split(&toy(1000), 0.2, 1).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (800, 200));
    }

    #[test]
    fn split_is_a_deterministic_partition() {
        let ds = toy(50);
        let (a_tr, a_te) = split(&ds, 0.3, 9).unwrap();
        let (b_tr, b_te) = split(&ds, 0.3, 9).unwrap();
        assert_eq!(a_tr, b_tr);
        assert_eq!(a_te, b_te);
        let mut all: Vec<f64> = a_tr.features().column(0);
        all.extend(a_te.features().column(0));
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..50).map(|i| i as f64).collect::<Vec<_>>());
        // rows stay paired
        for row in 0..a_te.n_rows() {
            assert_eq!(a_te.targets().get(row, 0), 2.0 * a_te.features().get(row, 0));
        }
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(matches!(split(&toy(10), 0.0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(split(&toy(10), 1.0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(split(&toy(1), 0.5, 0), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn duplicate_names_rejected() {
        let m = Matrix::from_rows(&[[1.0]]).unwrap();
        let r = TabularDataset::new(vec!["a".into()], vec!["a".into()], m.clone(), m);
        assert!(matches!(r, Err(Error::InvalidDataset(_))));
    }
}
