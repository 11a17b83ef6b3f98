//! Model explanations: tree gain importance, permutation importance and
//! one- or two-feature partial dependence.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use crate::surrogate::{GbtModel, TrainedSurrogate};

/// Default PDP grid size.
pub const DEFAULT_GRID_SIZE: usize = 20;
/// Largest background set used for partial dependence.
pub const MAX_PDP_BACKGROUND: usize = 10_000;

/// Anything that maps a batch of designs to per-target predictions.
pub trait Regressor: Sync {
    fn predict_batch(&self, x: &Matrix) -> Result<Matrix>;
}

impl Regressor for TrainedSurrogate {
    fn predict_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.predict(x)
    }
}

impl<F> Regressor for F
where
    F: Fn(&Matrix) -> Result<Matrix> + Sync,
{
    fn predict_batch(&self, x: &Matrix) -> Result<Matrix> {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMethod {
    Gain,
    Permutation,
}

impl ImportanceMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gain => "gain",
            Self::Permutation => "permutation",
        }
    }
}

/// Nonnegative per-feature relevances summing to 1, or all zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub values: Vec<f64>,
    pub method: ImportanceMethod,
}

impl ImportanceVector {
    fn normalized(raw: Vec<f64>, method: ImportanceMethod) -> Self {
        let clipped: Vec<f64> = raw.into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect();
        let total: f64 = clipped.iter().sum();
        let values = if total > 0.0 { clipped.iter().map(|v| v / total).collect() } else { clipped };
        Self { values, method }
    }

    /// Feature indices by decreasing relevance, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        idx
    }
}

/// Relevance proportional to accumulated split gain.
pub fn gain_importance(model: &GbtModel) -> ImportanceVector {
    ImportanceVector::normalized(model.feature_gains().to_vec(), ImportanceMethod::Gain)
}

/// Gain importance of every target of a tree surrogate.
pub fn surrogate_gain_importance(model: &TrainedSurrogate) -> Result<Vec<ImportanceVector>> {
    let models = model.gbt_models().ok_or(Error::NotTreeModel)?;
    Ok(models.iter().map(gain_importance).collect())
}

fn column_mse(pred: &Matrix, truth: &[f64], target: usize) -> f64 {
    truth.iter().enumerate().map(|(i, y)| (pred.get(i, target) - y).powi(2)).sum::<f64>() / truth.len() as f64
}

/// Mean increase of test MSE on `target_index` when one column at a time
/// is shuffled, clipped at 0 and normalized.
pub fn permutation_importance(
    model: &dyn Regressor,
    data: &TabularDataset,
    target_index: usize,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceVector> {
    if target_index >= data.n_targets() {
        return Err(Error::InvalidArgument(format!("target index {target_index} out of range")));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("permutation importance needs repeats >= 1".into()));
    }
    let x = data.features();
    let truth = data.targets().column(target_index);
    let base = column_mse(&model.predict_batch(x)?, &truth, target_index);
    let raw = (0..data.n_features())
        .into_par_iter()
        .map(|j| {
            let mut total = 0.0;
            for r in 0..repeats {
                let mut col = x.column(j);
                col.shuffle(&mut rng::stream(seed, &[j as u64, r as u64]));
                let mut shuffled = x.clone();
                for (i, v) in col.into_iter().enumerate() {
                    shuffled.set(i, j, v);
                }
                total += column_mse(&model.predict_batch(&shuffled)?, &truth, target_index) - base;
            }
            Ok(total / repeats as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ImportanceVector::normalized(raw, ImportanceMethod::Permutation))
}

/// Averaged model response over a grid of one or two features.
///
/// For a pair, grid points are ordered with the first feature outermost,
/// so `response[t][i * g + k]` belongs to `(grid[0][i], grid[1][k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpCurve {
    pub features: Vec<usize>,
    pub grid: Vec<Vec<f64>>,
    /// One response vector per target.
    pub response: Vec<Vec<f64>>,
}

fn linspace(lo: f64, hi: f64, g: usize) -> Vec<f64> {
    (0..g).map(|i| if i + 1 == g { hi } else { lo + (hi - lo) * i as f64 / (g - 1) as f64 }).collect()
}

/// Partial dependence of `model` on `features` over `data`.
pub fn partial_dependence(
    model: &dyn Regressor,
    data: &TabularDataset,
    features: &[usize],
    grid_size: usize,
) -> Result<PdpCurve> {
    if features.is_empty() || features.len() > 2 {
        return Err(Error::InvalidArgument("partial dependence takes one or two features".into()));
    }
    if features.len() == 2 && features[0] == features[1] {
        return Err(Error::InvalidArgument(format!("duplicate feature index {}", features[0])));
    }
    if grid_size < 2 {
        return Err(Error::InvalidArgument("grid size must be at least 2".into()));
    }
    if let Some(&j) = features.iter().find(|&&j| j >= data.n_features()) {
        return Err(Error::InvalidArgument(format!("feature index {j} out of range")));
    }
    let background = if data.n_rows() > MAX_PDP_BACKGROUND {
        let mut idx: Vec<usize> = (0..data.n_rows()).collect();
        idx.shuffle(&mut rng::rng_from(rng::derive_seed(0, &[0x9D9])));
        idx.truncate(MAX_PDP_BACKGROUND);
        idx.sort_unstable();
        data.features().select_rows(&idx)
    } else {
        data.features().clone()
    };
    let bounds = data.feature_bounds();
    let mut grid = Vec::with_capacity(features.len());
    for &j in features {
        let (lo, hi) = (bounds.lower()[j], bounds.upper()[j]);
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Err(Error::DegenerateRange(j));
        }
        grid.push(linspace(lo, hi, grid_size));
    }
    let points: Vec<Vec<f64>> = if features.len() == 1 {
        grid[0].iter().map(|&v| vec![v]).collect()
    } else {
        grid[0].iter().flat_map(|&a| grid[1].iter().map(move |&b| vec![a, b])).collect()
    };
    let per_point = points
        .par_iter()
        .map(|values| {
            let mut x = background.clone();
            for i in 0..x.rows() {
                for (&j, &v) in features.iter().zip(values) {
                    x.set(i, j, v);
                }
            }
            let pred = model.predict_batch(&x)?;
            Ok((0..pred.cols()).map(|t| pred.column(t).iter().sum::<f64>() / pred.rows() as f64).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let n_targets = per_point.first().map_or(0, Vec::len);
    let response = (0..n_targets).map(|t| per_point.iter().map(|p| p[t]).collect()).collect();
    Ok(PdpCurve { features: features.to_vec(), grid, response })
}

/// One line of `importances.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub model: String,
    pub feature: String,
    pub target: String,
    pub method: ImportanceMethod,
    pub value: f64,
}

/// Flattens one importance vector into rows.
pub fn importance_rows(
    model: &str,
    target: &str,
    feature_names: &[String],
    importance: &ImportanceVector,
) -> Vec<ImportanceRow> {
    feature_names
        .iter()
        .zip(&importance.values)
        .map(|(f, &v)| ImportanceRow {
            model: model.to_string(),
            feature: f.clone(),
            target: target.to_string(),
            method: importance.method,
            value: v,
        })
        .collect()
}

/// Writes `model,feature,target,method,value`.
pub fn write_importances_csv(rows: &[ImportanceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a one-feature PDP table: a `grid` column and one `response_<label>`
/// column per labeled response.
pub fn write_pdp_csv(grid: &[f64], responses: &[(String, Vec<f64>)], path: impl AsRef<Path>) -> Result<()> {
    if let Some((label, _)) = responses.iter().find(|(_, r)| r.len() != grid.len()) {
        return Err(Error::InvalidArgument(format!("response {label} does not match the grid length")));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["grid".to_string()];
    header.extend(responses.iter().map(|(l, _)| format!("response_{l}")));
    w.write_record(&header)?;
    for (i, g) in grid.iter().enumerate() {
        let mut rec = vec![g.to_string()];
        rec.extend(responses.iter().map(|(_, r)| r[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{train_gbt, EnsembleModel, GbtParams, Hyperparameters};
    use rand::Rng;

    fn random_dataset(n: usize, d: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> TabularDataset {
        let mut r = rng::rng_from(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.gen::<f64>()).collect()).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![f(x)]).collect();
        TabularDataset::new(
            (0..d).map(|j| format!("x{j}")).collect(),
            vec!["y".into()],
            Matrix::from_rows(&xs).unwrap(),
            Matrix::from_rows(&ys).unwrap(),
        )
        .unwrap()
    }

    fn linear(coef: Vec<f64>) -> impl Fn(&Matrix) -> Result<Matrix> + Sync {
        move |x: &Matrix| {
            let rows: Vec<Vec<f64>> =
                x.iter_rows().map(|r| vec![r.iter().zip(&coef).map(|(a, b)| a * b).sum()]).collect();
            Matrix::from_rows(&rows)
        }
    }

    #[test]
    fn gain_importance_examples() {
        let ds = random_dataset(200, 5, 1, |x| if x[3] > 0.5 { 1.0 } else { 0.0 });
        let m = train_gbt(&ds, 0, &GbtParams { n_trees: 5, max_depth: 1, ..Default::default() }).unwrap();
        let imp = gain_importance(&m);
        assert_eq!(imp.values, vec![0.0, 0.0, 0.0, 1.0, 0.0]);

        let ds = random_dataset(300, 2, 2, |x| if x[0] > 0.4 { 2.0 } else { 0.0 } + 0.01 * x[1]);
        let m = train_gbt(&ds, 0, &GbtParams::default()).unwrap();
        let imp = gain_importance(&m);
        assert!(imp.values[0] > 0.9);
        assert!((imp.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let m = train_gbt(&ds, 0, &GbtParams { n_trees: 0, ..Default::default() }).unwrap();
        assert_eq!(gain_importance(&m).values, vec![0.0, 0.0]);
    }

    #[test]
    fn gain_needs_tree_model() {
        let ds = random_dataset(40, 2, 3, |x| x[0]);
        let gbt = TrainedSurrogate::train(&ds, &Hyperparameters::Gbt(GbtParams::default()), 0).unwrap();
        let ens = TrainedSurrogate::from_ensemble(
            EnsembleModel { members: vec![gbt.clone(), gbt.clone()], weights: vec![0.5, 0.5] },
            0,
        )
        .unwrap();
        assert_eq!(surrogate_gain_importance(&gbt).unwrap().len(), 1);
        assert!(matches!(surrogate_gain_importance(&ens), Err(Error::NotTreeModel)));
    }

    #[test]
    fn permutation_importance_examples() {
        let ds = random_dataset(200, 3, 4, |x| x[0]);
        let model = linear(vec![1.0, 0.0, 0.0]);
        let imp = permutation_importance(&model, &ds, 0, 3, 9).unwrap();
        assert_eq!(imp.values, vec![1.0, 0.0, 0.0]);
        assert_eq!(imp, permutation_importance(&model, &ds, 0, 3, 9).unwrap());

        // hand oracle: permuted MSE of a perfect model equals mean (x0 - x0[perm])^2
        let model = linear(vec![1.0, 2.0, 0.0]);
        let ds = random_dataset(100, 3, 5, |x| x[0] + 2.0 * x[1]);
        let imp = permutation_importance(&model, &ds, 0, 1, 1).unwrap();
        let raw: Vec<f64> = (0..2)
            .map(|j| {
                let coef = [1.0, 2.0][j];
                let col = ds.features().column(j);
                let mut perm = col.clone();
                perm.shuffle(&mut rng::stream(1, &[j as u64, 0]));
                col.iter().zip(&perm).map(|(a, b)| (coef * (a - b)).powi(2)).sum::<f64>() / 100.0
            })
            .collect();
        let total = raw[0] + raw[1];
        assert!((imp.values[0] - raw[0] / total).abs() < 1e-12);
        assert!((imp.values[1] - raw[1] / total).abs() < 1e-12);
        assert_eq!(imp.values[2], 0.0);
    }

    #[test]
    fn pdp_of_linear_model() {
        let ds = random_dataset(150, 3, 6, |x| 3.0 * x[1]);
        let curve = partial_dependence(&linear(vec![0.5, 3.0, 0.0]), &ds, &[1], 20).unwrap();
        assert_eq!(curve.grid[0].len(), 20);
        assert!(curve.grid[0].windows(2).all(|w| w[0] < w[1]));
        let r = &curve.response[0];
        for i in 1..20 {
            let slope = (r[i] - r[i - 1]) / (curve.grid[0][i] - curve.grid[0][i - 1]);
            assert!((slope - 3.0).abs() < 1e-9);
        }
        let flat = partial_dependence(&linear(vec![0.5, 3.0, 0.0]), &ds, &[2], 7).unwrap();
        assert!(flat.response[0].iter().all(|&v| v == flat.response[0][0]));
    }

    #[test]
    fn pdp_of_additive_model_is_shifted_component() {
        let f = |x: &Matrix| {
            let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| vec![r[0].sin() * 2.0 + r[1] * r[2]]).collect();
            Matrix::from_rows(&rows)
        };
        let ds = random_dataset(120, 3, 7, |_| 0.0);
        let curve = partial_dependence(&f, &ds, &[0], 15).unwrap();
        let shift = curve.response[0][0] - 2.0 * curve.grid[0][0].sin();
        for (g, r) in curve.grid[0].iter().zip(&curve.response[0]) {
            assert!((r - 2.0 * g.sin() - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn pdp_pairs_and_errors() {
        let ds = random_dataset(50, 3, 8, |_| 0.0);
        let model = linear(vec![1.0, 1.0, 0.0]);
        let curve = partial_dependence(&model, &ds, &[0, 1], 4).unwrap();
        assert_eq!(curve.response[0].len(), 16);
        let (g0, g1) = (&curve.grid[0], &curve.grid[1]);
        assert!((curve.response[0][2 * 4 + 3] - (g0[2] + g1[3])).abs() < 1e-12);
        assert!(partial_dependence(&model, &ds, &[1, 1], 4).is_err());
        assert!(partial_dependence(&model, &ds, &[0], 1).is_err());
        assert!(partial_dependence(&model, &ds, &[5], 4).is_err());
    }

    #[test]
    fn pdp_row_order_invariant_and_linear_in_ensembles() {
        let ds = random_dataset(80, 2, 9, |x| x[0] * x[1] + x[0]);
        let a = TrainedSurrogate::train(&ds, &Hyperparameters::Gbt(GbtParams { n_trees: 20, ..Default::default() }), 0)
            .unwrap();
        let b = TrainedSurrogate::train(&ds, &Hyperparameters::Gbt(GbtParams { n_trees: 5, ..Default::default() }), 0)
            .unwrap();
        let ens = TrainedSurrogate::from_ensemble(
            EnsembleModel { members: vec![a.clone(), b.clone()], weights: vec![0.3, 0.7] },
            0,
        )
        .unwrap();
        let pa = partial_dependence(&a, &ds, &[0], 10).unwrap();
        let pb = partial_dependence(&b, &ds, &[0], 10).unwrap();
        let pe = partial_dependence(&ens, &ds, &[0], 10).unwrap();
        for i in 0..10 {
            let expected = 0.3 * pa.response[0][i] + 0.7 * pb.response[0][i];
            assert!((pe.response[0][i] - expected).abs() < 1e-12);
        }
        let reversed: Vec<usize> = (0..ds.n_rows()).rev().collect();
        let pr = partial_dependence(&a, &ds.select_rows(&reversed), &[0], 10).unwrap();
        for (x, y) in pa.response[0].iter().zip(&pr.response[0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_emitters() {
        let dir = tempfile::tempdir().unwrap();
        let imp = ImportanceVector { values: vec![0.25, 0.75], method: ImportanceMethod::Gain };
        let rows = importance_rows("gbt", "f1", &["a".into(), "b".into()], &imp);
        let path = dir.path().join("importances.csv");
        write_importances_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "model,feature,target,method,value\ngbt,a,f1,gain,0.25\ngbt,b,f1,gain,0.75\n");

        let path = dir.path().join("pdp.csv");
        write_pdp_csv(&[0.0, 1.0], &[("gbt".into(), vec![2.0, 3.0])], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "grid,response_gbt\n0,2\n1,3\n");
        assert!(write_pdp_csv(&[0.0], &[("x".into(), vec![])], &path).is_err());
    }
}
