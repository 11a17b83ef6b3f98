//! Convex combination of surrogates with weights learned on a holdout set.

use serde::{Deserialize, Serialize};

use super::TrainedSurrogate;
use crate::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAX_ITERATIONS: usize = 20_000;

/// Members share one weight vector across all targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub members: Vec<TrainedSurrogate>,
    pub weights: Vec<f64>,
}

impl EnsembleModel {
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut out: Option<Matrix> = None;
        for (member, &w) in self.members.iter().zip(&self.weights) {
            let p = member.predict(x)?;
            match out.as_mut() {
                None => {
                    let mut acc = Matrix::zeros(p.rows(), p.cols());
                    axpy(&mut acc, w, &p);
                    out = Some(acc);
                }
                Some(acc) => axpy(acc, w, &p),
            }
        }
        out.ok_or_else(|| Error::InvalidArgument("ensemble without members".into()))
    }
}

fn axpy(acc: &mut Matrix, w: f64, p: &Matrix) {
    for i in 0..acc.rows() {
        for (a, v) in acc.row_mut(i).iter_mut().zip(p.row(i)) {
            *a += w * v;
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    w
}

/// Mean squared error over every entry of two equally shaped matrices.
pub fn matrix_mse(pred: &Matrix, truth: &Matrix) -> f64 {
    let n = pred.as_slice().len() as f64;
    pred.as_slice().iter().zip(truth.as_slice()).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n
}

fn combine(preds: &[Matrix], w: &[f64]) -> Matrix {
    let mut acc = Matrix::zeros(preds[0].rows(), preds[0].cols());
    for (p, &wi) in preds.iter().zip(w) {
        axpy(&mut acc, wi, p);
    }
    acc
}

/// Minimizes holdout MSE of `sum_i w_i preds[i]` over the simplex by
/// projected gradient descent, starting from the best single member.
pub fn fit_simplex_weights(preds: &[Matrix], truth: &Matrix) -> Vec<f64> {
    let k = preds.len();
    let n = truth.as_slice().len() as f64;
    let mut gram = vec![vec![0.0; k]; k];
    let mut cross = vec![0.0; k];
    for i in 0..k {
        let pi = preds[i].as_slice();
        cross[i] = pi.iter().zip(truth.as_slice()).map(|(a, b)| a * b).sum::<f64>() / n;
        for j in i..k {
            let g = pi.iter().zip(preds[j].as_slice()).map(|(a, b)| a * b).sum::<f64>() / n;
            gram[i][j] = g;
            gram[j][i] = g;
        }
    }
    let member_mse: Vec<f64> = preds.iter().map(|p| matrix_mse(p, truth)).collect();
    let best = (0..k).min_by(|&a, &b| member_mse[a].total_cmp(&member_mse[b]).then(a.cmp(&b))).unwrap();
    let mut w = vec![0.0; k];
    w[best] = 1.0;

    // Gershgorin bound on the largest eigenvalue of 2 * gram
    let lipschitz = 2.0 * gram.iter().map(|row| row.iter().map(|g| g.abs()).sum::<f64>()).fold(0.0, f64::max);
    if lipschitz > 0.0 && lipschitz.is_finite() {
        let step = 1.0 / lipschitz;
        for _ in 0..MAX_ITERATIONS {
            let grad: Vec<f64> =
                (0..k).map(|i| 2.0 * ((0..k).map(|j| gram[i][j] * w[j]).sum::<f64>() - cross[i])).collect();
            let next = project_to_simplex(&w.iter().zip(&grad).map(|(wi, g)| wi - step * g).collect::<Vec<_>>());
            let moved: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
            w = next;
            if moved < 1e-14 {
                break;
            }
        }
    }
    if matrix_mse(&combine(preds, &w), truth) > member_mse[best] {
        w = vec![0.0; k];
        w[best] = 1.0;
    }
    w
}

/// Learns ensemble weights for already-trained `members` on `holdout`.
pub fn train_ensemble(members: Vec<TrainedSurrogate>, holdout: &TabularDataset) -> Result<EnsembleModel> {
    if members.len() < 2 {
        return Err(Error::InvalidArgument("an ensemble needs at least 2 members".into()));
    }
    let m = holdout.n_targets();
    for member in &members {
        if member.n_targets() != m {
            return Err(Error::DimensionMismatch { expected: m, found: member.n_targets() });
        }
    }
    let preds = members.iter().map(|s| s.predict(holdout.features())).collect::<Result<Vec<_>>>()?;
    let weights = fit_simplex_weights(&preds, holdout.targets());
    Ok(EnsembleModel { members, weights })
}
