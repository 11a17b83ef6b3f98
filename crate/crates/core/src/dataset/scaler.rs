use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    Standard,
    MinMax,
}

/// Per-column affine transform `(x - shift) / scale`.
///
/// Constant columns get scale 1 so the transform is always invertible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    kind: ScalerKind,
    shift: Vec<f64>,
    scale: Vec<f64>,
}

impl Scaler {
    /// Standard kind uses the column mean and sample standard deviation.
    pub fn fit(data: &Matrix, kind: ScalerKind) -> Result<Self> {
        let n = data.rows();
        if n < 2 {
            return Err(Error::InvalidArgument("scaler fit needs at least 2 rows".into()));
        }
        let mut shift = Vec::with_capacity(data.cols());
        let mut scale = Vec::with_capacity(data.cols());
        for j in 0..data.cols() {
            let col = data.column(j);
            let (s, c) = match kind {
                ScalerKind::Standard => {
                    let mean = col.iter().sum::<f64>() / n as f64;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                    (mean, var.sqrt())
                }
                ScalerKind::MinMax => {
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi - lo)
                }
            };
            shift.push(s);
            scale.push(if c > 0.0 && c.is_finite() { c } else { 1.0 });
        }
        Ok(Self { kind, shift, scale })
    }

    /// Identity transform on `cols` columns.
    pub fn identity(cols: usize) -> Self {
        Self { kind: ScalerKind::Standard, shift: vec![0.0; cols], scale: vec![1.0; cols] }
    }

    pub fn kind(&self) -> ScalerKind {
        self.kind
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m)?;
        let mut out = m.clone();
        for i in 0..out.rows() {
            self.apply_row(out.row_mut(i));
        }
        Ok(out)
    }

    pub fn invert(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m)?;
        let mut out = m.clone();
        for i in 0..out.rows() {
            self.invert_row(out.row_mut(i));
        }
        Ok(out)
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, s), c) in row.iter_mut().zip(&self.shift).zip(&self.scale) {
            *v = (*v - s) / c;
        }
    }

    pub fn invert_row(&self, row: &mut [f64]) {
        for ((v, s), c) in row.iter_mut().zip(&self.shift).zip(&self.scale) {
            *v = *v * c + s;
        }
    }

    fn check(&self, m: &Matrix) -> Result<()> {
        if m.cols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: m.cols() });
        }
        Ok(())
    }
}
