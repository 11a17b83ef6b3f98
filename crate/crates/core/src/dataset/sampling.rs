use rand::seq::SliceRandom;
use rand::Rng as _;

use super::FeatureBounds;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Latin hypercube design: every one of the `n` equal-width strata of every
/// dimension holds exactly one sample. Strata are assigned by an independent
/// permutation per dimension; the sample sits uniformly inside its stratum.
pub fn latin_hypercube(n: usize, bounds: &FeatureBounds, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("latin hypercube needs n >= 1".into()));
    }
    let d = bounds.dim();
    let mut rng = rng::rng_from(seed);
    let mut out = Matrix::zeros(n, d);
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(&mut rng);
        let (lo, hi) = (bounds.lower()[j], bounds.upper()[j]);
        for (i, &stratum) in perm.iter().enumerate() {
            let u = (stratum as f64 + rng.gen::<f64>()) / n as f64;
            // stays inside its stratum even after rounding at the top edge
            let v = (lo + u * (hi - lo)).min(hi);
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Independent uniform samples inside `bounds`.
pub fn uniform_random(n: usize, bounds: &FeatureBounds, seed: u64) -> Matrix {
    let d = bounds.dim();
    let mut rng = rng::rng_from(seed);
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let (lo, hi) = (bounds.lower()[j], bounds.upper()[j]);
            out.set(i, j, lo + rng.gen::<f64>() * (hi - lo));
        }
    }
    out
}
