//! Bounded simulated binary crossover and polynomial mutation.

use rand::Rng as _;

use crate::dataset::FeatureBounds;
use crate::rng::Rng;

const EPS: f64 = 1e-14;

/// SBX with per-gene probability 0.5; applied to the pair with probability
/// `crossover_prob`, otherwise the children copy the parents.
pub fn sbx_crossover(
    p1: &[f64],
    p2: &[f64],
    eta_c: f64,
    crossover_prob: f64,
    bounds: &FeatureBounds,
    rng: &mut Rng,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if rng.gen::<f64>() >= crossover_prob {
        return (c1, c2);
    }
    for i in 0..p1.len() {
        if rng.gen::<f64>() > 0.5 || (p1[i] - p2[i]).abs() <= EPS {
            continue;
        }
        let (y1, y2) = if p1[i] < p2[i] { (p1[i], p2[i]) } else { (p2[i], p1[i]) };
        let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
        let u = rng.gen::<f64>();
        let spread = y2 - y1;

        let beta = 1.0 + 2.0 * (y1 - lo) / spread;
        let betaq = spread_factor(beta, eta_c, u);
        let a = (0.5 * ((y1 + y2) - betaq * spread)).clamp(lo, hi);

        let beta = 1.0 + 2.0 * (hi - y2) / spread;
        let betaq = spread_factor(beta, eta_c, u);
        let b = (0.5 * ((y1 + y2) + betaq * spread)).clamp(lo, hi);

        if rng.gen::<f64>() <= 0.5 {
            c1[i] = b;
            c2[i] = a;
        } else {
            c1[i] = a;
            c2[i] = b;
        }
    }
    (c1, c2)
}

fn spread_factor(beta: f64, eta: f64, u: f64) -> f64 {
    let alpha = 2.0 - beta.powf(-(eta + 1.0));
    if u <= 1.0 / alpha {
        (u * alpha).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
    }
}

/// Bounded polynomial mutation, each gene mutated with probability `rate`.
pub fn polynomial_mutation(x: &mut [f64], eta_m: f64, rate: f64, bounds: &FeatureBounds, rng: &mut Rng) {
    let power = 1.0 / (eta_m + 1.0);
    for (i, y) in x.iter_mut().enumerate() {
        if rng.gen::<f64>() >= rate {
            continue;
        }
        let (lo, hi) = (bounds.lower()[i], bounds.upper()[i]);
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        let delta1 = (*y - lo) / range;
        let delta2 = (hi - *y) / range;
        let u = rng.gen::<f64>();
        let deltaq = if u < 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - delta1).powf(eta_m + 1.0);
            val.powf(power) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - delta2).powf(eta_m + 1.0);
            1.0 - val.powf(power)
        };
        *y = (*y + deltaq * range).clamp(lo, hi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn zero_rate_is_identity() {
        let b = FeatureBounds::uniform(3, 0.0, 1.0).unwrap();
        let mut x = vec![0.1, 0.5, 0.9];
        polynomial_mutation(&mut x, 20.0, 0.0, &b, &mut rng::rng_from(1));
        assert_eq!(x, vec![0.1, 0.5, 0.9]);
    }

    #[test]
    fn equal_parents_give_equal_children() {
        let b = FeatureBounds::uniform(4, -1.0, 1.0).unwrap();
        let p = vec![0.3, -0.2, 0.9, 0.0];
        let (c1, c2) = sbx_crossover(&p, &p, 15.0, 1.0, &b, &mut rng::rng_from(2));
        assert_eq!((c1.as_slice(), c2.as_slice()), (p.as_slice(), p.as_slice()));
    }

    #[test]
    fn zero_crossover_probability_copies_parents() {
        let b = FeatureBounds::uniform(2, 0.0, 1.0).unwrap();
        let (p1, p2) = (vec![0.1, 0.2], vec![0.8, 0.9]);
        let (c1, c2) = sbx_crossover(&p1, &p2, 15.0, 0.0, &b, &mut rng::rng_from(3));
        assert_eq!((c1, c2), (p1, p2));
    }

    #[test]
    fn midpoint_mutation_is_unbiased() {
        let b = FeatureBounds::uniform(1, 0.0, 1.0).unwrap();
        let mut r = rng::rng_from(4);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let mut x = [0.5];
            polynomial_mutation(&mut x, 20.0, 1.0, &b, &mut r);
            sum += x[0];
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn same_stream_same_children() {
        let b = FeatureBounds::uniform(3, 0.0, 1.0).unwrap();
        let (p1, p2) = (vec![0.1, 0.4, 0.7], vec![0.9, 0.2, 0.3]);
        let a = sbx_crossover(&p1, &p2, 15.0, 0.9, &b, &mut rng::rng_from(9));
        let c = sbx_crossover(&p1, &p2, 15.0, 0.9, &b, &mut rng::rng_from(9));
        assert_eq!(a, c);
    }

    proptest! {
        #[test]
        fn operators_respect_bounds(seed in any::<u64>(), steps in 1usize..30) {
            let b = FeatureBounds::new(vec![-2.0, 0.0, 5.0, 1.0], vec![3.0, 0.001, 9.0, 1.0]).unwrap();
            let mut r = rng::rng_from(seed);
            let mut p1 = vec![-2.0, 0.0, 9.0, 1.0];
            let mut p2 = vec![3.0, 0.001, 5.0, 1.0];
            for _ in 0..steps {
                let (mut c1, mut c2) = sbx_crossover(&p1, &p2, 2.0, 0.9, &b, &mut r);
                polynomial_mutation(&mut c1, 5.0, 0.5, &b, &mut r);
                polynomial_mutation(&mut c2, 5.0, 0.5, &b, &mut r);
                prop_assert!(b.contains(&c1) && b.contains(&c2));
                p1 = c1;
                p2 = c2;
            }
        }
    }
}
