//! Pareto-front quality indicators: normalization, GD, GD+, exact
//! hypervolume for two and three objectives, and simulation rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::moo::{non_dominated_indices, orient_matrix, Direction};

/// Default reference coordinate for normalized hypervolume.
pub const NORMALIZED_REFERENCE: f64 = 1.1;

/// Per-objective min/max of a reference database in minimize orientation,
/// plus the hypervolume reference point in normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub reference_point: Vec<f64>,
}

impl NormalizationSpec {
    pub fn new(min: Vec<f64>, max: Vec<f64>, reference_point: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || reference_point.len() != min.len() {
            return Err(Error::DimensionMismatch { expected: min.len(), found: max.len() });
        }
        if let Some(j) = (0..min.len()).find(|&j| !increasing(min[j], max[j])) {
            return Err(Error::DegenerateRange(j));
        }
        Ok(Self { min, max, reference_point })
    }

    /// Builds the spec from minimize-oriented database points.
    pub fn from_points(points: &Matrix) -> Result<Self> {
        let m = points.cols();
        let mut min = vec![f64::INFINITY; m];
        let mut max = vec![f64::NEG_INFINITY; m];
        for row in points.iter_rows() {
            for j in 0..m {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        Self::new(min, max, vec![NORMALIZED_REFERENCE; m])
    }

    pub fn normalize(&self, points: &Matrix) -> Result<Matrix> {
        normalize(points, self)
    }
}

/// `(v - min) / (max - min)` per objective.
pub fn normalize(points: &Matrix, spec: &NormalizationSpec) -> Result<Matrix> {
    if points.cols() != spec.min.len() {
        return Err(Error::DimensionMismatch { expected: spec.min.len(), found: points.cols() });
    }
    if let Some(j) = (0..spec.min.len()).find(|&j| !increasing(spec.min[j], spec.max[j])) {
        return Err(Error::DegenerateRange(j));
    }
    let mut out = points.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = (*v - spec.min[j]) / (spec.max[j] - spec.min[j]);
        }
    }
    Ok(out)
}

fn increasing(lo: f64, hi: f64) -> bool {
    lo.partial_cmp(&hi) == Some(std::cmp::Ordering::Less)
}

fn check_pair(a: &Matrix, z: &Matrix) -> Result<()> {
    if a.rows() == 0 || z.rows() == 0 {
        return Err(Error::InvalidArgument("indicator inputs must be non-empty".into()));
    }
    if a.cols() != z.cols() {
        return Err(Error::DimensionMismatch { expected: z.cols(), found: a.cols() });
    }
    Ok(())
}

fn mean_nearest(a: &Matrix, z: &Matrix, dist: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    a.iter_rows().map(|p| z.iter_rows().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)).sum::<f64>()
        / a.rows() as f64
}

/// Generational distance: mean Euclidean distance from each point of `a`
/// to its nearest point of the reference `z`.
pub fn gd(a: &Matrix, z: &Matrix) -> Result<f64> {
    check_pair(a, z)?;
    Ok(mean_nearest(a, z, |p, q| p.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()))
}

/// GD+: like [`gd`] but only coordinates where `a` is worse than `z` count.
pub fn gd_plus(a: &Matrix, z: &Matrix) -> Result<f64> {
    check_pair(a, z)?;
    Ok(mean_nearest(a, z, |p, q| p.iter().zip(q).map(|(x, y)| (x - y).max(0.0).powi(2)).sum::<f64>().sqrt()))
}

/// Exact hypervolume (minimize orientation) of the region dominated by
/// `front` and bounded by `reference`. Points that do not strictly dominate
/// the reference contribute nothing.
pub fn hypervolume(front: &Matrix, reference: &[f64]) -> Result<f64> {
    let m = reference.len();
    if front.rows() > 0 && front.cols() != m {
        return Err(Error::DimensionMismatch { expected: m, found: front.cols() });
    }
    let pts: Vec<Vec<f64>> =
        front.iter_rows().filter(|p| p.iter().zip(reference).all(|(v, r)| v < r)).map(<[f64]>::to_vec).collect();
    match m {
        2 => Ok(hv2(pts, reference[0], reference[1])),
        3 => Ok(hv3(pts, reference)),
        _ => Err(Error::UnsupportedDimension(m)),
    }
}

/// Sweep over the first objective.
fn hv2(mut pts: Vec<Vec<f64>>, r0: f64, r1: f64) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = r1;
    for p in &pts {
        if p[1] < ceiling {
            area += (r0 - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

/// Slices along the third objective, one 2D sweep per slab.
fn hv3(mut pts: Vec<Vec<f64>>, reference: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut volume = 0.0;
    let mut active: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        active.push(p.clone());
        let top = pts.get(i + 1).map_or(reference[2], |q| q[2]);
        let depth = top - p[2];
        if depth > 0.0 {
            let slab: Vec<Vec<f64>> =
                non_dominated_indices(&active).into_iter().map(|k| active[k].clone()).collect();
            volume += depth * hv2(slab, reference[0], reference[1]);
        }
    }
    volume
}

/// Fraction of candidates whose ground-truth evaluation succeeded.
pub fn simulation_rate(candidates: usize, validated_ok: usize) -> Result<f64> {
    if candidates == 0 {
        return Err(Error::InvalidArgument("simulation rate needs at least one candidate".into()));
    }
    if validated_ok > candidates {
        return Err(Error::InvalidArgument("more validated points than candidates".into()));
    }
    Ok(validated_ok as f64 / candidates as f64)
}

/// One validated run: its label, validated objective values in the
/// problem's own orientation, and simulation rate when known.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFront {
    pub label: String,
    pub validated: Matrix,
    pub simulation_rate: Option<f64>,
}

/// One row of the indicator table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRow {
    pub label: String,
    pub simulation_rate: Option<f64>,
    pub gd: Option<f64>,
    pub gd_plus: Option<f64>,
    pub hv: f64,
}

/// Label of the database baseline row.
pub const DATABASE_LABEL: &str = "database";

/// Scores every run against the database: GD and GD+ of the run's validated
/// points against the database front, HV of the database merged with the
/// run. The first row is the database alone.
pub fn compare_runs(runs: &[RunFront], database: &Matrix, directions: &[Direction]) -> Result<Vec<IndicatorRow>> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("need at least one run to compare".into()));
    }
    if database.cols() != directions.len() {
        return Err(Error::DimensionMismatch { expected: directions.len(), found: database.cols() });
    }
    let db = orient_matrix(database, directions);
    let spec = NormalizationSpec::from_points(&db)?;
    let db_norm = spec.normalize(&db)?;
    let db_front = db_norm.select_rows(&non_dominated_indices(&db_norm.to_rows()));
    let db_hv = hypervolume(&db_front, &spec.reference_point)?;

    let mut rows = vec![IndicatorRow {
        label: DATABASE_LABEL.to_string(),
        simulation_rate: None,
        gd: None,
        gd_plus: None,
        hv: db_hv,
    }];
    for run in runs {
        if run.validated.rows() > 0 && run.validated.cols() != directions.len() {
            return Err(Error::DimensionMismatch { expected: directions.len(), found: run.validated.cols() });
        }
        let (gd_v, gdp_v, hv) = if run.validated.rows() == 0 {
            (None, None, db_hv)
        } else {
            let pts = spec.normalize(&orient_matrix(&run.validated, directions))?;
            let merged = db_front.vstack(&pts)?;
            (Some(gd(&pts, &db_front)?), Some(gd_plus(&pts, &db_front)?), hypervolume(&merged, &spec.reference_point)?)
        };
        rows.push(IndicatorRow {
            label: run.label.clone(),
            simulation_rate: run.simulation_rate,
            gd: gd_v,
            gd_plus: gdp_v,
            hv,
        });
    }
    Ok(rows)
}

/// Writes `label,simulation_rate,gd,gd_plus,hv`; missing values are empty.
pub fn write_indicators_csv(rows: &[IndicatorRow], path: impl AsRef<std::path::Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "simulation_rate", "gd", "gd_plus", "hv"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([r.label.clone(), opt(r.simulation_rate), opt(r.gd), opt(r.gd_plus), r.hv.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn normalization_examples() {
        let spec = NormalizationSpec::new(vec![1.0, -2.0], vec![5.0, 2.0], vec![1.1, 1.1]).unwrap();
        let out = normalize(&m(&[&[1.0, -2.0], &[5.0, 2.0], &[2.0, -1.0]]), &spec).unwrap();
        assert_eq!(out.to_rows(), vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.25, 0.25]]);
        assert!(matches!(NormalizationSpec::new(vec![1.0], vec![1.0], vec![1.1]), Err(Error::DegenerateRange(0))));
    }

    #[test]
    fn gd_examples() {
        let z = m(&[&[1.0, 1.0]]);
        assert_eq!(gd(&z, &z).unwrap(), 0.0);
        assert!((gd(&m(&[&[2.0, 2.0]]), &z).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let a = m(&[&[0.0, 2.0], &[2.0, 0.0]]);
        assert!((gd(&a, &m(&[&[0.0, 2.0]])).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(gd(&Matrix::zeros(0, 2), &z).is_err());
    }

    #[test]
    fn gd_plus_examples() {
        assert_eq!(gd_plus(&m(&[&[0.0, 2.0]]), &m(&[&[1.0, 1.0]])).unwrap(), 1.0);
        assert_eq!(gd_plus(&m(&[&[0.0, 0.5]]), &m(&[&[1.0, 1.0], &[3.0, 0.0]])).unwrap(), 0.0);
    }

    #[test]
    fn hypervolume_examples() {
        assert_eq!(hypervolume(&m(&[&[1.0, 1.0]]), &[2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(hypervolume(&m(&[&[1.0, 2.0], &[2.0, 1.0]]), &[3.0, 3.0]).unwrap(), 3.0);
        assert_eq!(hypervolume(&m(&[&[1.0, 2.0], &[2.0, 1.0], &[2.5, 2.5]]), &[3.0, 3.0]).unwrap(), 3.0);
        assert_eq!(hypervolume(&m(&[&[0.0, 0.0, 0.0]]), &[1.0, 2.0, 3.0]).unwrap(), 6.0);
        // two overlapping cubes: 1 + 1 - overlap 0.5*0.5*1
        let two = m(&[&[0.0, 0.5, 0.0], &[0.5, 0.0, 0.0]]);
        assert!((hypervolume(&two, &[1.0, 1.0, 1.0]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(hypervolume(&m(&[&[3.0, 0.0]]), &[3.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(hypervolume(&m(&[&[0.0; 4]]), &[1.0; 4]), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn simulation_rate_examples() {
        assert_eq!(simulation_rate(100, 100).unwrap(), 1.0);
        assert_eq!(simulation_rate(100, 0).unwrap(), 0.0);
        assert_eq!(simulation_rate(1000, 783).unwrap(), 0.783);
        assert!(simulation_rate(0, 0).is_err());
    }

    #[test]
    fn dominated_run_leaves_hv_unchanged() {
        let db = m(&[&[0.0, 1.0], &[1.0, 0.0], &[0.5, 0.5]]);
        let dirs = [Direction::Minimize; 2];
        let run = RunFront { label: "bad".into(), validated: m(&[&[0.9, 0.9]]), simulation_rate: Some(1.0) };
        let rows = compare_runs(&[run.clone(), run], &db, &dirs).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].hv, rows[0].hv);
        assert_eq!(rows[1], rows[2]);
        assert!(rows[1].gd_plus.unwrap() <= rows[1].gd.unwrap());
    }

    #[test]
    fn improving_run_raises_hv() {
        let db = m(&[&[0.0, 1.0], &[1.0, 0.0], &[0.5, 0.5]]);
        let dirs = [Direction::Minimize; 2];
        let run = RunFront { label: "good".into(), validated: m(&[&[0.2, 0.2]]), simulation_rate: Some(1.0) };
        let rows = compare_runs(&[run], &db, &dirs).unwrap();
        assert!(rows[1].hv > rows[0].hv);
        assert_eq!(rows[1].gd_plus, Some(0.0));
        assert!(compare_runs(&[], &db, &dirs).is_err());
    }

    proptest! {
        #[test]
        fn gd_plus_never_exceeds_gd(
            a in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..15),
            z in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..15),
        ) {
            let (a, z) = (Matrix::from_rows(&a).unwrap(), Matrix::from_rows(&z).unwrap());
            prop_assert!(gd_plus(&a, &z).unwrap() <= gd(&a, &z).unwrap() + 1e-15);
        }

        #[test]
        fn hv_monotone(seed in any::<u64>(), three in any::<bool>()) {
            let dim = if three { 3 } else { 2 };
            let mut r = rng::rng_from(seed);
            let pts: Vec<Vec<f64>> = (0..12).map(|_| (0..dim).map(|_| r.gen::<f64>()).collect()).collect();
            let reference = vec![1.1; dim];
            let base = hypervolume(&Matrix::from_rows(&pts).unwrap(), &reference).unwrap();
            let extra: Vec<f64> = (0..dim).map(|_| r.gen::<f64>()).collect();
            let mut more = pts.clone();
            more.push(extra.clone());
            prop_assert!(hypervolume(&Matrix::from_rows(&more).unwrap(), &reference).unwrap() >= base - 1e-12);
            // a point weakly worse than an existing one adds nothing
            let mut dominated = pts.clone();
            dominated.push(pts[0].iter().map(|v| v + 0.01).collect());
            let hv = hypervolume(&Matrix::from_rows(&dominated).unwrap(), &reference).unwrap();
            prop_assert!((hv - base).abs() <= 1e-12);
        }

        #[test]
        fn gd_zero_iff_subset(seed in any::<u64>()) {
            let mut r = rng::rng_from(seed);
            let z: Vec<Vec<f64>> = (0..8).map(|_| vec![r.gen::<f64>(), r.gen::<f64>()]).collect();
            let subset: Vec<Vec<f64>> = z.iter().step_by(3).cloned().collect();
            let zm = Matrix::from_rows(&z).unwrap();
            prop_assert!(gd(&Matrix::from_rows(&subset).unwrap(), &zm).unwrap() <= 1e-12);
            let off = vec![vec![z[0][0] + 1e-3, z[0][1]]];
            prop_assert!(gd(&Matrix::from_rows(&off).unwrap(), &zm).unwrap() > 1e-12);
        }

        #[test]
        fn affine_rescaling_invariance(seed in any::<u64>(), scale in 0.1f64..50.0, shift in -10.0f64..10.0) {
            let mut r = rng::rng_from(seed);
            let db: Vec<Vec<f64>> = (0..10).map(|_| vec![r.gen::<f64>(), r.gen::<f64>()]).collect();
            let run: Vec<Vec<f64>> = (0..4).map(|_| vec![r.gen::<f64>(), r.gen::<f64>()]).collect();
            let dirs = [Direction::Minimize; 2];
            let base = compare_runs(
                &[RunFront { label: "r".into(), validated: Matrix::from_rows(&run).unwrap(), simulation_rate: None }],
                &Matrix::from_rows(&db).unwrap(), &dirs).unwrap();
            let tx = |rows: &[Vec<f64>]| Matrix::from_rows(
                &rows.iter().map(|p| vec![p[0] * scale + shift, p[1] * 2.0 * scale - shift]).collect::<Vec<_>>()).unwrap();
            let moved = compare_runs(
                &[RunFront { label: "r".into(), validated: tx(&run), simulation_rate: None }],
                &tx(&db), &dirs).unwrap();
            for (a, b) in base.iter().zip(&moved) {
                prop_assert!((a.hv - b.hv).abs() < 1e-9);
                prop_assert!((a.gd.unwrap_or(0.0) - b.gd.unwrap_or(0.0)).abs() < 1e-9);
                prop_assert!((a.gd_plus.unwrap_or(0.0) - b.gd_plus.unwrap_or(0.0)).abs() < 1e-9);
            }
        }
    }
}
