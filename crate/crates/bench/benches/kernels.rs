use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use surromoo_core::dataset::uniform_random;
use surromoo_core::indicators::hypervolume;
use surromoo_core::moo::{fast_non_dominated_sort, non_dominated_indices, nsga2_run, Nsga2Config};
use surromoo_core::oracle::{generate_dataset, Sampler};
use surromoo_core::surrogate::{train_gbt, GbtParams};
use surromoo_core::{FeatureBounds, Matrix, OracleProblem};

fn sphere_front(n: usize) -> Matrix {
    let pts = uniform_random(n, &FeatureBounds::uniform(3, 0.0, 1.0).unwrap(), 1);
    let rows: Vec<Vec<f64>> = pts
        .iter_rows()
        .map(|p| {
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            p.iter().map(|v| v / norm).collect()
        })
        .collect();
    let front: Vec<Vec<f64>> = non_dominated_indices(&rows).into_iter().map(|i| rows[i].clone()).collect();
    Matrix::from_rows(&front).unwrap()
}

fn bench_hypervolume(c: &mut Criterion) {
    let mut group = c.benchmark_group("hypervolume_3d");
    for n in [50, 200] {
        let front = sphere_front(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &front, |b, f| {
            b.iter(|| hypervolume(f, &[1.1, 1.1, 1.1]).unwrap())
        });
    }
    group.finish();
}

fn bench_sort(c: &mut Criterion) {
    let mut group = c.benchmark_group("non_dominated_sort");
    for n in [200, 1000] {
        let pts = uniform_random(n, &FeatureBounds::uniform(3, 0.0, 1.0).unwrap(), 2).to_rows();
        group.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, p| b.iter(|| fast_non_dominated_sort(p)));
    }
    group.finish();
}

fn bench_gbt(c: &mut Criterion) {
    let data = generate_dataset(OracleProblem::Zdt1, Sampler::Lhd, 800, 3).unwrap().dataset;
    let params = GbtParams { n_trees: 100, max_depth: 4, ..GbtParams::default() };
    c.bench_function("gbt_fit_800x30_100_trees", |b| b.iter(|| train_gbt(&data, 1, &params).unwrap()));
}

fn bench_nsga2(c: &mut Criterion) {
    let problem = OracleProblem::Zdt1;
    let config = Nsga2Config { pop_size: 100, generations: 50, seed: 4, ..Nsga2Config::default() };
    let mut group = c.benchmark_group("nsga2");
    group.sample_size(10);
    group.bench_function("zdt1_pop100_gen50", |b| b.iter(|| nsga2_run(&problem.spec(), &problem, &config).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_hypervolume, bench_sort, bench_gbt, bench_nsga2);
criterion_main!(benches);
