use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};

use htrisk::estimators::{fit_proximal, RidgeSystem};
use htrisk::rng::{stream, Purpose};
use htrisk::spectrum::{decompose, sample_design};
use htrisk::tails::sample_noise;
use htrisk::{CovarianceModel, DesignKind, DiscreteSpectrum, EstimatorConfig, RegularizerSpec, TailFamily, TailLaw, TheoryInputs};

struct Problem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    prior: DVector<f64>,
}

fn problem(n: usize, p: usize) -> Problem {
    let eig = decompose(&CovarianceModel::ar1(p, 0.5).unwrap()).unwrap();
    let x = sample_design(Some(&eig.sqrt()), n, p, DesignKind::Gaussian, &mut stream(1, 0, Purpose::Design)).unwrap();
    let beta = DVector::from_fn(p, |j, _| if j % 10 == 0 { 1.0 } else { 0.0 });
    let law = TailLaw::new(TailFamily::StudentT, 1.5).unwrap();
    let noise = DVector::from_vec(sample_noise(&law, n, &mut stream(1, 0, Purpose::Noise)));
    let y = &x * &beta + noise;
    let prior = beta.map(|b| b + 0.05);
    Problem { x, y, prior }
}

fn ridge(c: &mut Criterion) {
    let mut group = c.benchmark_group("ridge");
    for &(n, p) in &[(200, 100), (800, 400)] {
        let pr = problem(n, p);
        let system = RidgeSystem::new(&pr.x);
        group.bench_with_input(BenchmarkId::new("solve", format!("{n}x{p}")), &pr, |b, pr| {
            b.iter(|| system.solve(black_box(&pr.y), 1.0, &pr.prior).unwrap())
        });
    }
    group.finish();
}

fn proximal(c: &mut Criterion) {
    let mut group = c.benchmark_group("proximal");
    group.sample_size(20);
    let pr = problem(200, 100);
    let lasso = EstimatorConfig::transfer("lasso", RegularizerSpec::Lasso, 1.0);
    group.bench_function("lasso_200x100", |b| {
        b.iter(|| fit_proximal(&lasso, &pr.x, black_box(&pr.y), 0.05, &pr.prior, None).unwrap())
    });
    let huber = EstimatorConfig::huber("huber", 1.5, 0.1).unwrap();
    let origin = DVector::zeros(pr.x.ncols());
    group.bench_function("huber_200x100", |b| {
        b.iter(|| fit_proximal(&huber, &pr.x, black_box(&pr.y), 0.1, &origin, None).unwrap())
    });
    group.finish();
}

fn fixed_point(c: &mut Criterion) {
    let mut group = c.benchmark_group("theory");
    let p = 400;
    let eig = decompose(&CovarianceModel::ar1(p, 0.5).unwrap()).unwrap();
    let eigenvalues = eig.eigenvalues().iter().copied().collect();
    let spectrum = DiscreteSpectrum::new(eigenvalues, vec![0.05; p]).unwrap();
    for reg in [RegularizerSpec::Ridge, RegularizerSpec::Lasso] {
        let inputs = TheoryInputs::new(spectrum.clone(), 800, 10.0, 1.0, reg).unwrap();
        group.bench_function(format!("fixed_point_{}", reg.name()), |b| {
            b.iter(|| htrisk::theory::solve_general_fixed_point(black_box(&inputs)).unwrap())
        });
    }
    let inputs = TheoryInputs::new(spectrum, 800, 10.0, 1.0, RegularizerSpec::Ridge).unwrap();
    group.bench_function("ridge_closed_form", |b| {
        b.iter(|| htrisk::theory::ridge_risk_closed_form(black_box(&inputs)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, ridge, proximal, fixed_point);
criterion_main!(benches);
