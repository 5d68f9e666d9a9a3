//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (bypassing the test harness capture) before asserting.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use htrisk::convex::{classify_conjugate, conjugate_growth, growth_test_bounded, required_alpha};
use htrisk::estimators::{fit, fit_proximal, RidgeSystem};
use htrisk::experiments::{self, records, ExperimentName};
use htrisk::rng::{stream, Purpose};
use htrisk::spectrum::{decompose, q_sigma, sample_design, sparse_signal, sphere_vector};
use htrisk::tails::{effective_variance_asymptotic, effective_variance_exact, sample_noise, threshold, winsorize_all};
use htrisk::theory::{ridge_risk_closed_form, solve_general_fixed_point};
use htrisk::{
    CovarianceModel, DesignKind, DiscreteSpectrum, EstimatorConfig, ExperimentConfig, LossSpec, RegularizerSpec,
    TailFamily, TailLaw, TheoryInputs,
};

fn report(id: u32, title: &str, passed: bool, detail: &str, started: Instant) {
    let line = format!(
        "{} criterion {id:>2}: {title} ({detail}; {:.1} s)\n",
        if passed { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn run_desk(name: ExperimentName) -> experiments::ExperimentOutcome {
    experiments::run(&ExperimentConfig::defaults(name, false), None).expect("experiment runs")
}

fn describe_checks(outcome: &experiments::ExperimentOutcome) -> String {
    outcome
        .checks
        .iter()
        .map(|c| format!("{}{}={:.4}", if c.passed { "" } else { "!" }, c.name, c.value))
        .collect::<Vec<_>>()
        .join(", ")
}

fn experiment_criterion(id: u32, title: &str, name: ExperimentName) {
    let started = Instant::now();
    let outcome = run_desk(name);
    let passed = outcome.passed();
    report(id, title, passed, &describe_checks(&outcome), started);
    assert!(passed, "{}", describe_checks(&outcome));
}

#[test]
fn criterion_01_effective_variance_exactness() {
    let started = Instant::now();
    let law = TailLaw::symmetric_pareto(1.5).unwrap();
    let exact_small = effective_variance_exact(&law, 100.0).unwrap();
    let exact_large = effective_variance_exact(&law, 1e4).unwrap();
    let asym_small = effective_variance_asymptotic(&law, 1_000).unwrap();
    let asym_large = effective_variance_asymptotic(&law, 1_000_000).unwrap();
    let ratios: Vec<f64> = [1_000usize, 10_000, 100_000, 1_000_000, 10_000_000]
        .iter()
        .map(|&n| {
            effective_variance_exact(&law, threshold(&law, n).unwrap()).unwrap()
                / effective_variance_asymptotic(&law, n).unwrap()
        })
        .collect();
    let trend = ratios.windows(2).all(|w| w[1] > w[0] && w[1] < 1.0);
    let passed = exact_small == 37.0 && exact_large == 397.0 && asym_small == 40.0 && asym_large == 400.0 && trend;
    let detail = format!("exact {exact_small:?}/{exact_large:?}, asymptotic {asym_small:?}/{asym_large:?}, ratios {ratios:.4?}");
    report(1, "effective variance closed forms", passed, &detail, started);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_02_theory_matches_monte_carlo_transient() {
    experiment_criterion(2, "ridge theory vs Monte Carlo (transient)", ExperimentName::Transient);
}

fn ar1_spectrum(p: usize, rho: f64, seed: u64) -> DiscreteSpectrum {
    let eig = decompose(&CovarianceModel::ar1(p, rho).unwrap()).unwrap();
    let beta_star = sparse_signal(p, 0.1, &mut stream(seed, 0, Purpose::Signal)).unwrap();
    let beta0 = &beta_star - sphere_vector(p, 1.0, &mut stream(seed, 0, Purpose::Delta));
    eig.project_delta(&beta_star, &beta0).unwrap()
}

#[test]
fn criterion_03_fixed_point_reduces_to_ridge_closed_form() {
    let started = Instant::now();
    let p = 200;
    let identity = DiscreteSpectrum::identity(vec![0.05; p]).unwrap();
    let ar1 = ar1_spectrum(p, 0.5, 11);
    let mut worst: f64 = 0.0;
    for spectrum in [&identity, &ar1] {
        for &lt in &[0.1, 1.0, 10.0] {
            for &s2 in &[0.5, 5.0, 50.0] {
                let inputs = TheoryInputs::new(spectrum.clone(), 400, s2, lt, RegularizerSpec::Ridge).unwrap();
                let closed = ridge_risk_closed_form(&inputs).unwrap().risk;
                let general = solve_general_fixed_point(&inputs).unwrap().risk;
                worst = worst.max((general - closed).abs() / closed);
            }
        }
    }
    let passed = worst <= 1e-6;
    report(3, "fixed point vs ridge closed form", passed, &format!("max relative gap {worst:.2e}"), started);
    assert!(passed);
}

#[test]
fn criterion_04_universal_floor() {
    let started = Instant::now();
    let spectrum = ar1_spectrum(400, 0.5, 5);
    let q = q_sigma(&spectrum);
    let gamma = 0.5;
    let tau_floor = (1.0 + gamma * q).sqrt();
    let mut worst_risk: f64 = 0.0;
    let mut worst_tau: f64 = 0.0;
    for reg in [RegularizerSpec::Ridge, RegularizerSpec::Lasso, RegularizerSpec::elastic_net(0.5).unwrap()] {
        let inputs = TheoryInputs::new(spectrum.clone(), 800, 1e12, 1.0, reg).unwrap();
        let pred = solve_general_fixed_point(&inputs).unwrap();
        worst_risk = worst_risk.max((pred.risk - q).abs() / q);
        worst_tau = worst_tau.max((pred.tau - tau_floor).abs());
    }
    let passed = worst_risk <= 1e-4 && worst_tau <= 1e-4;
    let detail = format!("q = {q:.6}, risk gap {worst_risk:.2e}, tau gap {worst_tau:.2e}");
    report(4, "universal floor for ridge, lasso, elastic net", passed, &detail, started);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_05_trichotomy() {
    experiment_criterion(5, "risk trichotomy", ExperimentName::Trichotomy);
}

#[test]
fn criterion_06_floor_universality() {
    experiment_criterion(6, "empirical floor universality", ExperimentName::Floor);
}

#[test]
fn criterion_07_design_universality() {
    experiment_criterion(7, "Gaussian vs Rademacher design", ExperimentName::Universality);
}

#[test]
fn criterion_08_concentration() {
    experiment_criterion(8, "winsorized energy concentration", ExperimentName::Concentration);
}

#[test]
fn criterion_09_classification_table() {
    let started = Instant::now();
    let rows: [(LossSpec, bool, Option<f64>, f64, bool); 5] = [
        (LossSpec::Squared, false, None, 2.0, false),
        (LossSpec::huber(1.5).unwrap(), true, Some(1.5), 1.0, true),
        (LossSpec::Absolute, true, Some(1.0), 1.0, true),
        (LossSpec::quantile(0.3).unwrap(), true, Some(0.7), 1.0, true),
        (LossSpec::LogCosh, true, Some(1.0), 1.0, true),
    ];
    let mut mismatches = Vec::new();
    for (loss, bounded, k, alpha, strict) in rows {
        let class = classify_conjugate(&loss);
        let need = required_alpha(conjugate_growth(&class)).unwrap();
        let ok = class.bounded == bounded
            && class.k == k
            && need.alpha == alpha
            && need.strict == strict
            && growth_test_bounded(&loss) == bounded;
        if !ok {
            mismatches.push(loss.name());
        }
    }
    let quantile = classify_conjugate(&LossSpec::quantile(0.3).unwrap());
    if quantile.domain != Some((0.3 - 1.0, 0.3)) {
        mismatches.push("quantile domain");
    }
    if classify_conjugate(&LossSpec::Squared).q_growth != Some(2.0) {
        mismatches.push("squared growth");
    }
    let hierarchy = [(2.0, 2.0, false), (1.0, 1.0, true), (3.0, 1.5, false)];
    for (q, alpha, strict) in hierarchy {
        let need = required_alpha(q).unwrap();
        if need.alpha != alpha || need.strict != strict {
            mismatches.push("moment hierarchy");
        }
    }
    let passed = mismatches.is_empty();
    let detail = if passed { "all rows match".to_string() } else { format!("mismatch: {mismatches:?}") };
    report(9, "conjugate-domain classification table", passed, &detail, started);
    assert!(passed, "{detail}");
}

#[test]
fn criterion_10_first_moment_of_winsorized_noise() {
    let started = Instant::now();
    let law = TailLaw::symmetric_pareto(1.5).unwrap();
    let n = 1_000_000;
    let tau = threshold(&law, n).unwrap();
    let mut w = sample_noise(&law, n, &mut stream(20240601, 0, Purpose::Noise));
    winsorize_all(&mut w, tau).unwrap();
    let mean_abs = w.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
    let target = law.unit_mean_abs().unwrap();
    let rel = (mean_abs - target).abs() / target;
    let passed = target == 3.0 && rel <= 0.02;
    let detail = format!("mean |w| = {mean_abs:.4} vs {target}, relative gap {rel:.4}");
    report(10, "first moment of winsorized noise", passed, &detail, started);
    assert!(passed, "{detail}");
}

fn prox_properties() -> Vec<&'static str> {
    let mut failures = Vec::new();
    let grid: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
    let steps = [0.01, 0.3, 1.0, 7.0, 1e3];
    for loss in [LossSpec::Squared, LossSpec::Absolute, LossSpec::huber(1.5).unwrap()] {
        for &eta in &steps {
            for &x in &grid {
                let primal = loss.prox(eta, x).unwrap();
                let dual = loss.conjugate_prox(1.0 / eta, x / eta).unwrap();
                if (primal + eta * dual - x).abs() > 1e-8 {
                    failures.push("Moreau decomposition");
                }
            }
        }
    }
    let regs = [RegularizerSpec::Ridge, RegularizerSpec::Lasso, RegularizerSpec::elastic_net(0.5).unwrap()];
    for reg in regs {
        for &eta in &steps {
            for pair in grid.windows(2) {
                let (a, b) = (reg.prox_scalar(eta, pair[0]), reg.prox_scalar(eta, pair[1]));
                if (a - b).abs() > (pair[0] - pair[1]).abs() + 1e-15 {
                    failures.push("nonexpansiveness");
                }
            }
            if reg.prox_scalar(eta, 0.0) != 0.0 {
                failures.push("prox of zero");
            }
        }
        for &x in &grid {
            if reg.prox_scalar(1e6, x).abs() > 1e-3 {
                failures.push("collapse at large step");
            }
            let path: Vec<f64> = (0..=12).map(|e| reg.prox_scalar(10f64.powi(e - 6), x).abs()).collect();
            if path.windows(2).any(|w| w[1] > w[0]) {
                failures.push("monotone collapse");
            }
        }
    }
    failures
}

fn certificate_failures() -> Vec<String> {
    let (n, p) = (150, 60);
    let x: DMatrix<f64> = sample_design(None, n, p, DesignKind::Gaussian, &mut stream(3, 0, Purpose::Design)).unwrap();
    let beta = DVector::from_fn(p, |j, _| if j % 6 == 0 { 1.0 } else { 0.0 });
    let law = TailLaw::new(TailFamily::StudentT, 1.5).unwrap();
    let y = &x * &beta + DVector::from_vec(sample_noise(&law, n, &mut stream(3, 0, Purpose::Noise)));
    let prior = beta.map(|b| b + 0.1);
    let mut failures = Vec::new();
    let configs = [
        EstimatorConfig::transfer("lasso", RegularizerSpec::Lasso, 1.0),
        EstimatorConfig::transfer("enet", RegularizerSpec::elastic_net(0.5).unwrap(), 1.0),
        EstimatorConfig::huber("huber", 1.5, 0.1).unwrap(),
    ];
    for cfg in &configs {
        let r = fit(cfg, &x, &y, 0.2, &prior, None).unwrap();
        if !(r.converged && r.grad_map_norm <= 1e-8 * (1.0 + r.beta_hat.norm())) {
            failures.push(format!("{} certificate {:.2e}", cfg.id, r.grad_map_norm));
        }
    }
    // the proximal path must land on the closed-form ridge solution
    let ridge = EstimatorConfig::transfer("ridge", RegularizerSpec::Ridge, 1.0);
    let iterative = fit_proximal(&ridge, &x, &y, 0.2, &prior, None).unwrap();
    let closed = RidgeSystem::new(&x).solve(&y, 0.2, &prior).unwrap();
    let gap = (&iterative.beta_hat - &closed.beta_hat).norm() / closed.beta_hat.norm();
    if gap > 1e-6 {
        failures.push(format!("ridge gap {gap:.2e}"));
    }
    failures
}

fn worker_reproducibility() -> bool {
    let mut cfg = ExperimentConfig::defaults(ExperimentName::Trichotomy, false);
    cfg.experiment.n = 120;
    cfg.experiment.p = 40;
    cfg.experiment.replications = 6;
    cfg.experiment.sweep = vec![0.0, 1.0, 30.0, 1000.0];
    let csv = |workers| records::to_csv(&experiments::run(&cfg, Some(workers)).unwrap().records);
    let one = csv(1);
    one == csv(2) && one == csv(4)
}

#[test]
fn criterion_11_property_suites() {
    let started = Instant::now();
    let prox = prox_properties();
    let certs = certificate_failures();
    let reproducible = worker_reproducibility();
    let passed = prox.is_empty() && certs.is_empty() && reproducible;
    let detail = format!(
        "prox failures {}, certificate failures {:?}, CSV identical across 1/2/4 workers: {reproducible}",
        prox.len(),
        certs
    );
    report(11, "prox identities, certificates, reproducibility", passed, &detail, started);
    assert!(passed, "{detail} {prox:?}");
}
