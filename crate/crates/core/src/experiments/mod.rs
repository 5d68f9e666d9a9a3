//! Seeded Monte Carlo harness for the six named experiments.
//!
//! Every experiment freezes `β*` and `Δ = β* − β₀` once per master seed, then
//! draws a fresh design and a fresh noise vector per replication. Within a
//! replication the unit noise is drawn once and rescaled along the sweep, so
//! neighbouring sweep points share their randomness. Replications run in
//! parallel; records are sorted by key before anything is aggregated, so the
//! outputs do not depend on the number of workers.

pub mod config;
pub mod records;

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{EstimatorId, ExperimentConfig, ExperimentName, NoiseVariant};
pub use records::{summarize, RiskRecord, SummaryRow};

use crate::convex::{LossSpec, RegularizerSpec};
use crate::error::{Error, Result};
use crate::estimators::{empirical_risk, fit_proximal, Center, EstimatorConfig, FitResult, OlsFactor, RidgeSystem};
use crate::rng::{stream, Purpose};
use crate::spectrum::{decompose, q_sigma, sample_design, sparse_signal, sphere_vector, DesignKind, DiscreteSpectrum};
use crate::tails::{sample_noise, winsorize_all, TailLaw, WinsorPlan};
use crate::theory::{ridge_risk_closed_form, TheoryInputs};

/// Alias kept for the crate-level re-export.
pub type Summary = SummaryRow;

/// Largest tolerated share of non-converged fits.
pub const MAX_NONCONVERGED_FRACTION: f64 = 0.01;

/// One pass/fail assertion of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

impl Check {
    fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("[{lo:?}, {hi:?}]"),
            passed: value >= lo && value <= hi,
        }
    }

    fn at_most(name: &str, value: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("<= {hi:?}"),
            passed: value <= hi,
        }
    }

    fn at_least(name: &str, value: f64, lo: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!(">= {lo:?}"),
            passed: value >= lo,
        }
    }
}

/// Per-estimator view of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub experiment: String,
    pub estimator: String,
    pub noise: NoiseVariant,
    /// Log-log slope of mean risk over all positive sweep values.
    pub slope: Option<f64>,
    /// Same, restricted to the top decade of the sweep.
    pub top_decade_slope: Option<f64>,
    pub rows: Vec<SummaryRow>,
}

/// Prediction against Monte Carlo at one effective variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryPoint {
    pub sigma2: f64,
    pub predicted: f64,
    pub bias_term: f64,
    pub variance_term: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub rel_error: f64,
}

/// Share of replications with the winsorized energy ratio in `[0.9, 1.1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRow {
    pub n: usize,
    pub sigma2_exact: f64,
    pub in_band: f64,
    pub median_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub records: Vec<RiskRecord>,
    pub summary: Vec<SummaryRow>,
    pub estimators: Vec<EstimatorSummary>,
    pub q_sigma: Option<f64>,
    pub theory: Vec<TheoryPoint>,
    pub bands: Vec<BandRow>,
    pub checks: Vec<Check>,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn nonconverged(&self) -> usize {
        self.records.iter().filter(|r| !r.converged).count()
    }

    pub fn estimator(&self, id: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == id)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Frozen per-experiment quantities.
struct Instance {
    sigma: DMatrix<f64>,
    root: Option<DMatrix<f64>>,
    beta_star: DVector<f64>,
    beta0: DVector<f64>,
    spectrum: DiscreteSpectrum,
}

impl Instance {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let model = cfg.covariance_model()?;
        let eig = decompose(&model)?;
        let seed = cfg.experiment.master_seed;
        let p = cfg.experiment.p;
        let beta_star = sparse_signal(p, cfg.signal.sparsity, &mut stream(seed, 0, Purpose::Signal))?;
        let delta = sphere_vector(p, cfg.signal.delta_norm, &mut stream(seed, 0, Purpose::Delta));
        let beta0 = &beta_star - &delta;
        let spectrum = eig.project_delta(&beta_star, &beta0)?;
        let root = (!model.is_identity()).then(|| eig.sqrt());
        Ok(Self {
            sigma: model.matrix(),
            root,
            beta_star,
            beta0,
            spectrum,
        })
    }

    fn q_sigma(&self) -> f64 {
        q_sigma(&self.spectrum)
    }
}

/// The covariance spectrum with the frozen offset `Δ` of `cfg`, as used by
/// the theory overlay.
pub fn frozen_spectrum(cfg: &ExperimentConfig) -> Result<DiscreteSpectrum> {
    Ok(Instance::new(cfg)?.spectrum)
}

/// Factorizations shared by every fit on one design.
struct DesignSolvers<'a> {
    x: &'a DMatrix<f64>,
    ols: Option<OlsFactor>,
    ridge: Option<RidgeSystem<'a>>,
    origin: DVector<f64>,
}

impl<'a> DesignSolvers<'a> {
    fn new(x: &'a DMatrix<f64>) -> Self {
        Self {
            x,
            ols: None,
            ridge: None,
            origin: DVector::zeros(x.ncols()),
        }
    }

    fn ols(&mut self, y: &DVector<f64>) -> Result<FitResult> {
        if self.ols.is_none() {
            self.ols = Some(OlsFactor::new(self.x)?);
        }
        self.ols.as_ref().expect("factor was just built").solve(y)
    }

    fn fit(
        &mut self,
        est: &EstimatorConfig,
        y: &DVector<f64>,
        lambda_n: f64,
        prior: &DVector<f64>,
        warm: Option<&DVector<f64>>,
    ) -> Result<FitResult> {
        let center = match est.center {
            Center::Prior => prior,
            Center::Origin => &self.origin,
        };
        let squared = est.loss == LossSpec::Squared;
        let full_rank = self.x.nrows() > self.x.ncols();
        match est.reg {
            None if squared => self.ols(y),
            Some(_) if squared && lambda_n == 0.0 && full_rank => self.ols(y),
            Some(RegularizerSpec::Ridge) if squared && lambda_n > 0.0 => {
                let x = self.x;
                self.ridge.get_or_insert_with(|| RidgeSystem::new(x)).solve(y, lambda_n, center)
            }
            _ => fit_proximal(est, self.x, y, lambda_n, center, warm),
        }
    }
}

/// How a sweep value turns into a noise multiplier and the `σ_n²` that
/// sets the noise-adapted penalty.
#[derive(Clone, Copy)]
enum SweepMode {
    /// Multiply the noise by the value; `σ_n² = value² · σ₀²`.
    Scale,
    /// The value is the target effective variance.
    EffectiveVariance,
}

struct Sweep<'a> {
    cfg: &'a ExperimentConfig,
    inst: &'a Instance,
    plan: &'a [(EstimatorConfig, NoiseVariant)],
    law: TailLaw,
    winsor: WinsorPlan,
    mode: SweepMode,
}

impl Sweep<'_> {
    fn replication(&self, rep: u64, design: DesignKind, purpose: Purpose, suffix: &str) -> Result<Vec<RiskRecord>> {
        let e = &self.cfg.experiment;
        let seed = e.master_seed;
        let x = sample_design(self.inst.root.as_ref(), e.n, e.p, design, &mut stream(seed, rep, purpose))?;
        let raw = DVector::from_vec(sample_noise(&self.law, e.n, &mut stream(seed, rep, Purpose::Noise)));
        let mut clipped = raw.clone();
        winsorize_all(clipped.as_mut_slice(), self.winsor.tau)?;
        let signal = &x * &self.inst.beta_star;
        let sigma0 = self.winsor.sigma2;

        let mut solvers = DesignSolvers::new(&x);
        let mut out = Vec::with_capacity(self.plan.len() * e.sweep.len());
        for (est, variant) in self.plan {
            let base = match variant {
                NoiseVariant::Winsorized => &clipped,
                NoiseVariant::Raw => &raw,
            };
            let mut warm: Option<DVector<f64>> = None;
            for &value in &e.sweep {
                let (mult, sigma2) = match self.mode {
                    SweepMode::Scale => (value, value * value * sigma0),
                    SweepMode::EffectiveVariance => {
                        if sigma0 == 0.0 {
                            return Err(Error::DegenerateNoise("winsorized noise has zero variance".into()));
                        }
                        ((value / sigma0).sqrt(), value)
                    }
                };
                let y = &signal + base * mult;
                let lambda_n = est.lambda.resolve(Some(sigma2))?;
                let start = Instant::now();
                let fit = solvers.fit(est, &y, lambda_n, &self.inst.beta0, warm.as_ref())?;
                let wall_ms = if e.record_timing {
                    start.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                };
                let risk = empirical_risk(&fit.beta_hat, &self.inst.beta_star, &self.inst.sigma)?;
                out.push(RiskRecord {
                    experiment: e.name.to_string(),
                    estimator: format!("{}{suffix}", est.id),
                    sweep_value: value,
                    replication: rep,
                    risk,
                    converged: fit.converged && risk.is_finite(),
                    wall_ms,
                });
                warm = Some(fit.beta_hat);
            }
        }
        Ok(out)
    }
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(0) => Err(Error::Config("workers must be >= 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn parallel_reps<F>(reps: usize, workers: Option<usize>, task: F) -> Result<Vec<RiskRecord>>
where
    F: Fn(u64) -> Result<Vec<RiskRecord>> + Sync + Send,
{
    let chunks: Vec<Result<Vec<RiskRecord>>> =
        in_pool(workers, || (0..reps as u64).into_par_iter().map(&task).collect())?;
    let mut records = Vec::new();
    for chunk in chunks {
        records.extend(chunk?);
    }
    records::sort_records(&mut records);
    Ok(records)
}

fn mean_curve(rows: &[SummaryRow], estimator: &str) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.estimator == estimator)
        .map(|r| (r.sweep_value, r.mean))
        .collect()
}

fn top_decade(curve: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let top = curve.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    curve.iter().copied().filter(|p| p.0 >= top / 10.0 * (1.0 - 1e-12)).collect()
}

fn estimator_summaries(name: ExperimentName, rows: &[SummaryRow], ids: &[(String, NoiseVariant)]) -> Vec<EstimatorSummary> {
    ids.iter()
        .map(|(id, noise)| {
            let curve = mean_curve(rows, id);
            EstimatorSummary {
                experiment: name.to_string(),
                estimator: id.clone(),
                noise: *noise,
                slope: records::log_log_slope(&curve),
                top_decade_slope: records::log_log_slope(&top_decade(&curve)),
                rows: rows.iter().filter(|r| &r.estimator == id).cloned().collect(),
            }
        })
        .collect()
}

fn convergence_check(records: &[RiskRecord]) -> Check {
    let bad = records.iter().filter(|r| !r.converged).count();
    let frac = if records.is_empty() { 0.0 } else { bad as f64 / records.len() as f64 };
    Check::at_most("nonconverged_fraction", frac, MAX_NONCONVERGED_FRACTION)
}

fn terminal_mean(rows: &[SummaryRow], id: &str) -> f64 {
    rows.iter().rfind(|r| r.estimator == id).map_or(f64::NAN, |r| r.mean)
}

fn relative_gap(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference
}

/// Runs a named experiment. `workers = None` uses the global thread pool.
pub fn run(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    match cfg.name() {
        ExperimentName::Paradox | ExperimentName::Floor | ExperimentName::Trichotomy => run_scale_experiment(cfg, workers),
        ExperimentName::Transient => run_transient(cfg, workers),
        ExperimentName::Universality => run_universality(cfg, workers),
        ExperimentName::Concentration => run_concentration(cfg, workers),
    }
}

fn sweep_setup(cfg: &ExperimentConfig) -> Result<(Instance, Vec<(EstimatorConfig, NoiseVariant)>, TailLaw, WinsorPlan)> {
    let inst = Instance::new(cfg)?;
    let plan = cfg.estimator_plan()?;
    let law = cfg.noise_law()?;
    let winsor = WinsorPlan::new(&law, cfg.experiment.n)?;
    Ok((inst, plan, law, winsor))
}

fn run_scale_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutcome> {
    let (inst, plan, law, winsor) = sweep_setup(cfg)?;
    let sweep = Sweep {
        cfg,
        inst: &inst,
        plan: &plan,
        law,
        winsor,
        mode: SweepMode::Scale,
    };
    let design = cfg.experiment.design;
    let records = parallel_reps(cfg.experiment.replications, workers, |rep| {
        sweep.replication(rep, design, Purpose::Design, "")
    })?;
    let summary = summarize(&records);
    let ids: Vec<(String, NoiseVariant)> = plan.iter().map(|(e, v)| (e.id.clone(), *v)).collect();
    let estimators = estimator_summaries(cfg.name(), &summary, &ids);
    let q = inst.q_sigma();

    let mut checks = vec![convergence_check(&records)];
    let has = |id: EstimatorId| cfg.estimators.include.contains(&id);
    let slope_of = |id: EstimatorId| {
        estimators
            .iter()
            .find(|e| e.estimator == id.as_str())
            .and_then(|e| e.slope)
            .unwrap_or(f64::NAN)
    };
    let top_slope_of = |id: EstimatorId| {
        estimators
            .iter()
            .find(|e| e.estimator == id.as_str())
            .and_then(|e| e.top_decade_slope)
            .unwrap_or(f64::NAN)
    };
    let zero_row = |id: EstimatorId| {
        summary
            .iter()
            .find(|r| r.estimator == id.as_str() && r.sweep_value == 0.0)
            .map(|r| r.mean)
    };
    match cfg.name() {
        ExperimentName::Paradox => {
            if has(EstimatorId::Ols) {
                if let Some(m) = zero_row(EstimatorId::Ols) {
                    checks.push(Check::at_most("ols_noiseless_risk", m, 1e-20));
                }
                checks.push(Check::within("ols_slope", slope_of(EstimatorId::Ols), 1.8, 2.2));
            }
            if has(EstimatorId::FixedRidge) {
                checks.push(Check::within("fixed_ridge_slope", slope_of(EstimatorId::FixedRidge), 1.8, 2.2));
            }
            if has(EstimatorId::TransferRidge) {
                let t = terminal_mean(&summary, EstimatorId::TransferRidge.as_str());
                checks.push(Check::at_most("transfer_ridge_plateau_rel_gap", relative_gap(t, q), 0.15));
            }
        }
        ExperimentName::Floor => {
            let ridge = terminal_mean(&summary, EstimatorId::TransferRidge.as_str());
            let lasso = terminal_mean(&summary, EstimatorId::TransferLasso.as_str());
            if has(EstimatorId::TransferRidge) && has(EstimatorId::TransferLasso) {
                checks.push(Check::at_most("terminal_ridge_lasso_gap", (ridge - lasso).abs() / q, 0.10));
            }
            for id in [EstimatorId::TransferRidge, EstimatorId::TransferLasso, EstimatorId::TransferEnet] {
                if !has(id) {
                    continue;
                }
                let t = terminal_mean(&summary, id.as_str());
                checks.push(Check::at_most(&format!("{}_terminal_rel_gap", id.as_str()), relative_gap(t, q), 0.15));
                if let Some(m) = zero_row(id) {
                    checks.push(Check::at_most(&format!("{}_noiseless_below_floor", id.as_str()), m / q, 1.0));
                }
            }
        }
        ExperimentName::Trichotomy => {
            for id in [EstimatorId::Ols, EstimatorId::FixedRidge] {
                if has(id) {
                    let name = id.as_str().replace('-', "_");
                    checks.push(Check::within(&format!("{name}_slope"), slope_of(id), 1.8, 2.2));
                    checks.push(Check::at_least(&format!("{name}_top_decade_slope"), top_slope_of(id), 1.5));
                }
            }
            if has(EstimatorId::Huber) {
                checks.push(Check::within("huber_top_decade_slope", top_slope_of(EstimatorId::Huber), -0.1, 0.1));
                let finite = records
                    .iter()
                    .filter(|r| r.estimator == EstimatorId::Huber.as_str())
                    .all(|r| r.risk.is_finite());
                checks.push(Check::at_least("huber_finite", if finite { 1.0 } else { 0.0 }, 1.0));
                if cfg.experiment.paper_scale {
                    let plateau = terminal_mean(&summary, EstimatorId::Huber.as_str());
                    checks.push(Check::within("huber_plateau", plateau, 0.14, 0.24));
                    checks.push(Check::within("huber_plateau_over_floor", plateau / q, 149.0, 209.0));
                }
            }
            if has(EstimatorId::TransferRidge) {
                let t = terminal_mean(&summary, EstimatorId::TransferRidge.as_str());
                checks.push(Check::at_most("transfer_ridge_terminal_rel_gap", relative_gap(t, q), 0.15));
            }
        }
        _ => unreachable!("scale experiments only"),
    }

    Ok(ExperimentOutcome {
        config: cfg.clone(),
        records,
        summary,
        estimators,
        q_sigma: Some(q),
        theory: Vec::new(),
        bands: Vec::new(),
        checks,
    })
}

fn run_transient(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutcome> {
    let (inst, plan, law, winsor) = sweep_setup(cfg)?;
    let sweep = Sweep {
        cfg,
        inst: &inst,
        plan: &plan,
        law,
        winsor,
        mode: SweepMode::EffectiveVariance,
    };
    let design = cfg.experiment.design;
    let records = parallel_reps(cfg.experiment.replications, workers, |rep| {
        sweep.replication(rep, design, Purpose::Design, "")
    })?;
    let summary = summarize(&records);
    let ids: Vec<(String, NoiseVariant)> = plan.iter().map(|(e, v)| (e.id.clone(), *v)).collect();
    let estimators = estimator_summaries(cfg.name(), &summary, &ids);

    let mut checks = vec![convergence_check(&records)];
    let mut theory = Vec::new();
    if cfg.estimators.include.contains(&EstimatorId::TransferRidge) {
        for row in summary.iter().filter(|r| r.estimator == EstimatorId::TransferRidge.as_str()) {
            let inputs = TheoryInputs::new(
                inst.spectrum.clone(),
                cfg.experiment.n,
                row.sweep_value,
                cfg.estimators.lambda_tilde,
                RegularizerSpec::Ridge,
            )?;
            let pred = ridge_risk_closed_form(&inputs)?;
            theory.push(TheoryPoint {
                sigma2: row.sweep_value,
                predicted: pred.risk,
                bias_term: pred.bias_term.unwrap_or(f64::NAN),
                variance_term: pred.variance_term.unwrap_or(f64::NAN),
                mc_mean: row.mean,
                mc_se: row.se,
                rel_error: relative_gap(row.mean, pred.risk),
            });
        }
        let mut errs: Vec<f64> = theory.iter().map(|t| t.rel_error).collect();
        errs.sort_by(f64::total_cmp);
        let median = if errs.is_empty() { f64::NAN } else { records::quantile_sorted(&errs, 0.5) };
        let bound = if cfg.experiment.paper_scale { 0.005 } else { 0.03 };
        checks.push(Check::at_most("median_relative_error", median, bound));
    }

    Ok(ExperimentOutcome {
        config: cfg.clone(),
        records,
        summary,
        estimators,
        q_sigma: Some(inst.q_sigma()),
        theory,
        bands: Vec::new(),
        checks,
    })
}

fn run_universality(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutcome> {
    let (inst, plan, law, winsor) = sweep_setup(cfg)?;
    let sweep = Sweep {
        cfg,
        inst: &inst,
        plan: &plan,
        law,
        winsor,
        mode: SweepMode::Scale,
    };
    let records = parallel_reps(cfg.experiment.replications, workers, |rep| {
        let mut out = sweep.replication(rep, DesignKind::Gaussian, Purpose::Design, "-gaussian")?;
        out.extend(sweep.replication(rep, DesignKind::Rademacher, Purpose::Auxiliary, "-rademacher")?);
        Ok(out)
    })?;
    let summary = summarize(&records);
    let mut ids = Vec::new();
    for (est, v) in &plan {
        ids.push((format!("{}-gaussian", est.id), *v));
        ids.push((format!("{}-rademacher", est.id), *v));
    }
    let estimators = estimator_summaries(cfg.name(), &summary, &ids);

    let mut checks = vec![convergence_check(&records)];
    for (est, _) in &plan {
        let g = format!("{}-gaussian", est.id);
        let r = format!("{}-rademacher", est.id);
        let mut worst = 0.0_f64;
        for &value in &cfg.experiment.sweep {
            let cell = |id: &str| summary.iter().find(|s| s.estimator == id && s.sweep_value == value);
            let (Some(a), Some(b)) = (cell(&g), cell(&r)) else {
                continue;
            };
            let pooled = (a.se * a.se + b.se * b.se).sqrt();
            let diff = (a.mean - b.mean).abs();
            let z = if pooled > 0.0 {
                diff / pooled
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
        checks.push(Check::at_most(&format!("{}_max_design_gap_in_se", est.id), worst, 2.0));
    }

    Ok(ExperimentOutcome {
        config: cfg.clone(),
        records,
        summary,
        estimators,
        q_sigma: Some(inst.q_sigma()),
        theory: Vec::new(),
        bands: Vec::new(),
        checks,
    })
}

/// `n⁻¹ ‖w^{(τ_n)}‖² / σ²_exact` for one sample of size `n`.
pub fn winsorized_energy_ratio<R: rand::Rng + ?Sized>(law: &TailLaw, n: usize, rng: &mut R) -> Result<f64> {
    let plan = WinsorPlan::new(law, n)?;
    if plan.sigma2 == 0.0 {
        return Err(Error::DegenerateNoise("winsorized noise has zero variance; the ratio is undefined".into()));
    }
    let mut w = sample_noise(law, n, rng);
    winsorize_all(&mut w, plan.tau)?;
    let energy = w.iter().map(|x| x * x).sum::<f64>() / n as f64;
    Ok(energy / plan.sigma2)
}

const CONCENTRATION_ID: &str = "winsorized-energy-ratio";

fn run_concentration(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutcome> {
    let law = cfg.noise_law()?;
    let e = &cfg.experiment;
    let reps = e.replications as u64;
    let grid = e.n_grid.clone();
    let records = parallel_reps(e.replications, workers, |rep| {
        grid.iter()
            .enumerate()
            .map(|(i, &n)| {
                let mut rng = stream(e.master_seed, i as u64 * reps + rep, Purpose::Concentration);
                let ratio = winsorized_energy_ratio(&law, n, &mut rng)?;
                Ok(RiskRecord {
                    experiment: e.name.to_string(),
                    estimator: CONCENTRATION_ID.into(),
                    sweep_value: n as f64,
                    replication: rep,
                    risk: ratio,
                    converged: true,
                    wall_ms: 0.0,
                })
            })
            .collect()
    })?;
    let summary = summarize(&records);
    let mut bands = Vec::new();
    for &n in &grid {
        let ratios: Vec<f64> = records
            .iter()
            .filter(|r| r.sweep_value == n as f64)
            .map(|r| r.risk)
            .collect();
        let inside = ratios.iter().filter(|r| (0.9..=1.1).contains(*r)).count();
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        bands.push(BandRow {
            n,
            sigma2_exact: WinsorPlan::new(&law, n)?.sigma2,
            in_band: inside as f64 / ratios.len() as f64,
            median_ratio: records::quantile_sorted(&sorted, 0.5),
        });
    }
    let last = bands.last().map_or(f64::NAN, |b| b.in_band);
    let mut checks = vec![Check::at_least("in_band_fraction_at_largest_n", last, 0.95)];
    let drops = bands.windows(2).filter(|w| w[1].in_band < w[0].in_band).count();
    checks.push(Check::at_most("in_band_fraction_decreases", drops as f64, 0.0));
    let estimators = estimator_summaries(cfg.name(), &summary, &[(CONCENTRATION_ID.to_string(), NoiseVariant::Winsorized)]);

    Ok(ExperimentOutcome {
        config: cfg.clone(),
        records,
        summary,
        estimators,
        q_sigma: None,
        theory: Vec::new(),
        bands,
        checks,
    })
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    experiment: &'a str,
    tag: &'a str,
    master_seed: u64,
    passed: bool,
    nonconverged: usize,
    records: usize,
    q_sigma: Option<f64>,
    checks: &'a [Check],
    estimators: &'a [EstimatorSummary],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    theory: &'a [TheoryPoint],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    bands: &'a [BandRow],
}

pub fn summary_json(outcome: &ExperimentOutcome, tag: &str) -> Result<String> {
    let doc = SummaryDocument {
        experiment: outcome.config.name().as_str(),
        tag,
        master_seed: outcome.config.experiment.master_seed,
        passed: outcome.passed(),
        nonconverged: outcome.nonconverged(),
        records: outcome.records.len(),
        q_sigma: outcome.q_sigma,
        checks: &outcome.checks,
        estimators: &outcome.estimators,
        theory: &outcome.theory,
        bands: &outcome.bands,
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn theory_csv(points: &[TheoryPoint]) -> String {
    let mut out = String::from("sigma2,predicted,bias_term,variance_term,mc_mean,mc_se,rel_error\n");
    for t in points {
        out.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
            t.sigma2, t.predicted, t.bias_term, t.variance_term, t.mc_mean, t.mc_se, t.rel_error
        ));
    }
    out
}

/// Default file tag.
pub fn default_tag(cfg: &ExperimentConfig) -> String {
    format!("seed{}", cfg.experiment.master_seed)
}

/// Writes `<name>_<tag>.csv`, `.json`, `.toml` (the resolved config) and,
/// for the transient experiment, `<name>_<tag>_theory.csv`.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path, tag: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stem = format!("{}_{}", outcome.config.name(), tag);
    let mut files = vec![
        (dir.join(format!("{stem}.csv")), records::to_csv(&outcome.records)),
        (dir.join(format!("{stem}.json")), summary_json(outcome, tag)?),
        (dir.join(format!("{stem}.toml")), outcome.config.to_toml()?),
    ];
    if !outcome.theory.is_empty() {
        files.push((dir.join(format!("{stem}_theory.csv")), theory_csv(&outcome.theory)));
    }
    let mut written = Vec::new();
    for (path, body) in files {
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
