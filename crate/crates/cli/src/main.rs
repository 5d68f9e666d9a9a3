//! `htrisk`: tail calculators, loss classification, risk theory and the
//! named Monte Carlo experiments.
//!
//! Exit codes: 0 success, 1 acceptance or convergence failure, 2 usage or
//! configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use htrisk::convex::{classify_conjugate, conjugate_growth, required_alpha, LossSpec, RegularizerSpec};
use htrisk::experiments::{self, ExperimentConfig, ExperimentName};
use htrisk::spectrum::q_sigma;
use htrisk::tails::{effective_variance_asymptotic, effective_variance_exact, fisher_information, TailFamily, TailLaw, WinsorPlan};
use htrisk::theory::{ridge_risk_closed_form, solve_general_fixed_point, RiskPrediction, TheoryInputs};
use htrisk::Error;

const OUT_ENV: &str = "HTRISK_OUT";
const VERIFY_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "htrisk", version, about = "Risk of high-dimensional M-estimators under infinite-variance noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tail-law calculators.
    Tails {
        #[command(subcommand)]
        command: TailsCommand,
    },
    /// Conjugate-domain class of a loss and the tail index it needs.
    Classify(ClassifyArgs),
    /// Deterministic risk predictions.
    Theory {
        #[command(subcommand)]
        command: TheoryCommand,
    },
    /// Run a named experiment and write CSV, JSON and the resolved config.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum TailsCommand {
    /// Threshold, effective variance and Fisher information for sample size n.
    EffectiveVariance(EffectiveVarianceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Pareto,
    StudentT,
    AlphaStable,
}

impl From<FamilyArg> for TailFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Pareto => TailFamily::SymmetricPareto,
            FamilyArg::StudentT => TailFamily::StudentT,
            FamilyArg::AlphaStable => TailFamily::AlphaStable,
        }
    }
}

#[derive(Args)]
struct EffectiveVarianceArgs {
    #[arg(long)]
    alpha: f64,
    /// Tail constant of the noise; the law is rescaled to match it.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    n: usize,
    /// Also report the exact truncated second moment.
    #[arg(long)]
    exact: bool,
    #[arg(long, value_enum, default_value = "pareto")]
    family: FamilyArg,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Squared,
    Huber,
    Absolute,
    Quantile,
    Logcosh,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(value_enum)]
    loss: LossArg,
    /// Huber threshold.
    #[arg(long, default_value_t = 1.345)]
    k: f64,
    /// Quantile level.
    #[arg(long, default_value_t = 0.5)]
    tau_q: f64,
    /// Tail index of the noise.
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Closed-form ridge risk.
    RidgeRisk(TheoryArgs),
    /// General proximal fixed point for any separable regularizer.
    FixedPoint(TheoryArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CovArg {
    Identity,
    Ar1,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegArg {
    Ridge,
    Lasso,
    Enet,
}

#[derive(Args)]
struct TheoryArgs {
    /// Experiment config supplying n, p, covariance, seed and offset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Aspect ratio; defaults to p/n.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    cov: Option<CovArg>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    lambda_tilde: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, value_enum, default_value = "ridge")]
    reg: RegArg,
    /// Elastic-net l1 share.
    #[arg(long, default_value_t = 0.5)]
    mix: f64,
    /// Comma-separated effective variances; prints a CSV curve.
    #[arg(long, value_delimiter = ',')]
    sigma_grid: Option<Vec<f64>>,
    /// Cross-check the fixed point against the ridge closed form.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta_norm: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_parser = parse_experiment)]
    name: ExperimentName,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to $HTRISK_OUT, then ./results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// n = 2000, p = 1000, 500 replications. Takes hours.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// File tag; defaults to seed<master_seed>.
    #[arg(long)]
    tag: Option<String>,
    #[arg(long)]
    json: bool,
}

fn parse_experiment(s: &str) -> Result<ExperimentName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::DimensionMismatch { .. } | Error::Config(_) | Error::DegenerateNoise(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Check(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn print_json(value: &impl Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Check(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_effective_variance(a: &EffectiveVarianceArgs) -> CmdResult {
    let unit = TailLaw::new(a.family.into(), a.alpha)?;
    let scale = match a.c {
        Some(c) if !(c > 0.0 && c.is_finite()) => {
            return Err(Failure::Usage(format!("tail constant must be finite and > 0, got {c}")))
        }
        Some(c) => (c / unit.c()).powf(1.0 / a.alpha),
        None => 1.0,
    };
    let law = unit.with_scale(scale)?;
    let plan = WinsorPlan::new(&law, a.n)?;
    let asymptotic = effective_variance_asymptotic(&law, a.n)?;
    let fisher = fisher_information(&law, a.n)?;
    let exact = if a.exact { Some(effective_variance_exact(&law, plan.tau)?) } else { None };
    if a.json {
        return print_json(&json!({
            "family": law.family().name(),
            "alpha": a.alpha,
            "c": law.c() * scale.powf(a.alpha),
            "n": a.n,
            "tau": plan.tau,
            "sigma2_asymptotic": asymptotic,
            "sigma2_exact": exact,
            "fisher": fisher,
        }));
    }
    println!("tau = {}", plan.tau);
    println!("sigma2_asymptotic = {asymptotic}");
    if let Some(e) = exact {
        println!("sigma2_exact = {e}");
    }
    println!("fisher = {fisher}");
    Ok(())
}

fn cmd_classify(a: &ClassifyArgs) -> CmdResult {
    if !(a.alpha > 1.0 && a.alpha < 2.0) {
        return Err(Failure::Usage(format!(
            "tail index must lie strictly inside (1, 2), got {}",
            a.alpha
        )));
    }
    let loss = match a.loss {
        LossArg::Squared => LossSpec::Squared,
        LossArg::Huber => LossSpec::huber(a.k)?,
        LossArg::Absolute => LossSpec::Absolute,
        LossArg::Quantile => LossSpec::quantile(a.tau_q)?,
        LossArg::Logcosh => LossSpec::LogCosh,
    };
    let class = classify_conjugate(&loss);
    let need = required_alpha(conjugate_growth(&class))?;
    let verdict = if class.bounded && need.is_met_by(a.alpha) {
        "bounded-risk"
    } else {
        "diverges-without-transfer"
    };
    let out = json!({
        "loss": loss.name(),
        "bounded": class.bounded,
        "K": class.k,
        "domain": class.domain,
        "q_growth": class.q_growth,
        "required_alpha": need.alpha,
        "required_alpha_strict": need.strict,
        "alpha": a.alpha,
        "verdict": verdict,
    });
    if a.json {
        return print_json(&out);
    }
    println!("loss = {}", loss.name());
    println!("bounded = {}", class.bounded);
    match (class.k, class.q_growth) {
        (Some(k), _) => println!("K = {k}"),
        (None, Some(q)) => println!("q_growth = {q}"),
        _ => {}
    }
    let op = if need.strict { ">" } else { ">=" };
    println!("required_alpha = {} (alpha {op} {})", need.alpha, need.alpha);
    println!("verdict = {verdict}");
    Ok(())
}

fn read_config(path: &Path, name: Option<ExperimentName>, paper_scale: bool) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let name = match name {
        Some(n) => n,
        None => {
            let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Failure::Usage(e.to_string()))?;
            match table.get("experiment").and_then(|e| e.get("name")).and_then(|n| n.as_str()) {
                Some(n) => n.parse()?,
                None => ExperimentName::Transient,
            }
        }
    };
    Ok(ExperimentConfig::from_toml_over_defaults(name, paper_scale, &text)?)
}

fn theory_inputs(a: &TheoryArgs) -> Result<TheoryInputs, Failure> {
    let mut cfg = match &a.config {
        Some(path) => read_config(path, None, false)?,
        None => ExperimentConfig::desk(ExperimentName::Transient),
    };
    let e = &mut cfg.experiment;
    if let Some(n) = a.n {
        e.n = n;
    }
    if let Some(p) = a.p {
        e.p = p;
    }
    if let Some(seed) = a.seed {
        e.master_seed = seed;
    }
    if let Some(cov) = a.cov {
        cfg.covariance.kind = match cov {
            CovArg::Identity => experiments::config::CovarianceKindName::Identity,
            CovArg::Ar1 => experiments::config::CovarianceKindName::Ar1,
        };
    }
    if let Some(rho) = a.rho {
        cfg.covariance.rho = rho;
    }
    if let Some(d) = a.delta_norm {
        cfg.signal.delta_norm = d;
    }
    if let Some(lt) = a.lambda_tilde {
        cfg.estimators.lambda_tilde = lt;
    }
    let reg = match a.reg {
        RegArg::Ridge => RegularizerSpec::Ridge,
        RegArg::Lasso => RegularizerSpec::Lasso,
        RegArg::Enet => RegularizerSpec::elastic_net(a.mix)?,
    };
    if cfg.experiment.n == 0 || cfg.experiment.p == 0 {
        return Err(Failure::Usage("n and p must be >= 1".into()));
    }
    let spectrum = experiments::frozen_spectrum(&cfg)?;
    let mut inputs = TheoryInputs::new(spectrum, cfg.experiment.n, a.sigma2, cfg.estimators.lambda_tilde, reg)?;
    if let Some(g) = a.gamma {
        inputs = inputs.with_gamma(g)?;
    }
    Ok(inputs)
}

#[derive(Serialize)]
struct TheoryRow {
    sigma2: f64,
    risk: f64,
    tau: f64,
    v: f64,
    bias_term: Option<f64>,
    variance_term: Option<f64>,
    iterations: usize,
}

impl TheoryRow {
    fn new(sigma2: f64, p: &RiskPrediction) -> Self {
        Self {
            sigma2,
            risk: p.risk,
            tau: p.tau,
            v: p.v,
            bias_term: p.bias_term,
            variance_term: p.variance_term,
            iterations: p.iterations,
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn cmd_theory(general: bool, a: &TheoryArgs) -> CmdResult {
    let base = theory_inputs(a)?;
    let grid = a.sigma_grid.clone().unwrap_or_else(|| vec![a.sigma2]);
    if grid.is_empty() {
        return Err(Failure::Usage("--sigma-grid needs at least one value".into()));
    }
    let mut rows = Vec::new();
    let mut worst_gap: f64 = 0.0;
    for &s2 in &grid {
        let inputs = base.clone().with_sigma2(s2)?;
        let pred = if general {
            solve_general_fixed_point(&inputs)?
        } else {
            ridge_risk_closed_form(&inputs)?
        };
        if a.verify {
            let ridge = TheoryInputs { reg: RegularizerSpec::Ridge, ..inputs.clone() };
            let closed = ridge_risk_closed_form(&ridge)?;
            let fixed = solve_general_fixed_point(&ridge)?;
            let gap = (fixed.risk - closed.risk).abs() / closed.risk.max(f64::MIN_POSITIVE);
            worst_gap = worst_gap.max(gap);
        }
        rows.push(TheoryRow::new(s2, &pred));
    }
    let q = q_sigma(&base.spectrum);
    let floor_tau = (1.0 + base.gamma * q).sqrt();

    if a.json {
        let mut out = json!({
            "solver": if general { "fixed-point" } else { "ridge-risk" },
            "reg": base.reg.name(),
            "n": base.n,
            "p": base.spectrum.p(),
            "gamma": base.gamma,
            "lambda_tilde": base.lambda_tilde,
            "q_sigma": q,
            "floor_tau": floor_tau,
        });
        if a.sigma_grid.is_some() {
            out["curve"] = serde_json::to_value(&rows).map_err(|e| Failure::Check(e.to_string()))?;
        } else {
            let r = &rows[0];
            for (k, v) in serde_json::to_value(r).map_err(|e| Failure::Check(e.to_string()))?.as_object().into_iter().flatten() {
                out[k] = v.clone();
            }
        }
        if a.verify {
            out["verify_max_rel_gap"] = json!(worst_gap);
        }
        print_json(&out)?;
    } else if a.sigma_grid.is_some() {
        println!("sigma2,risk,tau,v,bias_term,variance_term");
        for r in &rows {
            println!(
                "{:?},{:?},{:?},{:?},{},{}",
                r.sigma2,
                r.risk,
                r.tau,
                r.v,
                opt(r.bias_term),
                opt(r.variance_term)
            );
        }
    } else {
        let r = &rows[0];
        println!("reg = {}", base.reg.name());
        println!("gamma = {}", base.gamma);
        println!("sigma2 = {}", r.sigma2);
        println!("risk = {}", r.risk);
        println!("tau = {}", r.tau);
        println!("v = {}", r.v);
        if let (Some(b), Some(v)) = (r.bias_term, r.variance_term) {
            println!("bias_term = {b}");
            println!("variance_term = {v}");
        }
        println!("q_sigma = {q}");
        println!("floor_tau = {floor_tau}");
    }
    if a.verify {
        if !a.json {
            eprintln!("verify: max relative gap {worst_gap:e} (tolerance {VERIFY_TOL:e})");
        }
        if !(worst_gap <= VERIFY_TOL) {
            return Err(Failure::Check(format!(
                "fixed point deviates from the ridge closed form by {worst_gap:e}"
            )));
        }
    }
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(path) => read_config(path, Some(a.name), a.paper_scale)?,
        None => ExperimentConfig::defaults(a.name, a.paper_scale),
    };
    if let Some(seed) = a.seed {
        cfg.experiment.master_seed = seed;
    }
    cfg.validate()?;
    let out_dir = a
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let tag = a.tag.clone().unwrap_or_else(|| experiments::default_tag(&cfg));
    if tag.is_empty() || tag.contains(['/', '\\']) {
        return Err(Failure::Usage(format!("invalid tag `{tag}`")));
    }
    let outcome = experiments::run(&cfg, a.workers)?;
    let files = experiments::write_outputs(&outcome, &out_dir, &tag).map_err(|e| Failure::Check(e.to_string()))?;
    if a.json {
        let text = experiments::summary_json(&outcome, &tag)?;
        print!("{text}");
    } else {
        for c in &outcome.checks {
            println!(
                "{} {} = {:?} ({})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.bound
            );
        }
        for f in &files {
            println!("wrote {}", f.display());
        }
    }
    if outcome.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Check(format!(
            "{} failed: {} ({} of {} fits did not converge)",
            cfg.name(),
            failed.join(", "),
            outcome.nonconverged(),
            outcome.records.len()
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Tails { command: TailsCommand::EffectiveVariance(a) } => cmd_effective_variance(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Theory { command } => match command {
            TheoryCommand::RidgeRisk(a) => cmd_theory(false, a),
            TheoryCommand::FixedPoint(a) => cmd_theory(true, a),
        },
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
