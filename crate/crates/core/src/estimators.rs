//! Finite-sample M-estimators
//! `argmin_β n⁻¹ Σ L(y_i − x_iᵀβ) + λ_n R(β − β₀)`.
//!
//! Squared loss without a penalty is OLS (QR); squared loss with ridge is
//! solved in closed form (Cholesky); everything else goes through
//! accelerated proximal gradient with backtracking and monotone restarts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::convex::{LossSpec, RegularizerSpec};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "kebab-case")]
pub enum LambdaMode {
    /// `λ_n = λ`.
    Fixed(f64),
    /// `λ_n = λ̃ σ_n²`, with `σ_n²` from the oracle tail parameters.
    NoiseAdapted(f64),
}

impl LambdaMode {
    /// Resolves `λ_n`. `NoiseAdapted` needs the effective variance.
    pub fn resolve(&self, sigma2: Option<f64>) -> Result<f64> {
        match *self {
            LambdaMode::Fixed(l) => Ok(l),
            LambdaMode::NoiseAdapted(lt) => sigma2.map(|s2| lt * s2).ok_or_else(|| {
                invalid("lambda_mode", "noise-adapted strength needs a tail-law context for σ_n²")
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Center {
    Origin,
    /// Transfer: penalize distance to the external prior `β₀`.
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rel_objective_tol: f64,
    pub grad_map_tol: f64,
    pub max_iter: usize,
    /// Keep the objective value of every accepted iterate.
    #[serde(default)]
    pub record_history: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_objective_tol: 1e-10,
            grad_map_tol: 1e-8,
            max_iter: 10_000,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub id: String,
    pub loss: LossSpec,
    pub reg: Option<RegularizerSpec>,
    pub lambda: LambdaMode,
    pub center: Center,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl EstimatorConfig {
    pub fn ols(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            loss: LossSpec::Squared,
            reg: None,
            lambda: LambdaMode::Fixed(0.0),
            center: Center::Origin,
            solver: SolverOptions::default(),
        }
    }

    pub fn fixed_ridge(id: impl Into<String>, lambda: f64) -> Self {
        Self {
            reg: Some(RegularizerSpec::Ridge),
            lambda: LambdaMode::Fixed(lambda),
            ..Self::ols(id)
        }
    }

    pub fn transfer(id: impl Into<String>, reg: RegularizerSpec, lambda_tilde: f64) -> Self {
        Self {
            reg: Some(reg),
            lambda: LambdaMode::NoiseAdapted(lambda_tilde),
            center: Center::Prior,
            ..Self::ols(id)
        }
    }

    pub fn huber(id: impl Into<String>, k: f64, lambda: f64) -> Result<Self> {
        Ok(Self {
            loss: LossSpec::huber(k)?,
            reg: Some(RegularizerSpec::Ridge),
            lambda: LambdaMode::Fixed(lambda),
            ..Self::ols(id)
        })
    }

    pub fn is_ols(&self) -> bool {
        self.reg.is_none() && self.loss == LossSpec::Squared
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if !self.loss.is_smooth() {
            return Err(invalid(
                "loss",
                format!("{} loss cannot be fitted by gradient steps", self.loss.name()),
            ));
        }
        match self.lambda {
            LambdaMode::Fixed(l) if !(l >= 0.0 && l.is_finite()) => {
                return Err(invalid("lambda", format!("must be finite and >= 0, got {l}")))
            }
            LambdaMode::NoiseAdapted(l) if !(l > 0.0 && l.is_finite()) => {
                return Err(invalid("lambda_tilde", format!("must be finite and > 0, got {l}")))
            }
            _ => {}
        }
        if self.is_ols() && n <= p {
            return Err(invalid("n", format!("OLS needs n > p (n = {n}, p = {p})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Final gradient-mapping norm (zero for closed-form solvers).
    pub grad_map_norm: f64,
    /// Objective after every accepted step, when requested.
    pub history: Vec<f64>,
}

fn check_xy(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "response length vs design rows",
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    Ok(())
}

fn check_center(x: &DMatrix<f64>, center: &DVector<f64>) -> Result<()> {
    if center.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "center length vs design columns",
            expected: x.ncols(),
            actual: center.len(),
        });
    }
    Ok(())
}

fn squared_objective(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let r = y - x * beta;
    0.5 * r.norm_squared() / y.len() as f64
}

/// A QR factorization of the design, reusable across responses.
pub struct OlsFactor {
    x: DMatrix<f64>,
    qr: nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Largest acceptable `max|r_ii| / min|r_ii|`.
const MAX_CONDITION: f64 = 1e12;

impl OlsFactor {
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n <= p {
            return Err(invalid("n", format!("OLS needs n > p (n = {n}, p = {p})")));
        }
        let qr = x.clone().qr();
        let diag = qr.r().diagonal().map(f64::abs);
        let condition = diag.max() / diag.min();
        if !(condition <= MAX_CONDITION) {
            return Err(Error::RankDeficient { condition });
        }
        Ok(Self { x: x.clone(), qr })
    }

    pub fn solve(&self, y: &DVector<f64>) -> Result<FitResult> {
        check_xy(&self.x, y)?;
        let p = self.x.ncols();
        let mut qty = y.clone();
        self.qr.q_tr_mul(&mut qty);
        let rhs = qty.rows(0, p).into_owned();
        let r = self.qr.r();
        let beta = r
            .solve_upper_triangular(&rhs)
            .ok_or(Error::RankDeficient { condition: f64::INFINITY })?;
        let objective = squared_objective(&self.x, y, &beta);
        Ok(FitResult {
            beta_hat: beta,
            iterations: 1,
            converged: true,
            objective,
            grad_map_norm: 0.0,
            history: Vec::new(),
        })
    }
}

/// Least squares by Householder QR.
pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    check_xy(x, y)?;
    OlsFactor::new(x)?.solve(y)
}

/// Cached `XᵀX/n` for repeated ridge solves on one design.
pub struct RidgeSystem<'a> {
    x: &'a DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl<'a> RidgeSystem<'a> {
    pub fn new(x: &'a DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let gram = x.transpose() * x / n;
        Self { x, gram }
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Solves `(XᵀX/n + λ I)(β − β₀) = Xᵀ(y − Xβ₀)/n`.
    pub fn solve(&self, y: &DVector<f64>, lambda: f64, center: &DVector<f64>) -> Result<FitResult> {
        check_xy(self.x, y)?;
        check_center(self.x, center)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("ridge strength must be finite and > 0, got {lambda}")));
        }
        let n = y.len() as f64;
        let resid = y - self.x * center;
        let rhs = self.x.tr_mul(&resid) / n;
        let mut a = self.gram.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += lambda;
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| invalid("lambda", "ridge system lost positive definiteness"))?;
        let delta = chol.solve(&rhs);
        let beta = center + &delta;
        let objective = squared_objective(self.x, y, &beta) + 0.5 * lambda * delta.norm_squared();
        Ok(FitResult {
            beta_hat: beta,
            iterations: 1,
            converged: true,
            objective,
            grad_map_norm: 0.0,
            history: Vec::new(),
        })
    }

    /// Relative stationarity residual `‖(G + λI)(β − β₀) − rhs‖ / ‖rhs‖`.
    pub fn stationarity_residual(&self, y: &DVector<f64>, lambda: f64, center: &DVector<f64>, beta: &DVector<f64>) -> f64 {
        let n = y.len() as f64;
        let rhs = self.x.tr_mul(&(y - self.x * center)) / n;
        let delta = beta - center;
        let lhs = &self.gram * &delta + &delta * lambda;
        (lhs - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE)
    }
}

/// Closed-form ridge toward `center`.
pub fn fit_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda_n: f64, center: &DVector<f64>) -> Result<FitResult> {
    RidgeSystem::new(x).solve(y, lambda_n, center)
}

/// `‖X‖²_op / n` by power iteration on `XᵀX/n` to relative tolerance `1e-6`.
pub fn lipschitz_estimate(x: &DMatrix<f64>) -> f64 {
    let (n, p) = x.shape();
    let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..1000 {
        let w = x.tr_mul(&(x * &v)) / n as f64;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (norm - est).abs() <= 1e-6 * norm {
            est = norm;
            break;
        }
        est = norm;
    }
    // power iteration approaches from below
    est * (1.0 + 1e-6)
}

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    loss: LossSpec,
    reg: Option<RegularizerSpec>,
    lambda: f64,
    center: &'a DVector<f64>,
}

impl Problem<'_> {
    fn n(&self) -> f64 {
        self.y.len() as f64
    }

    /// Smooth part from a precomputed `Xβ`.
    fn smooth_from_fit(&self, xb: &DVector<f64>) -> f64 {
        self.y
            .iter()
            .zip(xb.iter())
            .map(|(yi, fi)| self.loss.value(yi - fi))
            .sum::<f64>()
            / self.n()
    }

    /// Smooth part at fit `to` minus smooth part at fit `from`, summed term
    /// by term so that tiny decreases are not lost against a large objective.
    fn smooth_change(&self, from: &DVector<f64>, to: &DVector<f64>) -> f64 {
        self.y
            .iter()
            .zip(from.iter().zip(to.iter()))
            .map(|(yi, (a, b))| self.loss.value_change(yi - a, a - b))
            .sum::<f64>()
            / self.n()
    }

    fn penalty_change(&self, from: &DVector<f64>, to: &DVector<f64>) -> f64 {
        match self.reg {
            Some(reg) if self.lambda > 0.0 => {
                let a = from - self.center;
                let b = to - self.center;
                self.lambda * reg.value_change(a.as_slice(), b.as_slice())
            }
            _ => 0.0,
        }
    }

    fn grad_from_fit(&self, xb: &DVector<f64>) -> DVector<f64> {
        let psi = DVector::from_iterator(
            self.y.len(),
            self.y.iter().zip(xb.iter()).map(|(yi, fi)| self.loss.derivative(yi - fi)),
        );
        self.x.tr_mul(&psi) * (-1.0 / self.n())
    }

    fn penalty(&self, beta: &DVector<f64>) -> f64 {
        match self.reg {
            Some(reg) if self.lambda > 0.0 => {
                let d: Vec<f64> = beta.iter().zip(self.center.iter()).map(|(b, c)| b - c).collect();
                self.lambda * reg.value(&d)
            }
            _ => 0.0,
        }
    }

    fn prox_step(&self, point: &DVector<f64>, grad: &DVector<f64>, step: f64) -> DVector<f64> {
        let mut z = point - grad * step;
        if let Some(reg) = self.reg {
            if self.lambda > 0.0 {
                reg.prox_centered_in_place(step * self.lambda, z.as_mut_slice(), self.center.as_slice());
            }
        }
        z
    }

    /// `‖L (β − prox(β − ∇f(β)/L))‖`.
    fn grad_map_norm(&self, beta: &DVector<f64>, lip: f64) -> f64 {
        let xb = self.x * beta;
        let g = self.grad_from_fit(&xb);
        let z = self.prox_step(beta, &g, 1.0 / lip);
        (beta - z).norm() * lip
    }
}

/// Accelerated proximal gradient on
/// `n⁻¹ Σ L(y_i − x_iᵀβ) + λ_n R(β − center)`.
///
/// Starts from `init` (or `center`). The objective of the accepted iterates
/// never increases: a step that would increase it is rejected and momentum
/// restarts from the last accepted point. Returns a non-converged result
/// (never an error) when the iteration budget runs out.
pub fn fit_proximal(
    config: &EstimatorConfig,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda_n: f64,
    center: &DVector<f64>,
    init: Option<&DVector<f64>>,
) -> Result<FitResult> {
    check_xy(x, y)?;
    check_center(x, center)?;
    if !config.loss.is_smooth() {
        return Err(invalid(
            "loss",
            format!("{} loss cannot be fitted by gradient steps", config.loss.name()),
        ));
    }
    if !(lambda_n >= 0.0 && lambda_n.is_finite()) {
        return Err(invalid("lambda_n", format!("must be finite and >= 0, got {lambda_n}")));
    }
    let opts = config.solver;
    let problem = Problem {
        x,
        y,
        loss: config.loss,
        reg: config.reg,
        lambda: lambda_n,
        center,
    };
    let mut lip = (lipschitz_estimate(x) * config.loss.curvature_bound()).max(1e-12);

    let mut xk = init.cloned().unwrap_or_else(|| center.clone());
    if xk.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "initial point",
            expected: x.ncols(),
            actual: xk.len(),
        });
    }
    let mut fit_x = x * &xk;
    let mut obj_x = problem.smooth_from_fit(&fit_x) + problem.penalty(&xk);
    let mut yk = xk.clone();
    let mut fit_y = fit_x.clone();
    let mut t = 1.0_f64;
    let mut history = Vec::new();
    if opts.record_history {
        history.push(obj_x);
    }
    let tol = |b: &DVector<f64>| opts.grad_map_tol * (1.0 + b.norm());

    let lip_cap = lip * 1e30;
    let mut restarted = true;
    for iter in 1..=opts.max_iter {
        let g_y = problem.grad_from_fit(&fit_y);
        // backtracking on the quadratic upper model
        let (z, fit_z) = loop {
            let z = problem.prox_step(&yk, &g_y, 1.0 / lip);
            let fit_z = x * &z;
            let d = &z - &yk;
            let linear = g_y.dot(&d);
            let quad = 0.5 * lip * d.norm_squared();
            let rise = problem.smooth_change(&fit_y, &fit_z);
            if rise <= linear + quad + 1e-12 * (linear.abs() + quad) || lip >= lip_cap {
                break (z, fit_z);
            }
            lip *= 2.0;
        };
        let map_y = (&yk - &z).norm() * lip;
        let change = problem.smooth_change(&fit_x, &fit_z) + problem.penalty_change(&xk, &z);

        if !(change <= 0.0) {
            if restarted {
                // even a plain proximal step from the accepted point fails to
                // descend: the iterate sits at the rounding floor
                if map_y <= tol(&xk) {
                    let certificate = problem.grad_map_norm(&xk, lip);
                    if certificate <= tol(&xk) {
                        return Ok(finish(&problem, xk, iter, true, certificate, history));
                    }
                }
                if !change.is_finite() {
                    break;
                }
            }
            t = 1.0;
            yk = xk.clone();
            fit_y = fit_x.clone();
            restarted = true;
            continue;
        }

        let stalled = -change <= opts.rel_objective_tol * obj_x.abs().max(f64::MIN_POSITIVE);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        let x_prev = std::mem::replace(&mut xk, z);
        let fit_prev = std::mem::replace(&mut fit_x, fit_z);
        obj_x += change;
        if opts.record_history {
            history.push(obj_x);
        }
        if map_y <= tol(&xk) || stalled {
            let certificate = problem.grad_map_norm(&xk, lip);
            if certificate <= tol(&xk) {
                return Ok(finish(&problem, xk, iter, true, certificate, history));
            }
        }
        yk = &xk + (&xk - &x_prev) * momentum;
        fit_y = &fit_x + (&fit_x - &fit_prev) * momentum;
        t = t_next;
        restarted = false;
    }
    let certificate = problem.grad_map_norm(&xk, lip);
    let converged = certificate <= tol(&xk);
    Ok(finish(&problem, xk, opts.max_iter, converged, certificate, history))
}

fn finish(
    problem: &Problem<'_>,
    beta_hat: DVector<f64>,
    iterations: usize,
    converged: bool,
    grad_map_norm: f64,
    history: Vec<f64>,
) -> FitResult {
    let objective = problem.smooth_from_fit(&(problem.x * &beta_hat)) + problem.penalty(&beta_hat);
    FitResult {
        beta_hat,
        iterations,
        converged,
        objective,
        grad_map_norm,
        history,
    }
}

/// Dispatches to the solver that fits the configuration.
pub fn fit(
    config: &EstimatorConfig,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda_n: f64,
    prior: &DVector<f64>,
    init: Option<&DVector<f64>>,
) -> Result<FitResult> {
    config.validate(x.nrows(), x.ncols())?;
    let origin;
    let center = match config.center {
        Center::Prior => prior,
        Center::Origin => {
            origin = DVector::zeros(x.ncols());
            &origin
        }
    };
    let squared = config.loss == LossSpec::Squared;
    match config.reg {
        None if squared => fit_ols(x, y),
        Some(RegularizerSpec::Ridge) if squared && lambda_n > 0.0 => fit_ridge(x, y, lambda_n, center),
        // a vanishing penalty on the squared loss is least squares
        Some(_) if squared && lambda_n == 0.0 && x.nrows() > x.ncols() => fit_ols(x, y),
        _ => fit_proximal(config, x, y, lambda_n, center, init),
    }
}

/// `p⁻¹ (β̂ − β*)ᵀ Σ (β̂ − β*)`.
pub fn empirical_risk(beta_hat: &DVector<f64>, beta_star: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    let p = beta_star.len();
    if beta_hat.len() != p || sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::DimensionMismatch {
            what: "risk operands",
            expected: p,
            actual: beta_hat.len().max(sigma.nrows()),
        });
    }
    let e = beta_hat - beta_star;
    Ok((e.dot(&(sigma * &e)) / p as f64).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::spectrum::{sample_design, DesignKind};
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        sample_design(None, n, p, DesignKind::Gaussian, &mut stream(seed, 0, Purpose::Design)).unwrap()
    }

    fn normal_vec(len: usize, seed: u64) -> DVector<f64> {
        let mut rng = stream(seed, 0, Purpose::Auxiliary);
        DVector::from_fn(len, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn ols_stacked_identity_recovers_exactly() {
        let p = 6;
        let mut x = DMatrix::zeros(2 * p, p);
        for i in 0..p {
            x[(i, i)] = 1.0;
            x[(p + i, i)] = 1.0;
        }
        let beta = normal_vec(p, 1);
        let y = DVector::from_iterator(2 * p, beta.iter().chain(beta.iter()).copied());
        let fit = fit_ols(&x, &y).unwrap();
        assert!((fit.beta_hat - beta).amax() < 1e-14);
    }

    #[test]
    fn ols_noiseless_and_normal_equations() {
        let x = gaussian(50, 2, 3);
        let beta = normal_vec(2, 4);
        let fit = fit_ols(&x, &(&x * &beta)).unwrap();
        assert!((fit.beta_hat - &beta).amax() < 1e-8);

        let y = normal_vec(50, 5);
        let fit = fit_ols(&x, &y).unwrap();
        let xtx = x.transpose() * &x;
        let oracle = xtx.try_inverse().unwrap() * x.transpose() * &y;
        assert!((&fit.beta_hat - oracle).amax() < 1e-8);
        let resid = &y - &x * &fit.beta_hat;
        assert!(x.tr_mul(&resid).amax() <= 1e-8 * y.norm());
    }

    #[test]
    fn ols_rank_deficient_and_shape_errors() {
        let mut x = gaussian(20, 3, 6);
        let c0 = x.column(0).into_owned();
        x.set_column(2, &(c0 * 2.0));
        assert!(matches!(fit_ols(&x, &normal_vec(20, 7)), Err(Error::RankDeficient { .. })));
        assert!(fit_ols(&gaussian(3, 3, 1), &normal_vec(3, 1)).is_err());
    }

    #[test]
    fn ridge_limits() {
        let x = gaussian(40, 5, 8);
        let y = normal_vec(40, 9);
        let center = normal_vec(5, 10);
        let fit = fit_ridge(&x, &y, 1e12, &center).unwrap();
        assert!((fit.beta_hat - &center).amax() < 1e-6);
        let fit = fit_ridge(&x, &y, 1e-12, &center).unwrap();
        let ols = fit_ols(&x, &y).unwrap();
        assert!((fit.beta_hat - ols.beta_hat).amax() < 1e-4);
        assert!(fit_ridge(&x, &y, 0.0, &center).is_err());
    }

    #[test]
    fn ridge_stationarity() {
        let x = gaussian(100, 40, 11);
        let y = normal_vec(100, 12);
        let center = normal_vec(40, 13);
        let sys = RidgeSystem::new(&x);
        for lambda in [1e-3, 0.1, 10.0] {
            let fit = sys.solve(&y, lambda, &center).unwrap();
            assert!(sys.stationarity_residual(&y, lambda, &center, &fit.beta_hat) <= 1e-10);
        }
    }

    #[test]
    fn proximal_matches_closed_form_ridge() {
        for (n, p, seed) in [(20, 5, 14), (100, 40, 15)] {
            let x = gaussian(n, p, seed);
            let y = normal_vec(n, seed + 100);
            let center = normal_vec(p, seed + 200);
            let cfg = EstimatorConfig::transfer("ridge", RegularizerSpec::Ridge, 1.0);
            let closed = fit_ridge(&x, &y, 0.3, &center).unwrap();
            let prox = fit_proximal(&cfg, &x, &y, 0.3, &center, None).unwrap();
            assert!(prox.converged);
            assert!((prox.beta_hat - closed.beta_hat).amax() < 1e-6);
        }
    }

    #[test]
    fn huber_noiseless_recovers_truth() {
        let x = gaussian(200, 20, 16);
        let beta = normal_vec(20, 17);
        let y = &x * &beta;
        let cfg = EstimatorConfig::huber("huber", 1.5, 1e-12).unwrap();
        let fit = fit_proximal(&cfg, &x, &y, 1e-12, &DVector::zeros(20), None).unwrap();
        assert!(fit.converged);
        assert!((fit.beta_hat - beta).amax() < 1e-4);
    }

    #[test]
    fn lasso_huge_lambda_returns_center() {
        let x = gaussian(60, 30, 18);
        let y = normal_vec(60, 19) * 50.0;
        let center = normal_vec(30, 20);
        let cfg = EstimatorConfig::transfer("lasso", RegularizerSpec::Lasso, 1.0);
        let fit = fit_proximal(&cfg, &x, &y, 1e8, &center, None).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.beta_hat, center);
    }

    #[test]
    fn proximal_objective_monotone_and_certified() {
        let x = gaussian(120, 60, 21);
        let y = normal_vec(120, 22) * 5.0;
        for mut cfg in [
            EstimatorConfig::huber("huber", 1.0, 0.05).unwrap(),
            EstimatorConfig::transfer("lasso", RegularizerSpec::Lasso, 1.0),
            EstimatorConfig::transfer("enet", RegularizerSpec::elastic_net(0.5).unwrap(), 1.0),
            EstimatorConfig { loss: LossSpec::LogCosh, ..EstimatorConfig::fixed_ridge("logcosh", 0.1) },
        ] {
            cfg.solver.record_history = true;
            let center = DVector::zeros(60);
            let fit = fit_proximal(&cfg, &x, &y, 0.05, &center, None).unwrap();
            assert!(fit.converged, "{}", cfg.id);
            assert!(fit.history.windows(2).all(|w| w[1] <= w[0]), "{}", cfg.id);
            assert!(fit.grad_map_norm <= 1e-8 * (1.0 + fit.beta_hat.norm()));
        }
    }

    #[test]
    fn iteration_budget_reports_non_convergence() {
        let x = gaussian(80, 40, 23);
        let y = normal_vec(80, 24);
        let mut cfg = EstimatorConfig::transfer("lasso", RegularizerSpec::Lasso, 1.0);
        cfg.solver.max_iter = 2;
        let fit = fit_proximal(&cfg, &x, &y, 1e-3, &DVector::zeros(40), None).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
    }

    #[test]
    fn nonsmooth_losses_are_rejected() {
        let x = gaussian(10, 2, 25);
        let y = normal_vec(10, 26);
        let cfg = EstimatorConfig { loss: LossSpec::Absolute, ..EstimatorConfig::ols("lad") };
        assert!(fit_proximal(&cfg, &x, &y, 0.0, &DVector::zeros(2), None).is_err());
    }

    #[test]
    fn risk_examples() {
        let p = 10;
        let sigma = DMatrix::identity(p, p);
        let b = normal_vec(p, 27);
        assert_eq!(empirical_risk(&b, &b, &sigma).unwrap(), 0.0);
        let mut e1 = b.clone();
        e1[0] += 1.0;
        assert_relative_eq!(empirical_risk(&e1, &b, &sigma).unwrap(), 0.1, max_relative = 1e-14);
    }

    #[test]
    fn lambda_modes() {
        assert_eq!(LambdaMode::Fixed(0.1).resolve(None).unwrap(), 0.1);
        assert_eq!(LambdaMode::NoiseAdapted(2.0).resolve(Some(3.0)).unwrap(), 6.0);
        assert!(LambdaMode::NoiseAdapted(2.0).resolve(None).is_err());
        assert!(EstimatorConfig::ols("ols").validate(10, 10).is_err());
    }
}
