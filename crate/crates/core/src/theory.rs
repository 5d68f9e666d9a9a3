//! Deterministic risk predictions for transfer-regularized least squares
//! with penalty strength `μ = λ̃ σ_n²`.
//!
//! The ridge path is closed form in the companion solution `v` of
//! `v⁻¹ = 1 + γ E[S/(Sv + μ)]`. The general path solves the same
//! degrees-of-freedom balance `1 = v + γ E[∂prox]` for an arbitrary
//! separable regularizer, with per-eigenvalue scalar problems
//! `prox_{κ/s}(Δ + b ζ)`, `κ = μ/v`, `b² = σ_n²/(n v s)`, averaged by
//! Gauss–Hermite quadrature. For the ridge prox both paths coincide.

use serde::{Deserialize, Serialize};

use crate::convex::RegularizerSpec;
use crate::error::{invalid, Error, Result};
use crate::quad::GaussHermite;
use crate::spectrum::{q_sigma, DiscreteSpectrum};

pub const DEFAULT_HERMITE_NODES: usize = 61;
const DAMPING: f64 = 0.5;
const MAX_ITER: usize = 500;
const FIXED_POINT_TOL: f64 = 1e-13;
const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub spectrum: DiscreteSpectrum,
    pub gamma: f64,
    pub sigma2: f64,
    pub n: usize,
    pub lambda_tilde: f64,
    pub reg: RegularizerSpec,
}

impl TheoryInputs {
    /// Inputs with `γ = p/n` taken from the spectrum.
    pub fn new(spectrum: DiscreteSpectrum, n: usize, sigma2: f64, lambda_tilde: f64, reg: RegularizerSpec) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        let gamma = spectrum.p() as f64 / n as f64;
        let inputs = Self { spectrum, gamma, sigma2, n, lambda_tilde, reg };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Overrides the aspect ratio, decoupling it from `p/n`.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Result<Self> {
        self.sigma2 = sigma2;
        self.validate()?;
        Ok(self)
    }

    pub fn mu(&self) -> f64 {
        self.lambda_tilde * self.sigma2
    }

    pub fn q_sigma(&self) -> f64 {
        q_sigma(&self.spectrum)
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be finite and >= 0, got {}", self.gamma)));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(invalid("sigma2", format!("must be finite and >= 0, got {}", self.sigma2)));
        }
        if !(self.lambda_tilde > 0.0 && self.lambda_tilde.is_finite()) {
            return Err(invalid("lambda_tilde", format!("must be finite and > 0, got {}", self.lambda_tilde)));
        }
        if self.mu() == 0.0 && self.gamma >= 1.0 {
            return Err(invalid("sigma2", "zero penalty needs gamma < 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPrediction {
    pub risk: f64,
    pub tau: f64,
    pub v: f64,
    /// Offset (bias) part of the ridge risk.
    pub bias_term: Option<f64>,
    /// Noise (variance) part of the ridge risk.
    pub variance_term: Option<f64>,
    pub iterations: usize,
}

fn tau_of(gamma: f64, risk: f64) -> f64 {
    (1.0 + gamma * risk).sqrt()
}

/// Unique `v ∈ (0, 1]` with `v⁻¹ = 1 + γ E[S/(Sv + μ)]`.
pub fn solve_companion_v(spectrum: &DiscreteSpectrum, gamma: f64, mu: f64) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be finite and >= 0, got {mu}")));
    }
    if mu == 0.0 && gamma >= 1.0 {
        return Err(invalid("mu", "zero penalty needs gamma < 1"));
    }
    if gamma == 0.0 {
        return Ok(1.0);
    }
    // v (1 + γ E[S/(Sv+μ)]) − 1 increases in v
    let g = |v: f64| v * (1.0 + gamma * spectrum.mean_over(|s| s / (s * v + mu))) - 1.0;
    let (mut lo, mut hi) = (1e-14_f64, 1.0_f64);
    assert!(g(lo) <= 0.0 && g(hi) >= 0.0, "companion bracket must hold for valid inputs");
    // past the absolute tolerance, keep halving to full precision so the
    // residual stays small when v itself is tiny
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= BISECTION_TOL && (mid == lo || mid == hi || hi - lo <= 4.0 * f64::EPSILON * lo) {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `|v⁻¹ − 1 − γ E[S/(Sv + μ)]|`.
pub fn companion_residual(spectrum: &DiscreteSpectrum, gamma: f64, mu: f64, v: f64) -> f64 {
    (1.0 / v - 1.0 - gamma * spectrum.mean_over(|s| s / (s * v + mu))).abs()
}

/// Closed-form ridge risk
/// `μ² E[SΔ²/(Sv+μ)²] + (σ_n²/n) v E[S²/(Sv+μ)²]`.
pub fn ridge_risk_closed_form(inputs: &TheoryInputs) -> Result<RiskPrediction> {
    if inputs.reg != RegularizerSpec::Ridge {
        return Err(invalid("reg", format!("closed form needs ridge, got {}", inputs.reg.name())));
    }
    let mu = inputs.mu();
    let v = solve_companion_v(&inputs.spectrum, inputs.gamma, mu)?;
    let spec = &inputs.spectrum;
    let w = spec.weight();
    let bias = mu * mu * spec.atoms().map(|(s, d)| s * d * d / (s * v + mu).powi(2)).sum::<f64>() * w;
    let var_sum = spec.mean_over(|s| s * s / (s * v + mu).powi(2));
    let variance = inputs.sigma2 / inputs.n as f64 * v * var_sum;
    let risk = bias + variance;
    Ok(RiskPrediction {
        risk,
        tau: tau_of(inputs.gamma, risk),
        v,
        bias_term: Some(bias),
        variance_term: Some(variance),
        iterations: 0,
    })
}

struct Scalar {
    risk: f64,
    divergence: f64,
}

/// Risk and mean prox derivative at companion value `v`.
fn evaluate(inputs: &TheoryInputs, gh: &GaussHermite, v: f64) -> Scalar {
    let kappa = inputs.mu() / v;
    let n = inputs.n as f64;
    let reg = inputs.reg;
    let mut risk = 0.0;
    let mut divergence = 0.0;
    for (s, d) in inputs.spectrum.atoms() {
        let step = kappa / s;
        let b = (inputs.sigma2 / (n * v * s)).sqrt();
        if b == 0.0 {
            let e = reg.prox_scalar(step, d) - d;
            risk += s * e * e;
            // derivative of the prox at d, one-sided where it kinks
            let h = 1e-7 * (1.0 + d.abs());
            divergence += (reg.prox_scalar(step, d + h) - reg.prox_scalar(step, d - h)) / (2.0 * h);
            continue;
        }
        let (mut r, mut stein) = (0.0, 0.0);
        for (&z, &wt) in gh.nodes().iter().zip(gh.weights()) {
            let out = reg.prox_scalar(step, d + b * z);
            let e = out - d;
            r += wt * e * e;
            stein += wt * z * out;
        }
        risk += s * r;
        // Stein: E[ζ f(d + bζ)] = b E[f'(d + bζ)]
        divergence += stein / b;
    }
    let w = inputs.spectrum.weight();
    Scalar {
        risk: risk * w,
        divergence: divergence * w,
    }
}

/// General proximal fixed point with the default quadrature order.
pub fn solve_general_fixed_point(inputs: &TheoryInputs) -> Result<RiskPrediction> {
    solve_general_fixed_point_with(inputs, DEFAULT_HERMITE_NODES)
}

/// Damped iteration `v⁻¹ ← (1−ω) v⁻¹ + ω (1 + γ E[∂prox]/v)`, `ω = 0.5`,
/// from `v = 1`; risk `E[S (prox_{κ/S}(Δ + bζ) − Δ)²]`, `τ = √(1 + γ·risk)`.
pub fn solve_general_fixed_point_with(inputs: &TheoryInputs, nodes: usize) -> Result<RiskPrediction> {
    inputs.validate()?;
    if nodes == 0 {
        return Err(invalid("nodes", "quadrature needs at least one node"));
    }
    let gh = GaussHermite::new(nodes);
    let mut inv_v = 1.0_f64;
    for iter in 1..=MAX_ITER {
        let v = 1.0 / inv_v;
        let s = evaluate(inputs, &gh, v);
        let target = 1.0 + inputs.gamma * s.divergence / v;
        let next = (1.0 - DAMPING) * inv_v + DAMPING * target;
        let step = (next - inv_v).abs();
        inv_v = next;
        if step <= FIXED_POINT_TOL * inv_v {
            let v = 1.0 / inv_v;
            let risk = evaluate(inputs, &gh, v).risk;
            return Ok(RiskPrediction {
                risk,
                tau: tau_of(inputs.gamma, risk),
                v,
                bias_term: None,
                variance_term: None,
                iterations: iter,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "general fixed point",
        iterations: MAX_ITER,
        last: 1.0 / inv_v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Ols,
    FixedRidge,
    NoiseAdaptedTransfer,
}

/// Predicted slope of log-risk against log noise scale.
pub fn predict_divergence_exponent(kind: EstimatorKind) -> f64 {
    match kind {
        // error is linear in the noise, risk in its square
        EstimatorKind::Ols | EstimatorKind::FixedRidge => 2.0,
        EstimatorKind::NoiseAdaptedTransfer => 0.0,
    }
}
