//! Heavy-tailed noise laws, Winsorization and the truncated-moment calculus.
//!
//! A [`TailLaw`] describes noise with `P(|w| > t) = c t^{-α}(1 + o(1))`,
//! `α ∈ (1, 2)`: finite mean, infinite variance. Clipping at
//! `τ_n = n^{1/α}` yields a proxy with finite effective variance
//! `σ_n² = E[(w^{(τ_n)})²] = ∫₀^{τ_n} 2t P(|w| > t) dt`, which grows like
//! `n^{(2-α)/α}`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Pareto, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, gamma::ln_gamma};

use crate::error::{invalid, Result};
use crate::quad;

/// Relative tolerance for the tail-integral quadratures.
pub const QUAD_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailFamily {
    /// `|w|` is Pareto with unit minimum, sign is a fair coin.
    SymmetricPareto,
    /// Student-t with `α` degrees of freedom.
    StudentT,
    /// Symmetric α-stable, unit scale (Chambers–Mallows–Stuck sampling).
    AlphaStable,
}

impl TailFamily {
    pub fn name(self) -> &'static str {
        match self {
            TailFamily::SymmetricPareto => "symmetric-pareto",
            TailFamily::StudentT => "student-t",
            TailFamily::AlphaStable => "alpha-stable",
        }
    }
}

/// A regularly varying noise law with tail index `alpha` and tail constant
/// `c`, multiplied by `scale`. `c` always refers to the unscaled law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailLaw {
    family: TailFamily,
    alpha: f64,
    c: f64,
    scale: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(invalid(
            "alpha",
            format!("tail index must lie strictly inside (1, 2), got {alpha}"),
        ));
    }
    Ok(())
}

impl TailLaw {
    pub fn new(family: TailFamily, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let c = match family {
            TailFamily::SymmetricPareto => 1.0,
            TailFamily::StudentT => student_t_tail_constant(alpha),
            TailFamily::AlphaStable => stable_tail_constant(alpha),
        };
        Ok(Self {
            family,
            alpha,
            c,
            scale: 1.0,
        })
    }

    pub fn symmetric_pareto(alpha: f64) -> Result<Self> {
        Self::new(TailFamily::SymmetricPareto, alpha)
    }

    pub fn student_t(dof: f64) -> Result<Self> {
        Self::new(TailFamily::StudentT, dof)
    }

    pub fn alpha_stable(alpha: f64) -> Result<Self> {
        Self::new(TailFamily::AlphaStable, alpha)
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(invalid("scale", format!("must be finite and >= 0, got {scale}")));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn family(&self) -> TailFamily {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `P(|w| > t)` for the unscaled law.
    pub fn unit_tail_prob(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self.family {
            TailFamily::SymmetricPareto => {
                if t <= 1.0 {
                    1.0
                } else {
                    t.powf(-self.alpha)
                }
            }
            TailFamily::StudentT => {
                let nu = self.alpha;
                beta_reg(0.5 * nu, 0.5, nu / (nu + t * t))
            }
            TailFamily::AlphaStable => stable_tail_prob(self.alpha, t),
        }
    }

    /// `P(|s·w| > t)` including the scale.
    pub fn tail_prob(&self, t: f64) -> f64 {
        if self.scale == 0.0 {
            return if t < 0.0 { 1.0 } else { 0.0 };
        }
        self.unit_tail_prob(t / self.scale)
    }

    /// `E|w|` for the unscaled law, where a closed form exists.
    pub fn unit_mean_abs(&self) -> Option<f64> {
        let a = self.alpha;
        match self.family {
            TailFamily::SymmetricPareto => Some(a / (a - 1.0)),
            TailFamily::StudentT => {
                // E|T_ν| = 2 sqrt(ν) Γ((ν+1)/2) / (sqrt(π) (ν-1) Γ(ν/2))
                let lg = ln_gamma(0.5 * (a + 1.0)) - ln_gamma(0.5 * a);
                Some(2.0 * a.sqrt() * lg.exp() / (PI.sqrt() * (a - 1.0)))
            }
            TailFamily::AlphaStable => Some(2.0 * libm_gamma(1.0 - 1.0 / a) / PI),
        }
    }

    fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            TailFamily::SymmetricPareto => {
                let magnitude: f64 = Pareto::new(1.0, self.alpha)
                    .expect("validated shape")
                    .sample(rng);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            TailFamily::StudentT => StudentT::new(self.alpha)
                .expect("validated dof")
                .sample(rng),
            TailFamily::AlphaStable => {
                let a = self.alpha;
                let u = PI * (rng.random::<f64>() - 0.5);
                let w: f64 = Exp1.sample(rng);
                (a * u).sin() / u.cos().powf(1.0 / a)
                    * ((u * (1.0 - a)).cos() / w).powf((1.0 - a) / a)
            }
        }
    }
}

fn libm_gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// `lim t^ν P(|T_ν| > t) = 2 Γ((ν+1)/2) ν^{ν/2 - 1} / (sqrt(π) Γ(ν/2))`.
pub fn student_t_tail_constant(nu: f64) -> f64 {
    let lg = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu);
    2.0 * lg.exp() * nu.powf(0.5 * nu - 1.0) / PI.sqrt()
}

/// `lim t^α P(|X| > t) = 2 Γ(α) sin(πα/2) / π` for unit symmetric stable.
pub fn stable_tail_constant(alpha: f64) -> f64 {
    2.0 * libm_gamma(alpha) * (0.5 * PI * alpha).sin() / PI
}

/// Two-sided tail of the unit symmetric α-stable law, `α ∈ (1, 2)`, from
/// Zolotarev's integral representation:
/// `P(|X| > x) = (2/π) ∫₀^{π/2} exp(-x^{α/(α-1)} V(θ)) dθ`.
///
/// For large `x` the integrand is a spike of width `~x^{-α}` at `θ = π/2`,
/// so the integral is taken in `u = ln(π/2 − θ)`, where the spike has unit
/// width.
fn stable_tail_prob(alpha: f64, x: f64) -> f64 {
    let expo = alpha / (alpha - 1.0);
    let xp = x.powf(expo);
    // V at θ = π/2 − φ
    let v = |phi: f64| {
        let theta = 0.5 * PI - phi;
        (phi.sin() / (alpha * theta).sin()).powf(expo) * ((alpha - 1.0) * theta).cos() / phi.sin()
    };
    let integrand = |u: f64| {
        let phi = u.exp();
        phi * (-xp * v(phi)).exp()
    };
    // mass below the cut is at most e^{lo}, far under the tail itself
    let lo = x.powf(-alpha).min(1.0).ln() - 40.0;
    let value = quad::integrate(integrand, lo, (0.5 * PI).ln(), 1e-12)
        .expect("stable tail integrand is bounded and smooth");
    (2.0 / PI * value).clamp(0.0, 1.0)
}

/// Clips `w` to `[-tau, tau]`, preserving sign.
pub fn winsorize(w: f64, tau: f64) -> Result<f64> {
    if !w.is_finite() {
        return Err(invalid("w", format!("must be finite, got {w}")));
    }
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("must be > 0, got {tau}")));
    }
    Ok(w.clamp(-tau, tau))
}

/// In-place [`winsorize`] over a slice.
pub fn winsorize_all(values: &mut [f64], tau: f64) -> Result<()> {
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("must be > 0, got {tau}")));
    }
    for w in values.iter_mut() {
        *w = winsorize(*w, tau)?;
    }
    Ok(())
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n", "must be >= 1"));
    }
    Ok(n as f64)
}

/// `τ_n = n^{1/α}` for the unscaled law.
pub fn threshold(law: &TailLaw, n: usize) -> Result<f64> {
    let n = check_n(n)?;
    let t = n.powf(1.0 / law.alpha);
    // snap exact powers (n = 1000, α = 1.5 gives 100, not 99.99999999999997)
    let r = t.round();
    Ok(if ((r.powf(law.alpha) - n) / n).abs() <= 4.0 * f64::EPSILON { r } else { t })
}

/// `(2c/(2-α)) n^{(2-α)/α} · scale²`.
pub fn effective_variance_asymptotic(law: &TailLaw, n: usize) -> Result<f64> {
    let a = law.alpha;
    let tau = threshold(law, n)?;
    Ok(2.0 * law.c / (2.0 - a) * tau.powf(2.0 - a) * law.scale * law.scale)
}

/// `E[(w^{(τ)})²] = ∫₀^τ 2t P(|w| > t) dt`, scale included.
///
/// Closed form for `SymmetricPareto`; adaptive Gauss–Kronrod otherwise.
pub fn effective_variance_exact(law: &TailLaw, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("must be > 0, got {tau}")));
    }
    if law.scale == 0.0 {
        return Ok(0.0);
    }
    let s2 = law.scale * law.scale;
    let t = tau / law.scale;
    let unit = match law.family {
        TailFamily::SymmetricPareto => {
            if t <= 1.0 {
                t * t
            } else {
                let a = law.alpha;
                1.0 + 2.0 / (2.0 - a) * (t.powf(2.0 - a) - 1.0)
            }
        }
        _ => {
            let law = *law;
            quad::integrate(|x| 2.0 * x * law.unit_tail_prob(x), 0.0, t, QUAD_REL_TOL)?
        }
    };
    Ok(unit * s2)
}

/// `E|w^{(τ)}| = ∫₀^τ P(|w| > t) dt`, scale included.
pub fn winsorized_mean_abs(law: &TailLaw, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau", format!("must be > 0, got {tau}")));
    }
    if law.scale == 0.0 {
        return Ok(0.0);
    }
    let t = tau / law.scale;
    let unit = match law.family {
        TailFamily::SymmetricPareto => {
            let a = law.alpha;
            if t <= 1.0 {
                t
            } else {
                1.0 + (1.0 - t.powf(1.0 - a)) / (a - 1.0)
            }
        }
        _ => {
            let law = *law;
            quad::integrate(|x| law.unit_tail_prob(x), 0.0, t, QUAD_REL_TOL)?
        }
    };
    Ok(unit * law.scale)
}

/// Asymptotic `E[(w^{(τ)})⁴] ~ 4c/(4-α) τ^{4-α}`, with the tail constant of
/// the scaled law (`c · scale^α`).
pub fn truncated_fourth_moment(law: &TailLaw, tau: f64) -> Result<f64> {
    if !(tau >= 1.0) {
        return Err(invalid("tau", format!("must be >= 1, got {tau}")));
    }
    let a = law.alpha;
    let c_scaled = law.c * law.scale.powf(a);
    Ok(4.0 * c_scaled / (4.0 - a) * tau.powf(4.0 - a))
}

/// `I_n = n / σ_n²` with the asymptotic effective variance.
pub fn fisher_information(law: &TailLaw, n: usize) -> Result<f64> {
    let sigma2 = effective_variance_asymptotic(law, n)?;
    if sigma2 == 0.0 {
        return Err(crate::Error::DegenerateNoise(
            "Fisher information is unbounded for zero-scale noise".into(),
        ));
    }
    Ok(n as f64 / sigma2)
}

/// I.i.d. draws from the law times its scale.
pub fn sample_noise<R: Rng + ?Sized>(law: &TailLaw, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| law.scale * law.sample_unit(rng)).collect()
}

/// Threshold and effective variance for a sample of size `n`.
///
/// For a scaled law the threshold is `scale · n^{1/α}`, so Winsorization
/// commutes with scaling and `sigma2` grows as `scale²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WinsorPlan {
    pub n: usize,
    pub tau: f64,
    pub sigma2: f64,
}

impl WinsorPlan {
    pub fn new(law: &TailLaw, n: usize) -> Result<Self> {
        let tau = threshold(law, n)? * law.scale;
        let sigma2 = if tau > 0.0 {
            effective_variance_exact(law, tau)?
        } else {
            0.0
        };
        Ok(Self { n, tau, sigma2 })
    }
}
