//! Convex losses and regularizers: values, derivatives, proximal maps and
//! the Fenchel-conjugate domain classification.
//!
//! A loss with `dom(L*) ⊆ [-K, K]` couples to the noise only through its
//! first absolute moment; a loss with `dom(L*) = ℝ` couples through higher
//! moments. For a conjugate growing like `|u|^q` the coupling involves the
//! `q/(q-1)`-th moment, see [`required_alpha`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Newton tolerance for the log-cosh prox.
const LOGCOSH_TOL: f64 = 1e-12;
const LOGCOSH_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossSpec {
    /// `t²/2`
    Squared,
    /// `t²/2` for `|t| ≤ k`, `k|t| − k²/2` beyond.
    Huber { k: f64 },
    /// `|t|`
    Absolute,
    /// `t (τ_q − 1{t < 0})`
    Quantile { tau_q: f64 },
    /// `log cosh t`
    LogCosh,
}

impl LossSpec {
    pub fn huber(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid("k", format!("Huber threshold must be > 0, got {k}")));
        }
        Ok(LossSpec::Huber { k })
    }

    pub fn quantile(tau_q: f64) -> Result<Self> {
        if !(tau_q > 0.0 && tau_q < 1.0) {
            return Err(invalid("tau_q", format!("must lie in (0, 1), got {tau_q}")));
        }
        Ok(LossSpec::Quantile { tau_q })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Squared => "squared",
            LossSpec::Huber { .. } => "huber",
            LossSpec::Absolute => "absolute",
            LossSpec::Quantile { .. } => "quantile",
            LossSpec::LogCosh => "log-cosh",
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            LossSpec::Squared => 0.5 * t * t,
            LossSpec::Huber { k } => {
                if t.abs() <= k {
                    0.5 * t * t
                } else {
                    k * t.abs() - 0.5 * k * k
                }
            }
            LossSpec::Absolute => t.abs(),
            LossSpec::Quantile { tau_q } => {
                if t < 0.0 {
                    t * (tau_q - 1.0)
                } else {
                    t * tau_q
                }
            }
            LossSpec::LogCosh => {
                // log cosh t = |t| + log(1 + e^{-2|t|}) − log 2, overflow-free
                let a = t.abs();
                a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
            }
        }
    }

    /// `L(t + d) − L(t)`, accurate when `|d| ≪ |t|` where the plain
    /// difference of values would cancel.
    pub fn value_change(&self, t: f64, d: f64) -> f64 {
        let u = t + d;
        let linear = |slope: f64| slope * d;
        match *self {
            LossSpec::Squared => d * (t + 0.5 * d),
            LossSpec::Huber { k } => {
                if t.abs() <= k && u.abs() <= k {
                    d * (t + 0.5 * d)
                } else if t > k && u > k {
                    linear(k)
                } else if t < -k && u < -k {
                    linear(-k)
                } else {
                    self.value(u) - self.value(t)
                }
            }
            LossSpec::Absolute | LossSpec::Quantile { .. } => {
                if t > 0.0 && u > 0.0 || t < 0.0 && u < 0.0 {
                    linear(self.derivative(t))
                } else {
                    self.value(u) - self.value(t)
                }
            }
            LossSpec::LogCosh => {
                if d.abs() <= 1.0 {
                    // log(cosh(t+d)/cosh t) = log(cosh d + tanh t · sinh d)
                    let h = (0.5 * d).sinh();
                    return (2.0 * h * h + t.tanh() * d.sinh()).ln_1p();
                }
                // log cosh x = |x| + log(1 + e^{−2|x|}) − log 2
                let tail = |x: f64| (-2.0 * x.abs()).exp().ln_1p();
                let ramp = if t >= 0.0 && u >= 0.0 {
                    d
                } else if t <= 0.0 && u <= 0.0 {
                    -d
                } else {
                    u.abs() - t.abs()
                };
                ramp + (tail(u) - tail(t))
            }
        }
    }

    /// Derivative where it exists; at a kink, the midpoint of the
    /// subdifferential.
    pub fn derivative(&self, t: f64) -> f64 {
        let (lo, hi) = self.subgradient(t);
        0.5 * (lo + hi)
    }

    /// Subdifferential `∂L(t) = [lo, hi]`.
    pub fn subgradient(&self, t: f64) -> (f64, f64) {
        match *self {
            LossSpec::Squared => (t, t),
            LossSpec::Huber { k } => {
                let g = t.clamp(-k, k);
                (g, g)
            }
            LossSpec::Absolute => {
                if t > 0.0 {
                    (1.0, 1.0)
                } else if t < 0.0 {
                    (-1.0, -1.0)
                } else {
                    (-1.0, 1.0)
                }
            }
            LossSpec::Quantile { tau_q } => {
                if t > 0.0 {
                    (tau_q, tau_q)
                } else if t < 0.0 {
                    (tau_q - 1.0, tau_q - 1.0)
                } else {
                    (tau_q - 1.0, tau_q)
                }
            }
            LossSpec::LogCosh => {
                let g = t.tanh();
                (g, g)
            }
        }
    }

    /// Locations where the loss is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            LossSpec::Absolute | LossSpec::Quantile { .. } => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// Whether a gradient-based solver can fit this loss.
    pub fn is_smooth(&self) -> bool {
        matches!(self, LossSpec::Squared | LossSpec::Huber { .. } | LossSpec::LogCosh)
    }

    /// Upper bound on `L''`, used to seed step sizes.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            LossSpec::Squared | LossSpec::Huber { .. } | LossSpec::LogCosh => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// `argmin_z { L(z) + (z − x)² / (2η) }`.
    pub fn prox(&self, eta: f64, x: f64) -> Result<f64> {
        check_step(eta)?;
        Ok(match *self {
            LossSpec::Squared => x / (1.0 + eta),
            LossSpec::Huber { k } => {
                if x.abs() <= k * (1.0 + eta) {
                    x / (1.0 + eta)
                } else {
                    x - eta * k * x.signum()
                }
            }
            LossSpec::Absolute => soft_threshold(x, eta),
            LossSpec::Quantile { tau_q } => {
                if x > eta * tau_q {
                    x - eta * tau_q
                } else if x < eta * (tau_q - 1.0) {
                    x - eta * (tau_q - 1.0)
                } else {
                    0.0
                }
            }
            LossSpec::LogCosh => logcosh_prox(eta, x)?,
        })
    }

    /// Prox of the scaled conjugate, `prox_{γ L*}(y)`, for losses whose
    /// conjugate is implemented (`Squared`, `Huber`, `Absolute`, `Quantile`).
    pub fn conjugate_prox(&self, gamma: f64, y: f64) -> Option<f64> {
        match *self {
            // L*(u) = u²/2
            LossSpec::Squared => Some(y / (1.0 + gamma)),
            // L*(u) = u²/2 + ι_{[-k,k]}(u)
            LossSpec::Huber { k } => Some((y / (1.0 + gamma)).clamp(-k, k)),
            // L* = ι_{[-1,1]}
            LossSpec::Absolute => Some(y.clamp(-1.0, 1.0)),
            // L* = ι_{[τ-1, τ]}
            LossSpec::Quantile { tau_q } => Some(y.clamp(tau_q - 1.0, tau_q)),
            LossSpec::LogCosh => None,
        }
    }
}

fn check_step(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid("eta", format!("step must be finite and > 0, got {eta}")));
    }
    Ok(())
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Solves `z + η tanh z = x` by Newton steps safeguarded to the bracket
/// between 0 and `x`.
fn logcosh_prox(eta: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = if x > 0.0 { (0.0, x) } else { (x, 0.0) };
    let mut z = x / (1.0 + eta);
    for _ in 0..LOGCOSH_MAX_ITER {
        let th = z.tanh();
        let g = z + eta * th - x;
        if g > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let dg = 1.0 + eta * (1.0 - th * th);
        let mut next = z - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= LOGCOSH_TOL * (1.0 + z.abs()) {
            return Ok(next);
        }
        z = next;
    }
    Err(Error::NoConvergence {
        what: "log-cosh prox",
        iterations: LOGCOSH_MAX_ITER,
        last: z,
    })
}

/// Shape of `dom(L*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateClass {
    pub bounded: bool,
    /// `dom(L*) ⊆ [lower, upper]` when bounded.
    pub domain: Option<(f64, f64)>,
    /// Half-width `K` with `dom(L*) ⊆ [-K, K]`.
    pub k: Option<f64>,
    /// Growth exponent `q` of `L*(u) ~ |u|^q` when unbounded.
    pub q_growth: Option<f64>,
}

pub fn classify_conjugate(loss: &LossSpec) -> ConjugateClass {
    let bounded_interval = |lower: f64, upper: f64| ConjugateClass {
        bounded: true,
        domain: Some((lower, upper)),
        k: Some(lower.abs().max(upper.abs())),
        q_growth: None,
    };
    match *loss {
        LossSpec::Squared => ConjugateClass {
            bounded: false,
            domain: None,
            k: None,
            q_growth: Some(2.0),
        },
        LossSpec::Huber { k } => bounded_interval(-k, k),
        LossSpec::Absolute => bounded_interval(-1.0, 1.0),
        LossSpec::Quantile { tau_q } => bounded_interval(tau_q - 1.0, tau_q),
        LossSpec::LogCosh => bounded_interval(-1.0, 1.0),
    }
}

/// Minimal tail index for bounded risk under conjugate growth `|u|^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RequiredAlpha {
    pub alpha: f64,
    /// `true` when the bound is `α > alpha` rather than `α ≥ alpha`.
    pub strict: bool,
}

impl RequiredAlpha {
    pub fn is_met_by(&self, alpha: f64) -> bool {
        if self.strict {
            alpha > self.alpha
        } else {
            alpha >= self.alpha
        }
    }
}

/// `q/(q−1)` for `q > 1`; `α > 1` for `q = 1`.
pub fn required_alpha(q_growth: f64) -> Result<RequiredAlpha> {
    if !(q_growth >= 1.0) || q_growth.is_nan() {
        return Err(invalid("q_growth", format!("must be >= 1, got {q_growth}")));
    }
    if q_growth == 1.0 {
        return Ok(RequiredAlpha {
            alpha: 1.0,
            strict: true,
        });
    }
    Ok(RequiredAlpha {
        alpha: q_growth / (q_growth - 1.0),
        strict: false,
    })
}

/// Conjugate growth exponent implied by a class: `1` for a bounded domain.
pub fn conjugate_growth(class: &ConjugateClass) -> f64 {
    if class.bounded {
        1.0
    } else {
        class.q_growth.unwrap_or(2.0)
    }
}

/// Numerical check of the domain class from the growth of `L(t)/|t|`.
///
/// `dom(L*)` is bounded exactly when `L` is globally Lipschitz, i.e. the slope
/// ratio `L(t)/|t|` stays bounded as `|t| → ∞`. Both tails are probed at
/// `|t| = 10⁶` and compared against `|t| = 10⁵`; a ratio that keeps growing
/// (superlinear loss) means an unbounded conjugate domain.
pub fn growth_test_bounded(loss: &LossSpec) -> bool {
    const FAR: f64 = 1e6;
    const NEAR: f64 = 1e5;
    [1.0, -1.0].iter().all(|&sign| {
        let far = loss.value(sign * FAR) / FAR;
        let near = loss.value(sign * NEAR) / NEAR;
        far.is_finite() && far <= 1.01 * near.max(f64::MIN_POSITIVE)
    })
}

/// `liminf L(t)/|t|` probed at `|t| = 10⁶` (linear growth rate).
pub fn linear_growth_rate(loss: &LossSpec) -> f64 {
    const FAR: f64 = 1e6;
    (loss.value(FAR) / FAR).min(loss.value(-FAR) / FAR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegularizerSpec {
    /// `½‖v‖²`
    Ridge,
    /// `‖v‖₁`
    Lasso,
    /// `mix ‖v‖₁ + (1 − mix) ½‖v‖²`
    ElasticNet { mix: f64 },
}

impl RegularizerSpec {
    pub fn elastic_net(mix: f64) -> Result<Self> {
        if !(mix > 0.0 && mix < 1.0) {
            return Err(invalid("mix", format!("must lie in (0, 1), got {mix}")));
        }
        Ok(RegularizerSpec::ElasticNet { mix })
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegularizerSpec::Ridge => "ridge",
            RegularizerSpec::Lasso => "lasso",
            RegularizerSpec::ElasticNet { .. } => "elastic-net",
        }
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        let l1 = || v.iter().map(|x| x.abs()).sum::<f64>();
        let l2 = || 0.5 * v.iter().map(|x| x * x).sum::<f64>();
        match *self {
            RegularizerSpec::Ridge => l2(),
            RegularizerSpec::Lasso => l1(),
            RegularizerSpec::ElasticNet { mix } => mix * l1() + (1.0 - mix) * l2(),
        }
    }

    /// `r(to) − r(from)` summed coordinate-wise, without forming the two
    /// totals.
    pub fn value_change(&self, from: &[f64], to: &[f64]) -> f64 {
        let l1 = || from.iter().zip(to).map(|(a, b)| b.abs() - a.abs()).sum::<f64>();
        let l2 = || 0.5 * from.iter().zip(to).map(|(a, b)| (b - a) * (b + a)).sum::<f64>();
        match *self {
            RegularizerSpec::Ridge => l2(),
            RegularizerSpec::Lasso => l1(),
            RegularizerSpec::ElasticNet { mix } => mix * l1() + (1.0 - mix) * l2(),
        }
    }

    /// Scalar prox `argmin_z { η r(z) + (z − x)²/2 }` of the separable
    /// penalty.
    pub fn prox_scalar(&self, eta: f64, x: f64) -> f64 {
        match *self {
            RegularizerSpec::Ridge => x / (1.0 + eta),
            RegularizerSpec::Lasso => soft_threshold(x, eta),
            RegularizerSpec::ElasticNet { mix } => {
                soft_threshold(x, eta * mix) / (1.0 + eta * (1.0 - mix))
            }
        }
    }

    /// Coordinate-wise prox applied to a vector.
    pub fn prox(&self, eta: f64, v: &[f64]) -> Result<Vec<f64>> {
        check_step(eta)?;
        Ok(v.iter().map(|&x| self.prox_scalar(eta, x)).collect())
    }

    /// Coordinate-wise prox in place, shifting by `center`:
    /// `out = center + prox(v − center)`.
    pub fn prox_centered_in_place(&self, eta: f64, v: &mut [f64], center: &[f64]) {
        for (x, &c) in v.iter_mut().zip(center) {
            *x = c + self.prox_scalar(eta, *x - c);
        }
    }
}
