//! Quadrature rules: adaptive Gauss–Kronrod on finite intervals and
//! Gauss–Hermite expectations under a standard normal.

use crate::error::{Error, Result};

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        // odd Kronrod nodes are the Gauss nodes
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` by globally adaptive 15-point Gauss–Kronrod
/// bisection until the summed error estimate is within `rel_tol` of the
/// integral (or below `f64::MIN_POSITIVE` in absolute terms).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = kronrod15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::IntegrationFailure {
                tolerance: rel_tol,
                estimate: total,
                error: err,
            });
        }
        if err <= rel_tol * total.abs() || err < f64::MIN_POSITIVE {
            return Ok(total);
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::IntegrationFailure {
                tolerance: rel_tol,
                estimate: total,
                error: err,
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval exhausted at machine precision
            return Err(Error::IntegrationFailure {
                tolerance: rel_tol,
                estimate: total,
                error: err,
            });
        }
        let (v1, e1) = kronrod15(&f, lo, mid);
        let (v2, e2) = kronrod15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// Gauss–Hermite rule normalized for expectations under `N(0, 1)`:
/// `E[f(Z)] ≈ Σ w_i f(x_i)` with `Σ w_i = 1`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `m`-node rule by Newton iteration on the orthonormal
    /// Hermite recurrence, then rescales from the `exp(-x²)` weight to the
    /// standard normal density.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "need at least one node");
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut phys_nodes = vec![0.0; m];
        let mut phys_weights = vec![0.0; m];
        let half = m.div_ceil(2);
        let mf = m as f64;
        let mut z = 0.0;
        for i in 0..half {
            z = match i {
                0 => (2.0 * mf + 1.0).sqrt() - 1.855_75 * (2.0 * mf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * mf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * phys_nodes[0],
                3 => 1.91 * z - 0.91 * phys_nodes[1],
                _ => 2.0 * z - phys_nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..m {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * mf).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            phys_nodes[i] = z;
            phys_nodes[m - 1 - i] = -z;
            phys_weights[i] = 2.0 / (pp * pp);
            phys_weights[m - 1 - i] = phys_weights[i];
        }
        if m % 2 == 1 {
            // the recursion's middle root can land on ±tiny; pin it
            phys_nodes[m / 2] = 0.0;
        }
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let nodes = phys_nodes
            .iter()
            .rev()
            .map(|x| x * std::f64::consts::SQRT_2)
            .collect();
        let weights = phys_weights.iter().rev().map(|w| w / sqrt_pi).collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
