//! Covariance models, their eigenstructure and the signal geometry.
//!
//! The spectral measure is the exact discrete empirical measure of the
//! realized `Σ` (weight `1/p` per eigenvalue). The offset `Δ = β* − β₀` is
//! carried in eigen-coordinates so that `q_Σ = p⁻¹ Σ_j s_j Δ_j²`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceKind {
    Identity,
    /// `Σ_ij = ρ^{|i-j|}`.
    Ar1 { rho: f64 },
    Explicit(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    kind: CovarianceKind,
    p: usize,
}

impl CovarianceModel {
    pub fn identity(p: usize) -> Result<Self> {
        Self::check_p(p)?;
        Ok(Self {
            kind: CovarianceKind::Identity,
            p,
        })
    }

    pub fn ar1(p: usize, rho: f64) -> Result<Self> {
        Self::check_p(p)?;
        if !(rho > -1.0 && rho < 1.0) {
            return Err(invalid("rho", format!("must lie in (-1, 1), got {rho}")));
        }
        Ok(Self {
            kind: CovarianceKind::Ar1 { rho },
            p,
        })
    }

    pub fn explicit(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() {
            return Err(invalid("sigma", "must be square"));
        }
        let p = sigma.nrows();
        Self::check_p(p)?;
        let asym = (&sigma - sigma.transpose()).norm();
        if asym > 1e-12 * sigma.norm() {
            return Err(invalid("sigma", "must be symmetric"));
        }
        Ok(Self {
            kind: CovarianceKind::Explicit(sigma),
            p,
        })
    }

    fn check_p(p: usize) -> Result<()> {
        if p == 0 {
            return Err(invalid("p", "must be >= 1"));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> &CovarianceKind {
        &self.kind
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let p = self.p;
        match &self.kind {
            CovarianceKind::Identity => DMatrix::identity(p, p),
            CovarianceKind::Ar1 { rho } => {
                DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
            }
            CovarianceKind::Explicit(m) => m.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, CovarianceKind::Identity)
            || matches!(self.kind, CovarianceKind::Ar1 { rho } if rho == 0.0)
    }
}

/// Symmetric eigendecomposition `Σ = U diag(s) Uᵀ`.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    sigma: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

/// Decomposes the covariance; fails if it is not numerically positive
/// definite (`min eig ≤ 1e-12 · max eig`).
pub fn decompose(model: &CovarianceModel) -> Result<Eigensystem> {
    let sigma = model.matrix();
    let eig = SymmetricEigen::new(sigma.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 1e-12 * max) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    Ok(Eigensystem {
        sigma,
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
    })
}

impl Eigensystem {
    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `‖U diag(s) Uᵀ − Σ‖_F / ‖Σ‖_F`.
    pub fn reconstruction_error(&self) -> f64 {
        let u = &self.eigenvectors;
        let rebuilt = u * DMatrix::from_diagonal(&self.eigenvalues) * u.transpose();
        (rebuilt - &self.sigma).norm() / self.sigma.norm()
    }

    /// Symmetric square root `U diag(√s) Uᵀ`.
    pub fn sqrt(&self) -> DMatrix<f64> {
        let u = &self.eigenvectors;
        let root = self.eigenvalues.map(f64::sqrt);
        let mut scaled = u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= root[j];
        }
        scaled * u.transpose()
    }

    /// Spectrum with `Δ = β* − β₀` projected onto the eigenbasis.
    pub fn project_delta(&self, beta_star: &DVector<f64>, beta0: &DVector<f64>) -> Result<DiscreteSpectrum> {
        let p = self.p();
        for (what, v) in [("beta_star", beta_star), ("beta0", beta0)] {
            if v.len() != p {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: p,
                    actual: v.len(),
                });
            }
        }
        let delta = beta_star - beta0;
        let coeffs = self.eigenvectors.tr_mul(&delta);
        Ok(DiscreteSpectrum {
            eigenvalues: self.eigenvalues.iter().copied().collect(),
            delta: coeffs.iter().copied().collect(),
        })
    }

    /// Spectrum with all offsets zero.
    pub fn without_delta(&self) -> DiscreteSpectrum {
        DiscreteSpectrum {
            eigenvalues: self.eigenvalues.iter().copied().collect(),
            delta: vec![0.0; self.p()],
        }
    }
}

/// Eigenvalues `s_j` (weight `1/p` each) with offset coefficients `Δ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSpectrum {
    eigenvalues: Vec<f64>,
    delta: Vec<f64>,
}

impl DiscreteSpectrum {
    pub fn new(eigenvalues: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(invalid("eigenvalues", "must be non-empty"));
        }
        if eigenvalues.len() != delta.len() {
            return Err(Error::DimensionMismatch {
                what: "delta coefficients",
                expected: eigenvalues.len(),
                actual: delta.len(),
            });
        }
        if eigenvalues.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(invalid("eigenvalues", "must be positive and finite"));
        }
        Ok(Self { eigenvalues, delta })
    }

    /// `p` unit eigenvalues.
    pub fn identity(delta: Vec<f64>) -> Result<Self> {
        Self::new(vec![1.0; delta.len()], delta)
    }

    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.p() as f64
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.eigenvalues.iter().copied().zip(self.delta.iter().copied())
    }

    /// `E_S[f(S)]` under the discrete measure.
    pub fn mean_over<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.eigenvalues.iter().map(|&s| f(s)).sum::<f64>() / self.p() as f64
    }

    /// Same spectrum, different offsets.
    pub fn with_delta(&self, delta: Vec<f64>) -> Result<Self> {
        Self::new(self.eigenvalues.clone(), delta)
    }
}

/// `q_Σ = p⁻¹ Σ_j s_j Δ_j²`.
pub fn q_sigma(spectrum: &DiscreteSpectrum) -> f64 {
    spectrum.atoms().map(|(s, d)| s * d * d).sum::<f64>() / spectrum.p() as f64
}

/// `p⁻¹ vᵀ Σ v`, computed without any decomposition.
pub fn sigma_norm_sq(v: &DVector<f64>, sigma: &DMatrix<f64>) -> f64 {
    v.dot(&(sigma * v)) / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    Gaussian,
    Rademacher,
}

/// `X = Z Σ^{1/2}` with i.i.d. standard normal or ±1 entries in `Z`.
///
/// `sqrt_sigma = None` means `Σ = I`.
pub fn sample_design<R: Rng + ?Sized>(
    sqrt_sigma: Option<&DMatrix<f64>>,
    n: usize,
    p: usize,
    kind: DesignKind,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if n == 0 || p == 0 {
        return Err(invalid("n, p", "must be >= 1"));
    }
    if let Some(root) = sqrt_sigma {
        if root.nrows() != p || root.ncols() != p {
            return Err(Error::DimensionMismatch {
                what: "covariance square root",
                expected: p,
                actual: root.nrows(),
            });
        }
    }
    // draw row-major so the stream order does not depend on storage layout
    let mut z = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = match kind {
                DesignKind::Gaussian => StandardNormal.sample(rng),
                DesignKind::Rademacher => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
        }
    }
    Ok(match sqrt_sigma {
        Some(root) => z * root,
        None => z,
    })
}

/// Sparse signal: `round(sparsity · p)` coordinates chosen uniformly without
/// replacement, filled with i.i.d. standard normals.
pub fn sparse_signal<R: Rng + ?Sized>(p: usize, sparsity: f64, rng: &mut R) -> Result<DVector<f64>> {
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(invalid("sparsity", format!("must lie in [0, 1], got {sparsity}")));
    }
    let k = (sparsity * p as f64).round() as usize;
    let mut beta = DVector::zeros(p);
    let mut support: Vec<usize> = index::sample(rng, p, k).into_vec();
    support.sort_unstable();
    for j in support {
        beta[j] = StandardNormal.sample(rng);
    }
    Ok(beta)
}

/// Uniform direction on the sphere of radius `norm`.
pub fn sphere_vector<R: Rng + ?Sized>(p: usize, norm: f64, rng: &mut R) -> DVector<f64> {
    let g = DVector::<f64>::from_fn(p, |_, _| StandardNormal.sample(rng));
    let len = g.norm();
    g * (norm / len)
}
