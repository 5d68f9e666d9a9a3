//! Experiment configuration: desk and paper-scale defaults, TOML merging and
//! validation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::convex::RegularizerSpec;
use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::spectrum::{CovarianceModel, DesignKind};
use crate::tails::{TailFamily, TailLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    Paradox,
    Floor,
    Transient,
    Trichotomy,
    Universality,
    Concentration,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::Paradox,
        ExperimentName::Floor,
        ExperimentName::Transient,
        ExperimentName::Trichotomy,
        ExperimentName::Universality,
        ExperimentName::Concentration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Paradox => "paradox",
            ExperimentName::Floor => "floor",
            ExperimentName::Transient => "transient",
            ExperimentName::Trichotomy => "trichotomy",
            ExperimentName::Universality => "universality",
            ExperimentName::Concentration => "concentration",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown experiment `{s}`; expected one of paradox, floor, transient, trichotomy, universality, concentration"
                ))
            })
    }
}

/// Estimators the harness knows how to build from the `[estimators]` section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorId {
    Ols,
    FixedRidge,
    TransferRidge,
    TransferLasso,
    TransferEnet,
    Huber,
}

impl EstimatorId {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::Ols => "ols",
            EstimatorId::FixedRidge => "fixed-ridge",
            EstimatorId::TransferRidge => "transfer-ridge",
            EstimatorId::TransferLasso => "transfer-lasso",
            EstimatorId::TransferEnet => "transfer-enet",
            EstimatorId::Huber => "huber",
        }
    }
}

/// Which version of the noise an estimator sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseVariant {
    /// Clipped at `scale · τ_n`.
    Winsorized,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: ExperimentName,
    pub n: usize,
    pub p: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub design: DesignKind,
    /// Noise scales, or effective variances for `transient`.
    pub sweep: Vec<f64>,
    /// Sample sizes for `concentration`.
    pub n_grid: Vec<usize>,
    /// Record per-fit wall time. Off by default so outputs stay byte-stable.
    pub record_timing: bool,
    pub paper_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceKindName {
    Identity,
    Ar1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSection {
    pub kind: CovarianceKindName,
    /// AR(1) correlation; ignored for the identity.
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub family: TailFamily,
    /// Tail index; the degrees of freedom for Student-t.
    pub alpha: f64,
    /// Base scale multiplying every sweep value.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub sparsity: f64,
    pub delta_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub include: Vec<EstimatorId>,
    pub lambda_tilde: f64,
    pub fixed_lambda: f64,
    pub huber_k: f64,
    pub huber_lambda: f64,
    pub enet_mix: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub covariance: CovarianceSection,
    pub noise: NoiseSection,
    pub signal: SignalSection,
    pub estimators: EstimatorSection,
}

/// `k` points evenly spaced in `log10` between `10^lo` and `10^hi`.
pub fn logspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo)],
        _ => (0..k)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (k - 1) as f64))
            .collect(),
    }
}

fn with_zero(mut grid: Vec<f64>) -> Vec<f64> {
    grid.insert(0, 0.0);
    grid
}

impl ExperimentConfig {
    /// Desk-scale protocol: `n = 800`, `p = 400`, AR(1) with `ρ = 0.5`,
    /// Student-t noise with 1.5 degrees of freedom.
    pub fn desk(name: ExperimentName) -> Self {
        use EstimatorId::*;
        let (replications, sweep, include) = match name {
            ExperimentName::Paradox => (100, with_zero(logspace(0.0, 3.0, 10)), vec![Ols, FixedRidge, TransferRidge]),
            ExperimentName::Floor => (100, with_zero(logspace(0.0, 3.0, 10)), vec![TransferRidge, TransferLasso]),
            ExperimentName::Transient => (200, logspace(0.0, 3.0, 10), vec![TransferRidge]),
            ExperimentName::Trichotomy => (100, logspace(0.0, 3.0, 10), vec![Ols, FixedRidge, Huber, TransferRidge]),
            ExperimentName::Universality => (100, logspace(0.0, 3.0, 5), vec![TransferRidge]),
            ExperimentName::Concentration => (200, Vec::new(), Vec::new()),
        };
        let noise = match name {
            ExperimentName::Concentration => NoiseSection {
                family: TailFamily::SymmetricPareto,
                alpha: 1.5,
                scale: 1.0,
            },
            _ => NoiseSection {
                family: TailFamily::StudentT,
                alpha: 1.5,
                scale: 1.0,
            },
        };
        Self {
            experiment: ExperimentSection {
                name,
                n: 800,
                p: 400,
                replications,
                master_seed: 20_240_601,
                design: DesignKind::Gaussian,
                sweep,
                n_grid: if name == ExperimentName::Concentration {
                    vec![1_000, 10_000, 100_000]
                } else {
                    Vec::new()
                },
                record_timing: false,
                paper_scale: false,
            },
            covariance: CovarianceSection {
                kind: CovarianceKindName::Ar1,
                rho: 0.5,
            },
            noise,
            signal: SignalSection {
                sparsity: 0.1,
                delta_norm: 1.0,
            },
            estimators: EstimatorSection {
                include,
                lambda_tilde: 1.0,
                fixed_lambda: 0.1,
                huber_k: 1.5,
                huber_lambda: 0.1,
                enet_mix: 0.5,
            },
        }
    }

    /// Long-run protocol: `n = 2000`, `p = 1000`, 500 replications and 25
    /// sweep points.
    pub fn paper(name: ExperimentName) -> Self {
        let mut cfg = Self::desk(name);
        let e = &mut cfg.experiment;
        e.paper_scale = true;
        if name != ExperimentName::Concentration {
            e.n = 2000;
            e.p = 1000;
        }
        e.replications = 500;
        e.sweep = match name {
            ExperimentName::Paradox | ExperimentName::Floor => with_zero(logspace(0.0, 3.0, 25)),
            ExperimentName::Transient | ExperimentName::Trichotomy => logspace(0.0, 3.0, 25),
            ExperimentName::Universality => logspace(0.0, 3.0, 5),
            ExperimentName::Concentration => Vec::new(),
        };
        cfg
    }

    pub fn defaults(name: ExperimentName, paper_scale: bool) -> Self {
        if paper_scale {
            Self::paper(name)
        } else {
            Self::desk(name)
        }
    }

    /// Overlays a user TOML document on the defaults for `name`.
    ///
    /// A `[experiment] name` in the document, when present, must agree with
    /// `name`. Unknown keys are rejected.
    pub fn from_toml_over_defaults(name: ExperimentName, paper_scale: bool, text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let base = toml::Table::try_from(Self::defaults(name, paper_scale))
            .map_err(|e| Error::Config(e.to_string()))?;
        let merged = merge_tables(base, user);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if cfg.experiment.name != name {
            return Err(Error::Config(format!(
                "config is for experiment `{}` but `{}` was requested",
                cfg.experiment.name, name
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn name(&self) -> ExperimentName {
        self.experiment.name
    }

    pub fn covariance_model(&self) -> Result<CovarianceModel> {
        match self.covariance.kind {
            CovarianceKindName::Identity => CovarianceModel::identity(self.experiment.p),
            CovarianceKindName::Ar1 => CovarianceModel::ar1(self.experiment.p, self.covariance.rho),
        }
    }

    /// The noise law at unit sweep value.
    pub fn noise_law(&self) -> Result<TailLaw> {
        TailLaw::new(self.noise.family, self.noise.alpha)?.with_scale(self.noise.scale)
    }

    /// The unscaled noise law.
    pub fn unit_noise_law(&self) -> Result<TailLaw> {
        TailLaw::new(self.noise.family, self.noise.alpha)
    }

    /// Resolved estimator list, in `include` order.
    pub fn estimator_plan(&self) -> Result<Vec<(EstimatorConfig, NoiseVariant)>> {
        let e = &self.estimators;
        e.include
            .iter()
            .map(|&id| {
                let name = id.as_str();
                let built = match id {
                    EstimatorId::Ols => (EstimatorConfig::ols(name), NoiseVariant::Winsorized),
                    EstimatorId::FixedRidge => {
                        (EstimatorConfig::fixed_ridge(name, e.fixed_lambda), NoiseVariant::Winsorized)
                    }
                    EstimatorId::TransferRidge => (
                        EstimatorConfig::transfer(name, RegularizerSpec::Ridge, e.lambda_tilde),
                        NoiseVariant::Winsorized,
                    ),
                    EstimatorId::TransferLasso => (
                        EstimatorConfig::transfer(name, RegularizerSpec::Lasso, e.lambda_tilde),
                        NoiseVariant::Winsorized,
                    ),
                    EstimatorId::TransferEnet => (
                        EstimatorConfig::transfer(name, RegularizerSpec::elastic_net(e.enet_mix)?, e.lambda_tilde),
                        NoiseVariant::Winsorized,
                    ),
                    // bounded-conjugate losses are analysed on the original noise
                    EstimatorId::Huber => (EstimatorConfig::huber(name, e.huber_k, e.huber_lambda)?, NoiseVariant::Raw),
                };
                Ok(built)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let x = &self.experiment;
        if x.replications == 0 {
            return bad("experiment.replications must be >= 1".into());
        }
        if x.replications >= 1 << 24 {
            return bad("experiment.replications is too large".into());
        }
        let concentration = x.name == ExperimentName::Concentration;
        if concentration {
            if x.n_grid.is_empty() {
                return bad("experiment.n_grid must be non-empty".into());
            }
            if x.n_grid.windows(2).any(|w| w[0] >= w[1]) || x.n_grid[0] == 0 {
                return bad("experiment.n_grid must be positive and strictly ascending".into());
            }
        } else {
            if x.sweep.is_empty() {
                return bad("experiment.sweep must be non-empty".into());
            }
            if x.sweep.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return bad("experiment.sweep values must be finite and >= 0".into());
            }
            if x.sweep.windows(2).any(|w| w[0] >= w[1]) {
                return bad("experiment.sweep must be strictly ascending".into());
            }
            if x.n == 0 || x.p == 0 {
                return bad("experiment.n and experiment.p must be >= 1".into());
            }
            if self.estimators.include.is_empty() {
                return bad("estimators.include must name at least one estimator".into());
            }
            let mut seen = self.estimators.include.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != self.estimators.include.len() {
                return bad("estimators.include lists an estimator twice".into());
            }
            if self.estimators.include.contains(&EstimatorId::Ols) && x.n <= x.p {
                return bad(format!("ols needs n > p (n = {}, p = {})", x.n, x.p));
            }
            if !(0.0..=1.0).contains(&self.signal.sparsity) {
                return bad("signal.sparsity must lie in [0, 1]".into());
            }
            if !(self.signal.delta_norm >= 0.0 && self.signal.delta_norm.is_finite()) {
                return bad("signal.delta_norm must be finite and >= 0".into());
            }
            self.covariance_model().map_err(|e| Error::Config(format!("covariance: {e}")))?;
            self.estimator_plan().map_err(|e| Error::Config(format!("estimators: {e}")))?;
            for (cfg, _) in self.estimator_plan()? {
                cfg.validate(x.n, x.p).map_err(|e| Error::Config(format!("estimator {}: {e}", cfg.id)))?;
            }
        }
        if !(self.noise.scale > 0.0 && self.noise.scale.is_finite()) {
            return bad("noise.scale must be finite and > 0".into());
        }
        self.unit_noise_law().map_err(|e| Error::Config(format!("noise: {e}")))?;
        Ok(())
    }
}

fn merge_tables(mut base: toml::Table, user: toml::Table) -> toml::Table {
    for (key, value) in user {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => {
                let merged = merge_tables(std::mem::take(b), u);
                *b = merged;
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
    base
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        for name in ExperimentName::ALL {
            for paper in [false, true] {
                let cfg = ExperimentConfig::defaults(name, paper);
                cfg.validate().unwrap();
                let text = cfg.to_toml().unwrap();
                let back = ExperimentConfig::from_toml_over_defaults(name, paper, &text).unwrap();
                assert_eq!(back, cfg);
            }
        }
    }

    #[test]
    fn partial_override_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml_over_defaults(
            ExperimentName::Floor,
            false,
            "[experiment]\nreplications = 7\n[covariance]\nkind = \"identity\"\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment.replications, 7);
        assert_eq!(cfg.experiment.n, 800);
        assert_eq!(cfg.covariance.kind, CovarianceKindName::Identity);
        assert!(cfg.covariance_model().unwrap().is_identity());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml_over_defaults(ExperimentName::Floor, false, "[experiment]\nreplicatons = 3\n")
            .unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("replicatons")), "{err}");
        let err = ExperimentConfig::from_toml_over_defaults(ExperimentName::Floor, false, "[bogus]\nx = 1\n").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("bogus")), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[experiment]\nreplications = 0\n",
            "[experiment]\nsweep = [3.0, 1.0]\n",
            "[experiment]\nsweep = []\n",
            "[noise]\nalpha = 2.5\n",
            "[experiment]\nname = \"paradox\"\n",
            "[experiment]\np = 900\n[estimators]\ninclude = [\"ols\"]\n",
        ] {
            assert!(
                ExperimentConfig::from_toml_over_defaults(ExperimentName::Floor, false, text).is_err(),
                "{text}"
            );
        }
    }

    #[test]
    fn logspace_endpoints() {
        let g = logspace(0.0, 3.0, 10);
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 1.0);
        assert!((g[9] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn huber_sees_raw_noise() {
        let plan = ExperimentConfig::desk(ExperimentName::Trichotomy).estimator_plan().unwrap();
        for (cfg, variant) in plan {
            let expected = if cfg.id == "huber" { NoiseVariant::Raw } else { NoiseVariant::Winsorized };
            assert_eq!(variant, expected);
        }
    }
}
