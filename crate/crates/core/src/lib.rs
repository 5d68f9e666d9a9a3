//! Risk of high-dimensional M-estimators under infinite-variance noise.
//!
//! Modules follow the pipeline: heavy-tailed noise models ([`tails`]),
//! covariance spectra ([`spectrum`]), losses and penalties ([`convex`]),
//! finite-sample solvers ([`estimators`]), deterministic risk predictions
//! ([`theory`]) and the seeded Monte Carlo harness ([`experiments`]).

pub mod convex;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod quad;
pub mod rng;
pub mod spectrum;
pub mod tails;
pub mod theory;

pub use convex::{ConjugateClass, LossSpec, RegularizerSpec};
pub use error::{Error, Result};
pub use estimators::{Center, EstimatorConfig, FitResult, LambdaMode, SolverOptions};
pub use experiments::{ExperimentConfig, RiskRecord, Summary};
pub use spectrum::{CovarianceModel, DesignKind, DiscreteSpectrum};
pub use tails::{TailFamily, TailLaw, WinsorPlan};
pub use theory::{RiskPrediction, TheoryInputs};
