//! Regularization paths of penalized M-estimators, their Gaussian limit
//! processes, and Monte Carlo checks of the path-level limit theory.

pub mod checks;
pub mod contrasts;
pub mod error;
pub mod linalg;
pub mod limitprocess;
pub mod linmodel;
pub mod montecarlo;
pub mod pathsolvers;
pub mod penalties;
pub mod rng;

pub use contrasts::{ContrastSpec, LimitForm, ScoreInfo};
pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use linmodel::{DesignDistribution, DesignSample, GlmFamily, NoiseKind, NoiseSpec, TrueModel};
pub use pathsolvers::{PathSolution, TGrid};
pub use penalties::{LimitPenaltySpec, PenaltySpec};
