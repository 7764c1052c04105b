//! Trial-offer markets with social influence and position bias.
//!
//! Consumers belong to one of `K` classes and choose which item to try with a
//! mixed multinomial logit whose utilities combine position visibility, the
//! item's intrinsic appeal and the popularity signal. A tried item is bought
//! with a class-specific quality probability.
//!
//! The market math is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the simulation engine and experiment drivers
//! use throughout.

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod model;
pub mod policies;
pub mod scalar;

pub use error::{MarketError, Result};
pub use model::{
    derive_class_weights, market_shares, purchase_probability_next, trial_probabilities,
    MarketState, PopularitySignal, Ranking, Rankings, SignalMode, TrialDistribution,
};
pub use policies::{PerformanceSolver, PolicyKind, PolicySpec};
pub use scalar::Scalar;

/// Double-precision market instance.
pub type MarketConfig = model::Market<f64>;
/// Single-precision market instance.
pub type MarketConfigF32 = model::Market<f32>;
/// Double-precision two-class logit instance.
pub type TwoClassLogitInstance = policies::TwoClassLogit<f64>;
/// Double-precision asymptotic report.
pub type AsymptoticReport = analysis::AsymptoticReport<f64>;
/// Double-precision convergence diagnostics.
pub type ConvergenceDiagnostics = analysis::ConvergenceDiagnostics<f64>;
