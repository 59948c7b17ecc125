//! Bayesian reversal of classical and quantum processes on finite state
//! spaces, with exact fluctuation-relation checks.
//!
//! The crate builds reverse processes by retrodiction: a forward channel
//! `φ(y|x)` together with an invariant distribution `γ` fixes the reverse
//! channel through `γ(y)φ̂(x|y) = γ(x)φ(y|x)`; quantum forward processes
//! (preparation, CPTP channel, POVM) are reversed the same way and land on
//! the Petz reverse channel. The `fluctuation` module turns forward/reverse
//! pairs into ω statistics, discrete Crooks-type relations, Jarzynski-like
//! averages and f-divergences; `scenarios` packages the standard
//! thermodynamic setups (two-measurement work protocols, system–reservoir
//! coarse-graining, work/relaxation steps, microcanonical priors).
//!
//! All numeric code is generic over the scalar type (`scalar::Scalar`);
//! the aliases at the crate root pin `f64`, which the default tolerances
//! are calibrated for.

pub mod alphabet;
pub mod error;
pub mod fluctuation;
pub mod prob;
pub mod quantum;
pub mod scalar;
pub mod scenarios;

pub use alphabet::Alphabet;
pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` aliases for the core types.
pub type Distribution64 = prob::Distribution<f64>;
pub type StochasticChannel64 = prob::StochasticChannel<f64>;
pub type SteadyState64 = prob::SteadyState<f64>;
pub type JointProcess64 = prob::JointProcess<f64>;
pub type RatioTable64 = prob::RatioTable<f64>;
pub type FFamily64 = fluctuation::FFamily<f64>;
pub type DiscreteMeasure64 = fluctuation::DiscreteMeasure<f64>;
pub type DensityMatrix64 = quantum::DensityMatrix<f64>;
pub type KrausChannel64 = quantum::KrausChannel<f64>;
pub type Povm64 = quantum::Povm<f64>;
pub type QuantumProcess64 = quantum::QuantumProcess<f64>;
pub type ScenarioRun64 = scenarios::ScenarioRun<f64>;

/// `f32` aliases; usable with per-call tolerances loosened to single
/// precision.
pub type Distribution32 = prob::Distribution<f32>;
pub type StochasticChannel32 = prob::StochasticChannel<f32>;
pub type JointProcess32 = prob::JointProcess<f32>;
pub type RatioTable32 = prob::RatioTable<f32>;
pub type FFamily32 = fluctuation::FFamily<f32>;
