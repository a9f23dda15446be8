//! Azuma-type concentration for martingale difference sequences with
//! subgaussian conditional tails.
//!
//! The crate has four layers:
//!
//! * [`bounds`]: closed-form deviation bounds, the MGF envelope and the
//!   Chernoff optimization behind them.
//! * [`distribution`] and [`verify`]: reference distributions and numerical
//!   checks of every inequality the MGF argument relies on.
//! * [`generator`] and [`sim`]: martingale difference generators with
//!   declared envelopes and a deterministic Monte-Carlo harness that checks
//!   the deviation bound empirically.
//! * [`quadrature`]: the integrator behind the MGF cross-check.

pub mod bounds;
pub mod distribution;
pub mod error;
pub mod generator;
pub mod params;
pub mod quadrature;
pub mod rng;
pub mod sim;
pub mod verify;

pub use bounds::{
    chernoff_exponent, classic_azuma_epsilon, mgf_envelope, optimal_s, params_from_bound,
    required_horizon, second_moment_envelope, subgaussian_delta, subgaussian_epsilon,
};
pub use distribution::{DistributionSpec, Family};
pub use error::{Error, Result};
pub use generator::{GeneratorFamily, GeneratorSpec, MagnitudeRule, MarkovState, ScaleRule};
pub use params::{ChernoffPoint, Deviation, DeviationQuery, SubgaussianParams};
pub use sim::{
    conditional_mean_check, generate_paths, tightness, validate_bound, SimulationSummary, Simulator,
};
pub use verify::{LogGrid, VerificationReport};
