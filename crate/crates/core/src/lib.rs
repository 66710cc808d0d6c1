//! Stable matching under shared versus independent evaluation noise.
//!
//! Applicants carry a true value; firms only see noisy estimates of it.
//! Under *monoculture* every firm sees the same estimate, under *polyculture*
//! each firm draws its own. The crate provides:
//!
//! * [`distributions`]: value and noise laws and maximum order statistics;
//! * [`continuum`]: the exact continuum economy, solved for its shared
//!   market-clearing cutoff, with match, top-choice and rank functionals;
//! * [`preferences`], [`access`], [`market`]: finite markets with deferred
//!   acceptance, stability checks and per-replication metrics;
//! * [`experiments`]: a seeded, data-parallel replication harness writing CSV.

pub mod access;
pub mod config;
pub mod continuum;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod market;
pub mod parallel;
pub mod preferences;
pub mod quad;
pub mod rng;

pub use access::{AccessDistribution, Strategy};
pub use config::{ExperimentConfig, Suite};
pub use continuum::{CutoffSolution, MarketSpec, Mode};
pub use distributions::{Distribution, MaxOrderSummary};
pub use error::{Error, Result};
pub use experiments::ResultRow;
pub use market::{FiniteMarket, MatchMetrics, Matching};
pub use parallel::Execution;
pub use preferences::{PreferenceKind, PreferenceModel, PreferenceProfile};


