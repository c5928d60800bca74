//! Dynamical training diagnostics computed from epoch-indexed
//! layer-activation traces: DFA-based integration, Kuramoto metastability,
//! a composite stability index, and the derived convergence diagnostics.

pub mod analysis;
pub mod composite;
pub mod config;
pub mod dfa;
pub mod error;
pub mod sensitivity;
pub mod series;
pub mod synchrony;
pub mod synthgen;
pub mod taxonomy;
pub mod trace;

pub use analysis::{analyze, AnalysisReport};
pub use config::AnalysisConfig;
pub use error::{Error, Result};
pub use series::MetricSeries;
pub use taxonomy::{StateLabel, VolatilityTrend};
pub use trace::{ActivationTrace, EpochRecord, TraceFormat};
