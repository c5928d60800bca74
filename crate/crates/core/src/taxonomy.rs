//! Four-state classification of a completed analysis.
//!
//! Gates are taken from [`TaxonomyConfig`]; with the defaults the rules are:
//!
//! 1. rigidly synchronised: late H_eff < 0.15, r(H_z,M_z) > 0.80, volatility flat or elevated
//! 2. stable convergent: late H_eff > 0.85, volatility collapsing rapidly, r(H_z,M_z) < 0
//! 3. metastable high-integration: late H_eff > 0.85, volatility not collapsing rapidly
//! 4. partial integration: 0.15 <= late H_eff <= 0.50, volatility collapsing, |r(H_z,M_z)| < 0.5
//!
//! Anything else is unclassified.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::TaxonomyConfig;
use crate::error::{Error, Result};
use crate::series::MetricSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    StableConvergent,
    MetastableHighIntegration,
    PartialIntegration,
    RigidlySynchronised,
    Unclassified,
}

impl StateLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StateLabel::StableConvergent => "stable_convergent",
            StateLabel::MetastableHighIntegration => "metastable_high_integration",
            StateLabel::PartialIntegration => "partial_integration",
            StateLabel::RigidlySynchronised => "rigidly_synchronised",
            StateLabel::Unclassified => "unclassified",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            StateLabel::StableConvergent => "Stable Convergent",
            StateLabel::MetastableHighIntegration => "Metastable High-Integration",
            StateLabel::PartialIntegration => "Partial Integration",
            StateLabel::RigidlySynchronised => "Rigidly Synchronised",
            StateLabel::Unclassified => "Unclassified",
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolatilityTrend {
    RapidlyCollapsing,
    SlowlyCollapsing,
    PersistentlyElevated,
    FlatNonconverging,
}

impl VolatilityTrend {
    pub fn as_str(self) -> &'static str {
        match self {
            VolatilityTrend::RapidlyCollapsing => "rapidly_collapsing",
            VolatilityTrend::SlowlyCollapsing => "slowly_collapsing",
            VolatilityTrend::PersistentlyElevated => "persistently_elevated",
            VolatilityTrend::FlatNonconverging => "flat_nonconverging",
        }
    }
}

impl fmt::Display for VolatilityTrend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for VolatilityTrend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rapidly_collapsing" => Ok(Self::RapidlyCollapsing),
            "slowly_collapsing" => Ok(Self::SlowlyCollapsing),
            "persistently_elevated" => Ok(Self::PersistentlyElevated),
            "flat_nonconverging" => Ok(Self::FlatNonconverging),
            other => Err(Error::domain(format!("unknown volatility trend `{other}`"))),
        }
    }
}

/// Inputs to the classifier. Missing entries mean the quantity could not be
/// computed (e.g. a degenerate field); rules that need them do not fire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxonomySignature {
    pub heff_late: Option<f64>,
    pub trend: Option<VolatilityTrend>,
    pub r_hz_mz: Option<f64>,
    pub r_psi_acc: Option<f64>,
}

impl TaxonomySignature {
    pub fn new(heff_late: f64, trend: VolatilityTrend, r_hz_mz: f64, r_psi_acc: Option<f64>) -> Self {
        Self {
            heff_late: Some(heff_late),
            trend: Some(trend),
            r_hz_mz: Some(r_hz_mz),
            r_psi_acc,
        }
    }
}

/// Minimum number of volatility values needed to call a trend.
pub const MIN_TREND_VALUES: usize = 6;

/// Compares first-half mean `F`, second-half mean `S` and final value `L`
/// of the present volatility values.
pub fn volatility_trend(sigma_psi: &MetricSeries, threshold: f64, gates: &TaxonomyConfig) -> Result<VolatilityTrend> {
    let values: Vec<f64> = sigma_psi.present().map(|(_, v)| v).collect();
    if values.len() < MIN_TREND_VALUES {
        return Err(Error::insufficient(format!(
            "volatility trend needs {MIN_TREND_VALUES} values, got {}",
            values.len()
        )));
    }
    let mid = values.len() / 2;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let first = mean(&values[..mid]);
    let second = mean(&values[mid..]);
    let last = *values.last().expect("non-empty");

    Ok(if last < threshold && second < gates.rapid_ratio * first {
        VolatilityTrend::RapidlyCollapsing
    } else if second < gates.slow_ratio * first && last >= threshold {
        VolatilityTrend::SlowlyCollapsing
    } else if (second - first).abs() <= gates.flat_band * first && last >= threshold {
        VolatilityTrend::FlatNonconverging
    } else {
        VolatilityTrend::PersistentlyElevated
    })
}

pub fn classify_state(sig: &TaxonomySignature, gates: &TaxonomyConfig) -> StateLabel {
    use VolatilityTrend::*;
    let (Some(heff), Some(trend)) = (sig.heff_late, sig.trend) else {
        return StateLabel::Unclassified;
    };
    let r = sig.r_hz_mz;

    if heff < gates.low_heff
        && r.is_some_and(|r| r > gates.rigid_r)
        && matches!(trend, FlatNonconverging | PersistentlyElevated)
    {
        return StateLabel::RigidlySynchronised;
    }
    if heff > gates.high_heff && trend == RapidlyCollapsing && r.is_some_and(|r| r < 0.0) {
        return StateLabel::StableConvergent;
    }
    if heff > gates.high_heff && matches!(trend, PersistentlyElevated | SlowlyCollapsing | FlatNonconverging) {
        return StateLabel::MetastableHighIntegration;
    }
    if (gates.low_heff..=gates.partial_heff_max).contains(&heff)
        && matches!(trend, SlowlyCollapsing | RapidlyCollapsing)
        && r.is_some_and(|r| r.abs() < gates.weak_r)
    {
        return StateLabel::PartialIntegration;
    }
    StateLabel::Unclassified
}

/// Mean of the present values among the trailing `fraction` of epochs
/// (at least one epoch).
pub fn late_mean(series: &MetricSeries, fraction: f64) -> Option<f64> {
    let n = series.len();
    let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
    let tail: Vec<f64> = series.as_slice()[n.saturating_sub(k)..]
        .iter()
        .flatten()
        .copied()
        .collect();
    (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
}
