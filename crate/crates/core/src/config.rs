//! Analysis parameters. Defaults reproduce the reference configuration
//! (`h_opt = 0.7`, `sigma_h = 0.1`, equal weights, five-epoch window).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a per-epoch quantity is evaluated against the epoch index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    /// Computed once over the full recorded series.
    Retrospective,
    /// Epoch `t` only sees samples `1..=t`.
    Causal,
}

impl SeriesMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesMode::Retrospective => "retrospective",
            SeriesMode::Causal => "causal",
        }
    }
}

/// Which integration series is z-scored for the inter-field synchrony.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationField {
    /// Gaussian-tuned `H_eff` (the ingredient of the composite index).
    Heff,
    /// Untuned layer-mean Hurst exponent.
    Hraw,
}

/// Which H_eff summary feeds the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeffSummary {
    /// Mean over the final `late_fraction` of epochs.
    Late,
    /// Mean over every defined epoch.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaxonomyConfig {
    pub heff_summary: HeffSummary,
    /// Fraction of the trailing epochs averaged for the late H_eff level.
    pub late_fraction: f64,
    /// Second-half/first-half volatility ratio below which the trend collapses rapidly.
    pub rapid_ratio: f64,
    /// Ratio below which the trend is a slow collapse.
    pub slow_ratio: f64,
    /// Relative band around the first-half mean counted as flat.
    pub flat_band: f64,
    pub high_heff: f64,
    pub low_heff: f64,
    pub partial_heff_max: f64,
    /// Inter-field synchrony above which a run counts as tightly locked.
    pub rigid_r: f64,
    /// Maximum |r(H_z, M_z)| for weak coupling.
    pub weak_r: f64,
}

impl Default for TaxonomyConfig {
    fn default() -> Self {
        Self {
            heff_summary: HeffSummary::Late,
            late_fraction: 0.25,
            rapid_ratio: 0.6,
            slow_ratio: 0.85,
            flat_band: 0.15,
            high_heff: 0.85,
            low_heff: 0.15,
            partial_heff_max: 0.50,
            rigid_r: 0.80,
            weak_r: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub h_opt: f64,
    pub sigma_h: f64,
    /// Integration weight; the metastability weight is `1 - w_h`.
    pub w_h: f64,
    pub rolling_window: usize,
    pub volatility_threshold: f64,
    pub phase_mode: SeriesMode,
    pub dfa_mode: SeriesMode,
    pub dfa_min_scale: usize,
    pub plateau_fraction: f64,
    pub hz_field: IntegrationField,
    pub taxonomy: TaxonomyConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            h_opt: 0.7,
            sigma_h: 0.1,
            w_h: 0.5,
            rolling_window: 5,
            volatility_threshold: 0.30,
            phase_mode: SeriesMode::Retrospective,
            dfa_mode: SeriesMode::Causal,
            dfa_min_scale: 4,
            plateau_fraction: 0.99,
            hz_field: IntegrationField::Heff,
            taxonomy: TaxonomyConfig::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn w_m(&self) -> f64 {
        1.0 - self.w_h
    }

    /// Shortest prefix that yields a Hurst estimate.
    pub fn min_dfa_prefix(&self) -> usize {
        4 * self.dfa_min_scale
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("h_opt", self.h_opt),
            ("sigma_h", self.sigma_h),
            ("w_h", self.w_h),
            ("volatility_threshold", self.volatility_threshold),
            ("plateau_fraction", self.plateau_fraction),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite, got {v}")));
            }
        }
        if self.sigma_h <= 0.0 {
            return Err(Error::domain(format!("sigma_h must be > 0, got {}", self.sigma_h)));
        }
        if !(0.0..=1.0).contains(&self.w_h) {
            return Err(Error::domain(format!("w_h must lie in [0,1], got {}", self.w_h)));
        }
        if self.rolling_window < 2 {
            return Err(Error::domain(format!(
                "rolling_window must be >= 2, got {}",
                self.rolling_window
            )));
        }
        if self.volatility_threshold <= 0.0 {
            return Err(Error::domain("volatility_threshold must be > 0"));
        }
        if self.dfa_min_scale < 4 {
            return Err(Error::domain(format!(
                "dfa_min_scale must be >= 4, got {}",
                self.dfa_min_scale
            )));
        }
        if !(self.plateau_fraction > 0.0 && self.plateau_fraction <= 1.0) {
            return Err(Error::domain(format!(
                "plateau_fraction must lie in (0,1], got {}",
                self.plateau_fraction
            )));
        }
        let t = &self.taxonomy;
        if !(t.late_fraction > 0.0 && t.late_fraction <= 1.0) {
            return Err(Error::domain("late_fraction must lie in (0,1]"));
        }
        if !(t.low_heff <= t.partial_heff_max && t.partial_heff_max <= t.high_heff) {
            return Err(Error::domain(
                "taxonomy H_eff gates must satisfy low_heff <= partial_heff_max <= high_heff",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = AnalysisConfig::default();
        c.validate().unwrap();
        assert_eq!(c.w_h + c.w_m(), 1.0);
        assert_eq!(c.min_dfa_prefix(), 16);
    }

    #[test]
    fn rejects_out_of_range_weight() {
        let c = AnalysisConfig {
            w_h: 1.2,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Domain(m)) if m.contains("[0,1]")));
    }

    #[test]
    fn rejects_small_window_and_scale() {
        let c = AnalysisConfig {
            rolling_window: 1,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = AnalysisConfig {
            dfa_min_scale: 3,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = AnalysisConfig {
            sigma_h: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: AnalysisConfig = serde_json::from_str(r#"{"h_opt":0.6}"#).unwrap();
        assert_eq!(c.h_opt, 0.6);
        assert_eq!(c.rolling_window, 5);
    }
}
