//! End-to-end analysis of a trace and the serialized report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::composite::{
    minmax_normalize, pearson, plateau_epoch, psi_series, rolling_volatility, threshold_crossing, zscore,
};
use crate::config::{AnalysisConfig, HeffSummary, IntegrationField};
use crate::dfa::{heff_series, FullSeriesHurst};
use crate::error::{Error, Result, ResultExt};
use crate::series::MetricSeries;
use crate::synchrony::synchrony_pipeline;
use crate::taxonomy::{classify_state, late_mean, volatility_trend, StateLabel, TaxonomySignature};
use crate::trace::{validate_trace, ActivationTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSeries {
    pub layer: String,
    pub hurst: MetricSeries,
}

/// Every per-epoch series, aligned to the input trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSeries {
    pub epoch: Vec<u32>,
    pub accuracy: MetricSeries,
    pub h_raw: MetricSeries,
    pub h_eff: MetricSeries,
    pub h_eff_norm: MetricSeries,
    pub r: MetricSeries,
    pub m: MetricSeries,
    pub m_norm: MetricSeries,
    pub psi: MetricSeries,
    pub sigma_psi: MetricSeries,
    pub h_z: MetricSeries,
    pub m_z: MetricSeries,
    pub layer_hurst: Vec<LayerSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSummary {
    pub run_id: String,
    pub layers: Vec<String>,
    pub n_epochs: usize,
    pub best_accuracy: Option<f64>,
    pub mean_heff: Option<f64>,
    pub std_heff: Option<f64>,
    pub heff_late: Option<f64>,
    pub mean_m: Option<f64>,
    pub mean_psi: Option<f64>,
    pub std_psi: Option<f64>,
    pub r_hz_mz: Option<f64>,
    pub r_psi_acc: Option<f64>,
    pub volatility_crossing_epoch: Option<u32>,
    pub accuracy_plateau_epoch: Option<u32>,
    pub full_series_hurst: FullSeriesHurst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyResult {
    pub signature: TaxonomySignature,
    pub state: StateLabel,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportFlags {
    pub heff_norm_degenerate: bool,
    pub m_norm_degenerate: bool,
    /// Quantities that could not be computed, with the reason.
    pub unavailable: Vec<String>,
    /// Advisory messages from trace validation.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub config: AnalysisConfig,
    pub series: ReportSeries,
    pub summary: DiagnosticSummary,
    pub taxonomy: TaxonomyResult,
    pub flags: ReportFlags,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(format!("report serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: format!("invalid report: {e}"),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Keeps the value, or records why it is unavailable. Only "soft" failures
/// (missing or degenerate data) are absorbed; anything else propagates.
fn soft<T>(what: &str, result: Result<T>, flags: &mut ReportFlags) -> Result<Option<T>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_degenerate() || e.is_insufficient_data() => {
            flags.unavailable.push(format!("{what}: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Runs the full pipeline: integration, synchrony, composite index,
/// derived diagnostics and classification.
pub fn analyze(trace: &ActivationTrace, config: &AnalysisConfig) -> Result<AnalysisReport> {
    config.validate()?;
    let mut flags = ReportFlags {
        warnings: validate_trace(trace, config),
        ..Default::default()
    };
    let epochs = trace.epoch_numbers();
    let to_epoch = |idx: usize| epochs[idx];

    let hurst = heff_series(trace, config, config.dfa_mode).context(|| "integration (DFA)".into())?;
    let sync = synchrony_pipeline(trace, config.phase_mode).context(|| "synchrony".into())?;

    let h_norm = minmax_normalize(&hurst.h_eff).context(|| "normalising H_eff".into())?;
    let m_norm = minmax_normalize(&sync.m).context(|| "normalising metastability".into())?;
    flags.heff_norm_degenerate = h_norm.degenerate;
    flags.m_norm_degenerate = m_norm.degenerate;

    let psi = psi_series(&h_norm.series, &m_norm.series, config.w_h, config.w_m())?;
    let sigma_psi = rolling_volatility(&psi, config.rolling_window)?;

    let field = match config.hz_field {
        IntegrationField::Heff => &hurst.h_eff,
        IntegrationField::Hraw => &hurst.h_raw,
    };
    let h_z = soft("H_z", zscore(field), &mut flags)?;
    let m_z = soft("M_z", zscore(&sync.m), &mut flags)?;
    let r_hz_mz = match (&h_z, &m_z) {
        (Some(h), Some(m)) => soft("r(H_z, M_z)", pearson(h, m), &mut flags)?,
        _ => {
            flags
                .unavailable
                .push("r(H_z, M_z): a z-scored field is undefined".into());
            None
        }
    };

    let accuracy = trace.accuracy();
    let (r_psi_acc, plateau) = if trace.has_accuracy() {
        (
            soft("r(Psi, acc)", pearson(&psi, &accuracy), &mut flags)?,
            soft(
                "accuracy plateau",
                plateau_epoch(&accuracy, config.plateau_fraction),
                &mut flags,
            )?,
        )
    } else {
        flags
            .unavailable
            .push("r(Psi, acc) and accuracy plateau: no accuracy recorded".into());
        (None, None)
    };
    let crossing = threshold_crossing(&sigma_psi, config.volatility_threshold);

    let gates = &config.taxonomy;
    let heff_level = match gates.heff_summary {
        HeffSummary::Late => late_mean(&hurst.h_eff, gates.late_fraction),
        HeffSummary::Mean => hurst.h_eff.mean(),
    };
    let trend = soft(
        "volatility trend",
        volatility_trend(&sigma_psi, config.volatility_threshold, gates),
        &mut flags,
    )?;
    let signature = TaxonomySignature {
        heff_late: heff_level,
        trend,
        r_hz_mz,
        r_psi_acc,
    };
    let state = classify_state(&signature, gates);

    let summary = DiagnosticSummary {
        run_id: trace.run_id().to_string(),
        layers: trace.layer_names().to_vec(),
        n_epochs: trace.n_epochs(),
        best_accuracy: accuracy.present().map(|(_, v)| v).reduce(f64::max),
        mean_heff: hurst.h_eff.mean(),
        std_heff: hurst.h_eff.std(),
        heff_late: late_mean(&hurst.h_eff, gates.late_fraction),
        mean_m: sync.m.mean(),
        mean_psi: psi.mean(),
        std_psi: psi.std(),
        r_hz_mz,
        r_psi_acc,
        volatility_crossing_epoch: crossing.map(to_epoch),
        accuracy_plateau_epoch: plateau.map(to_epoch),
        full_series_hurst: hurst.full_series.clone(),
    };

    let n = trace.n_epochs();
    let series = ReportSeries {
        epoch: epochs.clone(),
        accuracy,
        layer_hurst: trace
            .layer_names()
            .iter()
            .zip(hurst.per_layer)
            .map(|(name, s)| LayerSeries {
                layer: name.clone(),
                hurst: s,
            })
            .collect(),
        h_raw: hurst.h_raw,
        h_eff: hurst.h_eff,
        h_eff_norm: h_norm.series,
        r: sync.r,
        m: sync.m,
        m_norm: m_norm.series,
        psi,
        sigma_psi,
        h_z: h_z.unwrap_or_else(|| MetricSeries::missing(n)),
        m_z: m_z.unwrap_or_else(|| MetricSeries::missing(n)),
    };

    Ok(AnalysisReport {
        config: config.clone(),
        series,
        summary,
        taxonomy: TaxonomyResult { signature, state },
        flags,
    })
}
