//! Detrended fluctuation analysis and the Gaussian-tuned integration score.
//!
//! Each layer signal is integrated into a mean-removed profile, split into
//! non-overlapping windows of length `s` (taken from both ends of the series
//! so no tail samples are dropped), detrended with a per-window least-squares
//! line, and summarised as the RMS residual `F(s)`. The Hurst exponent is
//! the log-log slope of `F(s)` against `s`.

use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, SeriesMode};
use crate::error::{Error, Result};
use crate::series::MetricSeries;
use crate::trace::ActivationTrace;

/// Minimum number of scales for a log-log fit.
pub const MIN_FIT_SCALES: usize = 4;
/// Upper bound on the number of scales in a grid.
pub const MAX_GRID_SCALES: usize = 12;
/// The largest scale is `floor(N / MAX_SCALE_DIVISOR)`. With windows taken
/// from both ends this still leaves at least four windows per scale.
pub const MAX_SCALE_DIVISOR: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationCurve {
    pub scales: Vec<usize>,
    pub fluctuations: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub hurst: f64,
    pub fit_r_squared: f64,
    pub n_scales: usize,
}

/// `Y(k) = sum_{s<=k} (x(s) - mean(x))`.
pub fn cumulative_profile(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.len() < 2 {
        return Err(Error::domain(format!(
            "profile needs at least 2 samples, got {}",
            signal.len()
        )));
    }
    if let Some(bad) = signal.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite sample {bad}")));
    }
    // exact zeros for a constant signal, rather than rounding noise
    if signal.iter().all(|&v| v == signal[0]) {
        return Ok(vec![0.0; signal.len()]);
    }
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    Ok(signal
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x - mean;
            Some(*acc)
        })
        .collect())
}

/// Log-spaced integer scales in `[min_scale, floor(n / MAX_SCALE_DIVISOR)]`,
/// deduplicated, at most [`MAX_GRID_SCALES`] of them.
pub fn scale_grid(n: usize, min_scale: usize) -> Vec<usize> {
    let max_scale = n / MAX_SCALE_DIVISOR;
    if min_scale == 0 || max_scale < min_scale {
        return Vec::new();
    }
    let span = max_scale - min_scale + 1;
    if span <= MAX_GRID_SCALES {
        return (min_scale..=max_scale).collect();
    }
    let (lo, hi) = ((min_scale as f64).ln(), (max_scale as f64).ln());
    let steps = MAX_GRID_SCALES - 1;
    let mut scales: Vec<usize> = (0..=steps)
        .map(|i| (lo + (hi - lo) * i as f64 / steps as f64).exp().round() as usize)
        .map(|s| s.clamp(min_scale, max_scale))
        .collect();
    scales.dedup();
    scales
}

/// Sum of squared residuals after a least-squares line fit against `0..len`.
fn detrended_ssr(window: &[f64]) -> f64 {
    let n = window.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = window.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in window.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    window
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let r = y - y_mean - slope * (i as f64 - x_mean);
            r * r
        })
        .sum()
}

/// RMS detrended fluctuation at each scale.
///
/// Scales that fit no complete window are omitted.
pub fn fluctuation_function(profile: &[f64], scales: &[usize]) -> Result<FluctuationCurve> {
    let n = profile.len();
    if let Some(&s) = scales.iter().find(|&&s| s < 4) {
        return Err(Error::domain(format!("scale {s} is below the minimum of 4")));
    }
    if profile.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite profile value"));
    }
    let mut sorted = scales.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut curve = FluctuationCurve {
        scales: Vec::new(),
        fluctuations: Vec::new(),
    };
    for s in sorted {
        let windows = n / s;
        if windows == 0 {
            continue;
        }
        let mut total = 0.0;
        for k in 0..windows {
            let fwd = &profile[k * s..(k + 1) * s];
            let bwd = &profile[n - (k + 1) * s..n - k * s];
            total += detrended_ssr(fwd) / s as f64 + detrended_ssr(bwd) / s as f64;
        }
        curve.scales.push(s);
        curve.fluctuations.push((total / (2 * windows) as f64).sqrt());
    }
    if curve.scales.is_empty() {
        return Err(Error::insufficient(format!(
            "no scale fits a window in a profile of length {n}"
        )));
    }
    let magnitude = profile.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = magnitude * 1e-12;
    if magnitude == 0.0 || curve.fluctuations.iter().any(|&f| f <= floor) {
        return Err(Error::degenerate(
            "profile is perfectly detrended at some scale (constant or linear input)",
        ));
    }
    Ok(curve)
}

/// Least-squares slope of `ln F(s)` on `ln s`.
pub fn fit_hurst(curve: &FluctuationCurve) -> Result<HurstEstimate> {
    let n = curve.scales.len();
    if n < MIN_FIT_SCALES || curve.fluctuations.len() != n {
        return Err(Error::insufficient(format!(
            "Hurst fit needs at least {MIN_FIT_SCALES} scales, got {n}"
        )));
    }
    if curve.fluctuations.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::degenerate("fluctuation function must be positive"));
    }
    let xs: Vec<f64> = curve.scales.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = curve.fluctuations.iter().map(|f| f.ln()).collect();
    let (slope, r2) = ols(&xs, &ys);
    if !slope.is_finite() {
        return Err(Error::Numerical("non-finite Hurst slope".into()));
    }
    Ok(HurstEstimate {
        hurst: slope,
        fit_r_squared: r2,
        n_scales: n,
    })
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - xm) * (y - ym);
        sxx += (x - xm) * (x - xm);
        syy += (y - ym) * (y - ym);
    }
    let slope = sxy / sxx;
    let r2 = if syy <= f64::EPSILON * n * ym.abs().max(1.0) {
        1.0
    } else {
        ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
    };
    (slope, r2)
}

/// Profile, default scale grid, fluctuation curve and fit in one step.
pub fn hurst_exponent(signal: &[f64], min_scale: usize) -> Result<HurstEstimate> {
    let profile = cumulative_profile(signal)?;
    let scales = scale_grid(signal.len(), min_scale);
    if scales.len() < MIN_FIT_SCALES {
        return Err(Error::insufficient(format!(
            "series of length {} admits {} scales; at least {MIN_FIT_SCALES} needed",
            signal.len(),
            scales.len()
        )));
    }
    fit_hurst(&fluctuation_function(&profile, &scales)?)
}

/// Layer-mean Hurst exponent; missing if any layer is missing.
pub fn mean_hurst(per_layer: &[Option<HurstEstimate>]) -> Option<f64> {
    if per_layer.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for est in per_layer {
        sum += est.as_ref()?.hurst;
    }
    Some(sum / per_layer.len() as f64)
}

/// `exp(-(h_raw - h_opt)^2 / (2 sigma_h^2))`.
pub fn gaussian_tuning(h_raw: f64, h_opt: f64, sigma_h: f64) -> Result<f64> {
    if !sigma_h.is_finite() || sigma_h <= 0.0 {
        return Err(Error::domain(format!("sigma_h must be > 0, got {sigma_h}")));
    }
    let d = h_raw - h_opt;
    Ok((-(d * d) / (2.0 * sigma_h * sigma_h)).exp())
}

/// Full-series Hurst summary, one estimate per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullSeriesHurst {
    pub per_layer: Vec<Option<f64>>,
    pub h_raw: Option<f64>,
    pub h_eff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HurstSeries {
    pub h_raw: MetricSeries,
    pub h_eff: MetricSeries,
    /// Per-layer prefix estimates, ordered like the trace's layers.
    pub per_layer: Vec<MetricSeries>,
    pub full_series: FullSeriesHurst,
    pub mode: SeriesMode,
}

fn layer_estimate(signal: &[f64], min_scale: usize) -> Result<Option<HurstEstimate>> {
    match hurst_exponent(signal, min_scale) {
        Ok(est) => Ok(Some(est)),
        Err(e) if e.is_insufficient_data() || e.is_degenerate() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Per-epoch `H_raw` and `H_eff`.
///
/// Epoch `t` is estimated from the prefix `x(1..=t)` in both modes; epochs
/// whose prefix is shorter than `4 * dfa_min_scale`, or where any layer
/// fails to produce an estimate, are missing. The full-series estimate per
/// layer is always reported alongside.
pub fn heff_series(trace: &ActivationTrace, config: &AnalysisConfig, mode: SeriesMode) -> Result<HurstSeries> {
    let signals = trace.layer_signals();
    let n = trace.n_epochs();
    let min_scale = config.dfa_min_scale;
    let min_prefix = config.min_dfa_prefix();

    let mut per_layer = vec![vec![None; n]; signals.len()];
    let mut h_raw = vec![None; n];
    for t in min_prefix..=n {
        let estimates = signals
            .iter()
            .map(|sig| layer_estimate(&sig[..t], min_scale))
            .collect::<Result<Vec<_>>>()?;
        for (l, est) in estimates.iter().enumerate() {
            per_layer[l][t - 1] = est.map(|e| e.hurst);
        }
        h_raw[t - 1] = mean_hurst(&estimates);
    }
    let h_raw = MetricSeries::new(h_raw);
    let h_eff = tune_series(&h_raw, config.h_opt, config.sigma_h)?;

    let full: Vec<Option<HurstEstimate>> = signals
        .iter()
        .map(|sig| layer_estimate(sig, min_scale))
        .collect::<Result<_>>()?;
    let full_raw = mean_hurst(&full);
    let full_series = FullSeriesHurst {
        per_layer: full.iter().map(|e| e.map(|e| e.hurst)).collect(),
        h_raw: full_raw,
        h_eff: full_raw
            .map(|h| gaussian_tuning(h, config.h_opt, config.sigma_h))
            .transpose()?,
    };

    Ok(HurstSeries {
        h_raw,
        h_eff,
        per_layer: per_layer.into_iter().map(MetricSeries::new).collect(),
        full_series,
        mode,
    })
}

/// Element-wise Gaussian tuning of a stored `H_raw` series.
pub fn tune_series(h_raw: &MetricSeries, h_opt: f64, sigma_h: f64) -> Result<MetricSeries> {
    h_raw
        .iter()
        .map(|v| v.map(|h| gaussian_tuning(h, h_opt, sigma_h)).transpose())
        .collect::<Result<Vec<_>>>()
        .map(MetricSeries::new)
}
