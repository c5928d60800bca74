//! Normalisation, the composite index, rolling volatility and the
//! correlation/threshold diagnostics built on top of them.
//!
//! Every operation here works on [`MetricSeries`] and skips missing epochs.
//! Positions returned by [`threshold_crossing`] and [`plateau_epoch`] are
//! 0-based indices into the series; callers map them to epoch numbers.

use crate::error::{Error, Result};
use crate::series::MetricSeries;

/// True if the values span no meaningful range (relative to their magnitude).
fn is_flat(values: impl Iterator<Item = f64>) -> bool {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    range == 0.0 || range <= 1e-12 * lo.abs().max(hi.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub series: MetricSeries,
    /// Set when every present value was equal; the output is then all zeros.
    pub degenerate: bool,
}

/// `(v - min) / (max - min)` over present values.
pub fn minmax_normalize(series: &MetricSeries) -> Result<Normalized> {
    if series.count_present() < 2 {
        return Err(Error::insufficient(format!(
            "min-max normalisation needs 2 values, got {}",
            series.count_present()
        )));
    }
    if is_flat(series.present().map(|(_, v)| v)) {
        return Ok(Normalized {
            series: series.map(|_| 0.0),
            degenerate: true,
        });
    }
    let (lo, hi) = series
        .present()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    Ok(Normalized {
        series: series.map(|v| ((v - lo) / span).clamp(0.0, 1.0)),
        degenerate: false,
    })
}

/// `w_h * H_norm + w_m * M_norm`, missing where either input is missing.
pub fn psi_series(heff_norm: &MetricSeries, m_norm: &MetricSeries, w_h: f64, w_m: f64) -> Result<MetricSeries> {
    if !(0.0..=1.0).contains(&w_h) || !(0.0..=1.0).contains(&w_m) || (w_h + w_m - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "weights must lie in [0,1] and sum to 1, got w_h={w_h}, w_m={w_m}"
        )));
    }
    if heff_norm.len() != m_norm.len() {
        return Err(Error::domain(format!(
            "series are not epoch-aligned ({} vs {})",
            heff_norm.len(),
            m_norm.len()
        )));
    }
    Ok(heff_norm
        .iter()
        .zip(m_norm.iter())
        .map(|(h, m)| Some(w_h * h? + w_m * m?))
        .collect())
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Sample standard deviation of the most recent `window` present values
/// ending at each epoch.
///
/// Missing epochs are skipped when filling the window and stay missing in
/// the output; so does every epoch before `window` values have been seen.
pub fn rolling_volatility(series: &MetricSeries, window: usize) -> Result<MetricSeries> {
    if window < 2 {
        return Err(Error::domain(format!("rolling window must be >= 2, got {window}")));
    }
    let mut recent: Vec<f64> = Vec::with_capacity(window);
    Ok(series
        .iter()
        .map(|v| {
            let v = v?;
            if recent.len() == window {
                recent.remove(0);
            }
            recent.push(v);
            (recent.len() == window).then(|| sample_std(&recent))
        })
        .collect())
}

/// `(v - mean) / std` with the population standard deviation.
pub fn zscore(series: &MetricSeries) -> Result<MetricSeries> {
    if series.count_present() < 2 {
        return Err(Error::insufficient("z-score needs at least 2 values"));
    }
    if is_flat(series.present().map(|(_, v)| v)) {
        return Err(Error::degenerate("cannot z-score a constant series"));
    }
    let mean = series.mean().expect("non-empty");
    let std = series.std().expect("non-empty");
    Ok(series.map(|v| (v - mean) / std))
}

/// Pearson correlation over epochs where both series are present.
pub fn pearson(a: &MetricSeries, b: &MetricSeries) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "series are not epoch-aligned ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = a.iter().zip(b.iter()).filter_map(|(x, y)| Some((x?, y?))).collect();
    if pairs.len() < 3 {
        return Err(Error::insufficient(format!(
            "correlation needs 3 jointly present epochs, got {}",
            pairs.len()
        )));
    }
    if is_flat(pairs.iter().map(|p| p.0)) || is_flat(pairs.iter().map(|p| p.1)) {
        return Err(Error::degenerate("correlation with a constant series is undefined"));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// First position whose value is strictly below `threshold`.
pub fn threshold_crossing(volatility: &MetricSeries, threshold: f64) -> Option<usize> {
    volatility.present().find(|&(_, v)| v < threshold).map(|(i, _)| i)
}

/// First position where accuracy reaches `fraction` of its maximum.
pub fn plateau_epoch(accuracy: &MetricSeries, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(format!(
            "plateau fraction must lie in (0,1], got {fraction}"
        )));
    }
    let max = accuracy
        .present()
        .map(|(_, v)| v)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        .ok_or_else(|| Error::insufficient("no accuracy values recorded"))?;
    let target = fraction * max;
    Ok(accuracy
        .present()
        .find(|&(_, v)| v >= target)
        .map(|(i, _)| i)
        .expect("the maximum itself reaches the target"))
}
