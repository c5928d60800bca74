//! Analytic phase, the Kuramoto order parameter, and cumulative metastability.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::config::SeriesMode;
use crate::error::{Error, Result};
use crate::series::MetricSeries;
use crate::trace::ActivationTrace;

/// Shortest signal for which a frequency-domain analytic signal is computed.
pub const MIN_PHASE_SAMPLES: usize = 4;

/// Epoch-by-layer phases in `(-pi, pi]`; missing where a phase is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    phases: Vec<Vec<Option<f64>>>,
}

impl PhaseMatrix {
    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.phases
    }

    /// All phases at epoch index `t`, if every layer has one.
    pub fn at(&self, t: usize) -> Option<Vec<f64>> {
        self.phases.get(t)?.iter().copied().collect()
    }
}

/// Discrete analytic signal of the mean-removed input (one-sided spectrum;
/// DC and Nyquist bins kept unscaled).
pub fn analytic_signal(signal: &[f64]) -> Result<Vec<Complex64>> {
    let n = signal.len();
    if n < MIN_PHASE_SAMPLES {
        return Err(Error::domain(format!(
            "analytic phase needs at least {MIN_PHASE_SAMPLES} samples, got {n}"
        )));
    }
    if let Some(bad) = signal.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite sample {bad}")));
    }
    if signal.iter().all(|&v| v == signal[0]) {
        return Err(Error::degenerate("phase of a constant signal is undefined"));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *c *= gain;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let norm = 1.0 / n as f64;
    Ok(buf.into_iter().map(|c| c * norm).collect())
}

fn wrap_phase(z: Complex64) -> f64 {
    let p = z.im.atan2(z.re);
    if p <= -PI {
        PI
    } else {
        p
    }
}

/// Instantaneous phase of each sample, in `(-pi, pi]`.
pub fn analytic_phase(signal: &[f64]) -> Result<Vec<f64>> {
    Ok(analytic_signal(signal)?.into_iter().map(wrap_phase).collect())
}

/// `R = |mean_l exp(i theta_l)|`.
pub fn kuramoto_order(phases: &[f64]) -> Result<f64> {
    if phases.len() < 2 {
        return Err(Error::domain(format!(
            "order parameter needs at least 2 phases, got {}",
            phases.len()
        )));
    }
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("non-finite phase"));
    }
    if phases.iter().all(|&p| p == phases[0]) {
        return Ok(1.0);
    }
    let n = phases.len() as f64;
    let (s, c) = phases.iter().fold((0.0, 0.0), |(s, c), p| (s + p.sin(), c + p.cos()));
    Ok(((s / n).hypot(c / n)).min(1.0))
}

/// Cumulative population standard deviation of `R` over epochs `<= t`.
///
/// Missing `R` entries are skipped; `M(t)` is missing until the first `R`
/// value is seen, and `0` at that first value.
pub fn metastability_series(r_series: &MetricSeries) -> MetricSeries {
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    r_series
        .iter()
        .map(|r| {
            if let Some(r) = r {
                count += 1;
                let delta = r - mean;
                mean += delta / count as f64;
                m2 += delta * (r - mean);
            }
            (count > 0).then(|| (m2.max(0.0) / count as f64).sqrt())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynchronySeries {
    pub phases: PhaseMatrix,
    pub r: MetricSeries,
    pub m: MetricSeries,
    pub mode: SeriesMode,
}

/// Phases, order parameter and metastability for a whole trace.
///
/// Retrospective mode extracts phases once from each full layer signal.
/// Causal mode re-extracts from each prefix `x(1..=t)` and keeps the final
/// sample; epochs shorter than [`MIN_PHASE_SAMPLES`], or whose prefix is
/// constant for some layer, are missing. A layer that is constant over the
/// whole trace is an error in both modes.
pub fn synchrony_pipeline(trace: &ActivationTrace, mode: SeriesMode) -> Result<SynchronySeries> {
    let n = trace.n_epochs();
    let signals = trace.layer_signals();
    let mut phases = vec![vec![None; signals.len()]; n];

    for (l, sig) in signals.iter().enumerate() {
        if sig.iter().all(|&v| v == sig[0]) {
            return Err(Error::degenerate(format!(
                "layer `{}` is constant; its phase is undefined",
                trace.layer_names()[l]
            )));
        }
        match mode {
            SeriesMode::Retrospective => {
                for (t, p) in analytic_phase(sig)?.into_iter().enumerate() {
                    phases[t][l] = Some(p);
                }
            }
            SeriesMode::Causal => {
                for t in MIN_PHASE_SAMPLES..=n {
                    phases[t - 1][l] = match analytic_phase(&sig[..t]) {
                        Ok(p) => p.last().copied(),
                        Err(e) if e.is_degenerate() => None,
                        Err(e) => return Err(e),
                    };
                }
            }
        }
    }

    let phases = PhaseMatrix { phases };
    let r: MetricSeries = (0..n)
        .map(|t| phases.at(t).map(|p| kuramoto_order(&p)).transpose())
        .collect::<Result<Vec<_>>>()?
        .into();
    let m = metastability_series(&r);
    Ok(SynchronySeries { phases, r, m, mode })
}
