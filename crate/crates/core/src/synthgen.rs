//! Synthetic signals with known dynamical properties: fractional Gaussian
//! noise, phase-coupled oscillators, and whole traces shaped to each
//! training state.
//!
//! All randomness comes from `ChaCha8Rng` seeded with a `u64`, so output is
//! identical across platforms for a given seed.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::analysis::analyze;
use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::taxonomy::StateLabel;
use crate::trace::{ActivationTrace, EpochRecord};

/// Autocovariance of unit-variance fGn at lag `k`.
pub fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// One realization of fractional Gaussian noise by circulant embedding
/// (Davies–Harte). `length` must be a power of two, at least 64.
pub fn gen_fgn(h_target: f64, length: usize, seed: u64) -> Result<Vec<f64>> {
    if !(h_target > 0.0 && h_target < 1.0) {
        return Err(Error::domain(format!(
            "fGn Hurst parameter must lie in (0,1), got {h_target}"
        )));
    }
    if length < 64 || !length.is_power_of_two() {
        return Err(Error::domain(format!(
            "fGn length must be a power of two >= 64, got {length}"
        )));
    }
    let m = 2 * length;
    let mut row: Vec<Complex64> = (0..m)
        .map(|j| {
            let k = if j <= length { j } else { m - j };
            Complex64::new(fgn_autocovariance(h_target, k), 0.0)
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(m);
    fft.process(&mut row);
    let mut scale = Vec::with_capacity(m);
    for c in &row {
        let lambda = c.re;
        if lambda < -1e-8 * m as f64 {
            return Err(Error::Numerical(format!("negative circulant eigenvalue {lambda}")));
        }
        scale.push((lambda.max(0.0) / m as f64).sqrt());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<Complex64> = scale
        .iter()
        .map(|s| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * s, im * s)
        })
        .collect();
    fft.process(&mut w);
    Ok(w[..length].iter().map(|c| c.re).collect())
}

fn coupled_oscillators(n_layers: usize, length: usize, coupling: f64, period: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: f64 = rng.random_range(-PI..PI);
    (0..n_layers)
        .map(|_| {
            let offset = base + (1.0 - coupling) * rng.random_range(-PI..PI);
            (0..length)
                .map(|k| (2.0 * PI * k as f64 / period + offset).cos())
                .collect()
        })
        .collect()
}

/// Unit-amplitude sinusoids, one per layer, sharing a frequency of
/// `length / 8` cycles. Phase offsets are uniform on the circle scaled by
/// `1 - coupling`: identical at 1, independent at 0.
pub fn gen_coupled_phases(n_layers: usize, length: usize, coupling: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n_layers < 2 {
        return Err(Error::domain(format!("need at least 2 layers, got {n_layers}")));
    }
    if length < 16 {
        return Err(Error::domain(format!("length must be >= 16, got {length}")));
    }
    if !(0.0..=1.0).contains(&coupling) {
        return Err(Error::domain(format!("coupling must lie in [0,1], got {coupling}")));
    }
    let period = length as f64 / (length / 8) as f64;
    Ok(coupled_oscillators(n_layers, length, coupling, period, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Convergent,
    Rigid,
    Partial,
    Metastable,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Self::Convergent, Self::Rigid, Self::Partial, Self::Metastable];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Convergent => "convergent",
            Scenario::Rigid => "rigid",
            Scenario::Partial => "partial",
            Scenario::Metastable => "metastable",
        }
    }

    /// State the generated trace must classify as under the default config.
    pub fn target_state(self) -> StateLabel {
        match self {
            Scenario::Convergent => StateLabel::StableConvergent,
            Scenario::Rigid => StateLabel::RigidlySynchronised,
            Scenario::Partial => StateLabel::PartialIntegration,
            Scenario::Metastable => StateLabel::MetastableHighIntegration,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|sc| sc.as_str() == s).ok_or_else(|| {
            Error::domain(format!(
                "unknown scenario `{s}` (expected one of: convergent, rigid, partial, metastable)"
            ))
        })
    }
}

pub const SYNTH_LAYERS: usize = 4;
pub const MIN_SYNTH_LENGTH: usize = 40;
/// Candidate traces tried per call before giving up.
pub const MAX_ATTEMPTS: usize = 512;

#[derive(Debug, Clone, Copy)]
enum Dispersal {
    /// Oscillators locked before this fraction of the run, scattered after.
    Step(f64),
    /// Scattering grows linearly over the run.
    Ramp,
}

/// Shape parameters for one candidate trace.
#[derive(Debug, Clone, Copy)]
struct Recipe {
    hurst: f64,
    noise: f64,
    /// Share of the noise variance common to all layers.
    common: f64,
    osc_amp: f64,
    period: f64,
    dispersal: Dispersal,
    /// Logistic accuracy curve: floor, ceiling, midpoint (fraction of run), steepness.
    acc: (f64, f64, f64, f64),
}

impl Recipe {
    fn draw(scenario: Scenario, length: usize, rng: &mut ChaCha8Rng) -> Self {
        let sq = (length as f64).sqrt();
        let mut r = Recipe {
            hurst: 0.7,
            noise: 0.3,
            common: 0.0,
            osc_amp: 1.0,
            period: 8.0,
            dispersal: Dispersal::Ramp,
            acc: (0.1, 0.9, 0.3, 10.0),
        };
        match scenario {
            Scenario::Convergent => {
                r.hurst = rng.random_range(0.62..0.75);
                r.noise = 1.0;
                r.common = rng.random_range(0.0..0.6);
                r.osc_amp = 0.0;
                r.acc = (0.1, 0.93, 0.25, 12.0);
            }
            Scenario::Rigid => {
                r.hurst = rng.random_range(0.35..0.9);
                r.noise = rng.random_range(0.1..0.7);
                r.period = rng.random_range(1.5 * sq..2.5 * sq);
                r.dispersal = Dispersal::Step(rng.random_range(0.75..0.92));
                r.acc = (0.1, 0.75, 0.45, 6.0);
            }
            Scenario::Partial => {
                r.hurst = rng.random_range(0.6..0.92);
                r.noise = rng.random_range(0.4..0.75);
                r.period = rng.random_range(4.0..7.5);
                r.acc = (0.1, 0.8, 0.35, 8.0);
            }
            Scenario::Metastable => {
                r.hurst = rng.random_range(0.4..0.9);
                r.noise = rng.random_range(0.1..0.7);
                r.period = rng.random_range(1.0 * sq..1.35 * sq);
                r.dispersal = Dispersal::Step(rng.random_range(0.2..0.7));
                r.acc = (0.1, 0.92, 0.3, 10.0);
            }
        }
        r
    }

    fn render(&self, run_id: &str, length: usize, rng: &mut ChaCha8Rng) -> Result<ActivationTrace> {
        let fgn_len = length.next_power_of_two().max(64);
        let common = gen_fgn(self.hurst, fgn_len, rng.random())?;
        let own = (0..SYNTH_LAYERS)
            .map(|_| gen_fgn(self.hurst, fgn_len, rng.random()))
            .collect::<Result<Vec<_>>>()?;
        let locked = coupled_oscillators(SYNTH_LAYERS, length, 1.0, self.period, rng.random());
        let scattered = coupled_oscillators(SYNTH_LAYERS, length, 0.0, self.period, rng.random());
        let (floor, ceil, mid, steep) = self.acc;

        let records = (0..length)
            .map(|t| {
                let progress = t as f64 / (length - 1) as f64;
                let w = match self.dispersal {
                    Dispersal::Step(at) => f64::from(u8::from(progress >= at)),
                    Dispersal::Ramp => progress,
                };
                let signals = (0..SYNTH_LAYERS)
                    .map(|l| {
                        let z = self.common.sqrt() * common[t] + (1.0 - self.common).sqrt() * own[l][t];
                        let osc = (1.0 - w) * locked[l][t] + w * scattered[l][t];
                        0.5 + 0.25 * l as f64 + 0.1 * (self.noise * z + self.osc_amp * osc)
                    })
                    .collect();
                let jitter: f64 = StandardNormal.sample(rng);
                let acc = floor + (ceil - floor) / (1.0 + (-(progress - mid) * steep).exp()) + 0.004 * jitter;
                EpochRecord::new(t as u32 + 1, signals).with_accuracy(acc.clamp(0.0, 1.0))
            })
            .collect();
        let names = (1..=SYNTH_LAYERS).map(|l| format!("layer{l}")).collect();
        ActivationTrace::new(run_id, names, records)
    }
}

/// A trace with accuracy curve whose analysis under the default config
/// classifies as `scenario.target_state()`.
///
/// Candidates are drawn from a scenario-specific family and checked with
/// [`analyze`]; the first that passes is returned. Deterministic in `seed`.
pub fn gen_trace(scenario: Scenario, length: usize, seed: u64) -> Result<ActivationTrace> {
    if length < MIN_SYNTH_LENGTH {
        return Err(Error::domain(format!(
            "synthetic traces need at least {MIN_SYNTH_LENGTH} epochs, got {length}"
        )));
    }
    let config = AnalysisConfig::default();
    let run_id = format!("synth-{scenario}-{seed}");
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(master.random());
        let recipe = Recipe::draw(scenario, length, &mut rng);
        let trace = recipe.render(&run_id, length, &mut rng)?;
        match analyze(&trace, &config) {
            Ok(report) if report.taxonomy.state == scenario.target_state() => return Ok(trace),
            Ok(_) => {}
            Err(e) if e.is_degenerate() || e.is_insufficient_data() => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation(format!(
        "no {scenario} trace of length {length} passed the self-check in {MAX_ATTEMPTS} attempts (seed {seed})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synchrony::{analytic_phase, kuramoto_order};

    fn lag1(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let cov: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        cov / var
    }

    #[test]
    fn white_noise_at_half() {
        let x = gen_fgn(0.5, 1024, 11).unwrap();
        assert!(lag1(&x).abs() < 0.1);
    }

    #[test]
    fn persistent_lag_one_correlation() {
        let expected = 2f64.powf(2.0 * 0.9 - 1.0) - 1.0;
        let x = gen_fgn(0.9, 1024, 3).unwrap();
        assert!((lag1(&x) - expected).abs() < 0.08, "{} vs {expected}", lag1(&x));
        let y = gen_fgn(0.2, 1024, 3).unwrap();
        assert!(lag1(&y) < 0.0);
    }

    #[test]
    fn autocovariance_values() {
        assert_eq!(fgn_autocovariance(0.7, 0), 1.0);
        assert!((fgn_autocovariance(0.5, 1)).abs() < 1e-15);
        assert!((fgn_autocovariance(0.9, 1) - (2f64.powf(1.8) - 2.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn fgn_is_deterministic_and_validated() {
        assert_eq!(gen_fgn(0.7, 256, 9).unwrap(), gen_fgn(0.7, 256, 9).unwrap());
        assert_ne!(gen_fgn(0.7, 256, 9).unwrap(), gen_fgn(0.7, 256, 10).unwrap());
        for (h, n) in [(0.0, 64), (1.0, 64), (0.5, 100), (0.5, 32)] {
            assert!(matches!(gen_fgn(h, n, 0), Err(Error::Domain(_))), "{h} {n}");
        }
    }

    fn mean_r(signals: &[Vec<f64>]) -> f64 {
        let phases: Vec<Vec<f64>> = signals.iter().map(|s| analytic_phase(s).unwrap()).collect();
        let n = signals[0].len();
        let interior = n / 8..n - n / 8;
        let len = interior.len() as f64;
        interior
            .map(|t| kuramoto_order(&phases.iter().map(|p| p[t]).collect::<Vec<_>>()).unwrap())
            .sum::<f64>()
            / len
    }

    #[test]
    fn coupling_controls_synchrony() {
        let locked = gen_coupled_phases(8, 128, 1.0, 5).unwrap();
        assert!(mean_r(&locked) > 0.999);
        let free = gen_coupled_phases(64, 128, 0.0, 5).unwrap();
        assert!(mean_r(&free) < 0.25);
        let mid = gen_coupled_phases(64, 128, 0.5, 5).unwrap();
        let r = mean_r(&mid);
        assert!(mean_r(&free) < r && r < 0.999, "{r}");
    }

    #[test]
    fn coupled_phases_validate_inputs() {
        assert!(gen_coupled_phases(1, 64, 0.5, 0).is_err());
        assert!(gen_coupled_phases(4, 15, 0.5, 0).is_err());
        assert!(gen_coupled_phases(4, 64, 1.5, 0).is_err());
    }

    #[test]
    fn scenario_names_roundtrip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.as_str().parse::<Scenario>().unwrap(), sc);
        }
        let err = "chaotic".parse::<Scenario>().unwrap_err().to_string();
        assert!(err.contains("convergent, rigid, partial, metastable"));
    }

    #[test]
    fn gen_trace_rejects_short_runs() {
        assert!(matches!(gen_trace(Scenario::Convergent, 39, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn gen_trace_is_deterministic() {
        let a = gen_trace(Scenario::Partial, 48, 4).unwrap();
        let b = gen_trace(Scenario::Partial, 48, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_layers(), SYNTH_LAYERS);
        assert!(a.has_accuracy());
    }
}
