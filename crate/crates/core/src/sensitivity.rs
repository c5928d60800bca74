//! Parameter sweeps over stored series: H_eff tuning grid, composite
//! weights, and volatility thresholds.
//!
//! Nothing here re-runs DFA or phase extraction. Sweeps consume the
//! `H_raw`, normalised fields, volatility and accuracy series of a
//! finished analysis.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisReport;
use crate::composite::{pearson, plateau_epoch, psi_series, threshold_crossing};
use crate::dfa::tune_series;
use crate::error::{Error, Result};
use crate::series::MetricSeries;

pub const DEFAULT_H_OPT_GRID: [f64; 4] = [0.5, 0.6, 0.7, 0.8];
pub const DEFAULT_SIGMA_GRID: [f64; 4] = [0.05, 0.10, 0.15, 0.20];
pub const DEFAULT_WEIGHT_GRID: [f64; 3] = [0.3, 0.5, 0.7];
pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.25, 0.30, 0.35];
pub const SEPARATION_GAP: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeffCell {
    pub h_opt: f64,
    pub sigma_h: f64,
    pub mean_heff: f64,
}

fn check_grid(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::domain(format!("{name} grid is empty")));
    }
    Ok(())
}

/// Mean tuned `H_eff` for every `(h_opt, sigma_h)` pair, `h_opt` varying
/// slowest.
pub fn heff_grid(h_raw: &MetricSeries, h_opts: &[f64], sigmas: &[f64]) -> Result<Vec<HeffCell>> {
    check_grid("h_opt", h_opts)?;
    check_grid("sigma_h", sigmas)?;
    if h_raw.count_present() == 0 {
        return Err(Error::insufficient("no H_raw values to retune"));
    }
    let mut cells = Vec::with_capacity(h_opts.len() * sigmas.len());
    for &h_opt in h_opts {
        for &sigma_h in sigmas {
            let mean_heff = tune_series(h_raw, h_opt, sigma_h)?.mean().expect("non-empty");
            cells.push(HeffCell {
                h_opt,
                sigma_h,
                mean_heff,
            });
        }
    }
    Ok(cells)
}

/// True when group A exceeds group B by strictly more than `gap`.
pub fn separation_flag(group_a_mean: f64, group_b_mean: f64, gap: f64) -> bool {
    group_a_mean - group_b_mean > gap
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCell {
    pub h_opt: f64,
    pub sigma_h: f64,
    pub group_a: f64,
    pub group_b: f64,
    pub separated: bool,
}

fn group_means(runs: &[MetricSeries], h_opts: &[f64], sigmas: &[f64]) -> Result<Vec<f64>> {
    if runs.is_empty() {
        return Err(Error::domain("a comparison group has no runs"));
    }
    let grids = runs
        .iter()
        .map(|h| heff_grid(h, h_opts, sigmas))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..grids[0].len())
        .map(|i| grids.iter().map(|g| g[i].mean_heff).sum::<f64>() / grids.len() as f64)
        .collect())
}

/// Per-cell mean `H_eff` averaged over the runs of each group, with the
/// separation flag at `gap`.
pub fn group_heff_grid(
    group_a: &[MetricSeries],
    group_b: &[MetricSeries],
    h_opts: &[f64],
    sigmas: &[f64],
    gap: f64,
) -> Result<Vec<GroupCell>> {
    let a = group_means(group_a, h_opts, sigmas)?;
    let b = group_means(group_b, h_opts, sigmas)?;
    let pairs = h_opts.iter().flat_map(|&h| sigmas.iter().map(move |&s| (h, s)));
    Ok(pairs
        .zip(a.into_iter().zip(b))
        .map(|((h_opt, sigma_h), (group_a, group_b))| GroupCell {
            h_opt,
            sigma_h,
            group_a,
            group_b,
            separated: separation_flag(group_a, group_b, gap),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightCell {
    pub w_h: f64,
    /// `None` when the correlation is unavailable.
    pub r_psi_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSweep {
    pub cells: Vec<WeightCell>,
    /// Whether every correlation has the same sign; `None` if any is unavailable.
    pub sign_stable: Option<bool>,
}

impl WeightSweep {
    pub fn unavailable(w_h_values: &[f64]) -> Self {
        Self {
            cells: w_h_values
                .iter()
                .map(|&w_h| WeightCell { w_h, r_psi_acc: None })
                .collect(),
            sign_stable: None,
        }
    }
}

/// `r(Psi, acc)` with Psi recomputed at each `w_h` (and `w_m = 1 - w_h`).
pub fn weight_grid(
    heff_norm: &MetricSeries,
    m_norm: &MetricSeries,
    accuracy: &MetricSeries,
    w_h_values: &[f64],
) -> Result<WeightSweep> {
    check_grid("w_h", w_h_values)?;
    let cells = w_h_values
        .iter()
        .map(|&w_h| {
            let psi = psi_series(heff_norm, m_norm, w_h, 1.0 - w_h)?;
            Ok(WeightCell {
                w_h,
                r_psi_acc: Some(pearson(&psi, accuracy)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let signs: Vec<f64> = cells.iter().map(|c| c.r_psi_acc.expect("computed").signum()).collect();
    let sign_stable = Some(signs.iter().all(|&s| s == signs[0]) && cells.iter().all(|c| c.r_psi_acc != Some(0.0)));
    Ok(WeightSweep { cells, sign_stable })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCell {
    pub threshold: f64,
    /// Epoch of the first strict crossing; `None` if never crossed.
    pub epoch: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub crossings: Vec<ThresholdCell>,
    pub plateau_epoch: Option<u32>,
}

/// First crossing epoch per threshold, plus the accuracy plateau epoch when
/// accuracy is given and has values.
pub fn threshold_grid(
    sigma_psi: &MetricSeries,
    epochs: &[u32],
    thresholds: &[f64],
    accuracy: Option<&MetricSeries>,
    plateau_fraction: f64,
) -> Result<ThresholdRow> {
    if epochs.len() != sigma_psi.len() {
        return Err(Error::domain(format!(
            "{} epoch numbers for a series of length {}",
            epochs.len(),
            sigma_psi.len()
        )));
    }
    let crossings = thresholds
        .iter()
        .map(|&threshold| ThresholdCell {
            threshold,
            epoch: threshold_crossing(sigma_psi, threshold).map(|i| epochs[i]),
        })
        .collect();
    let plateau = match accuracy {
        Some(acc) if acc.count_present() > 0 => Some(epochs[plateau_epoch(acc, plateau_fraction)?]),
        _ => None,
    };
    Ok(ThresholdRow {
        crossings,
        plateau_epoch: plateau,
    })
}

/// Grids to evaluate. Defaults reproduce the standard sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrids {
    pub h_opt: Vec<f64>,
    pub sigma_h: Vec<f64>,
    pub w_h: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub gap: f64,
}

impl Default for SweepGrids {
    fn default() -> Self {
        Self {
            h_opt: DEFAULT_H_OPT_GRID.to_vec(),
            sigma_h: DEFAULT_SIGMA_GRID.to_vec(),
            w_h: DEFAULT_WEIGHT_GRID.to_vec(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            gap: SEPARATION_GAP,
        }
    }
}

/// All three sweeps for one analysed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSensitivity {
    pub run_id: String,
    pub heff: Vec<HeffCell>,
    pub weights: WeightSweep,
    pub thresholds: ThresholdRow,
}

pub fn sweep_report(report: &AnalysisReport, grids: &SweepGrids) -> Result<RunSensitivity> {
    let s = &report.series;
    let weights = if s.accuracy.count_present() == 0 {
        WeightSweep::unavailable(&grids.w_h)
    } else {
        match weight_grid(&s.h_eff_norm, &s.m_norm, &s.accuracy, &grids.w_h) {
            Ok(w) => w,
            Err(e) if e.is_degenerate() || e.is_insufficient_data() => WeightSweep::unavailable(&grids.w_h),
            Err(e) => return Err(e),
        }
    };
    Ok(RunSensitivity {
        run_id: report.summary.run_id.clone(),
        heff: heff_grid(&s.h_raw, &grids.h_opt, &grids.sigma_h)?,
        weights,
        thresholds: threshold_grid(
            &s.sigma_psi,
            &s.epoch,
            &grids.thresholds,
            Some(&s.accuracy),
            report.config.plateau_fraction,
        )?,
    })
}

fn yes_no(flag: bool) -> &'static str {
    if flag {
        "Yes"
    } else {
        "No"
    }
}

/// Mean H_eff table, one block per `h_opt`, one value column per run.
pub fn render_heff_table(runs: &[RunSensitivity]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:>5}  {:>7}", "H_opt", "sigma_H");
    for r in runs {
        let _ = write!(out, "  {:>10}", truncate(&r.run_id, 10));
    }
    out.push('\n');
    let Some(first) = runs.first() else { return out };
    for (i, cell) in first.heff.iter().enumerate() {
        if i > 0 && cell.h_opt != first.heff[i - 1].h_opt {
            out.push_str(&rule(16 + 12 * runs.len()));
        }
        let _ = write!(out, "{:>5.1}  {:>7.2}", cell.h_opt, cell.sigma_h);
        for r in runs {
            let _ = write!(out, "  {:>10.3}", r.heff[i].mean_heff);
        }
        out.push('\n');
    }
    out
}

/// Two-group mean H_eff table with the separation column.
pub fn render_group_table(cells: &[GroupCell], label_a: &str, label_b: &str) -> String {
    let mut out = format!(
        "{:>5}  {:>7}  {:>8}  {:>8}  {:>4}\n",
        "H_opt", "sigma_H", label_a, label_b, "Sep."
    );
    for (i, c) in cells.iter().enumerate() {
        if i > 0 && c.h_opt != cells[i - 1].h_opt {
            out.push_str(&rule(40));
        }
        let _ = writeln!(
            out,
            "{:>5.1}  {:>7.2}  {:>8.3}  {:>8.3}  {:>4}",
            c.h_opt,
            c.sigma_h,
            c.group_a,
            c.group_b,
            yes_no(c.separated)
        );
    }
    out
}

/// `r(Psi, acc)` per weight setting, one row per run.
pub fn render_weight_table(runs: &[RunSensitivity]) -> String {
    let mut out = format!("{:<24}", "Configuration");
    let Some(first) = runs.first() else { return out + "\n" };
    for c in &first.weights.cells {
        let _ = write!(out, "  {:>9}", format!("w_H={}", c.w_h));
    }
    let _ = writeln!(out, "  {:>11}", "sign stable");
    for r in runs {
        let _ = write!(out, "{:<24}", truncate(&r.run_id, 24));
        for c in &r.weights.cells {
            let cell = c.r_psi_acc.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.3}"));
            let _ = write!(out, "  {cell:>9}");
        }
        let stable = r.weights.sign_stable.map_or("n/a", yes_no);
        let _ = writeln!(out, "  {stable:>11}");
    }
    out
}

/// Threshold crossing epochs per run; `---` marks a threshold never crossed.
pub fn render_threshold_table(runs: &[RunSensitivity]) -> String {
    let mut out = format!("{:<24}", "Config.");
    let Some(first) = runs.first() else { return out + "\n" };
    for c in &first.thresholds.crossings {
        let _ = write!(out, "  {:>6}", format!("<{:.2}", c.threshold));
    }
    let _ = writeln!(out, "  {:>12}", "Acc. plateau");
    for r in runs {
        let _ = write!(out, "{:<24}", truncate(&r.run_id, 24));
        for c in &r.thresholds.crossings {
            let _ = write!(out, "  {:>6}", dash_or(c.epoch));
        }
        let plateau = r
            .thresholds
            .plateau_epoch
            .map_or_else(|| "---".to_string(), |e| format!("ep. {e}"));
        let _ = writeln!(out, "  {plateau:>12}");
    }
    out
}

/// An epoch number, or `---` when absent.
pub fn dash_or(epoch: Option<u32>) -> String {
    epoch.map_or_else(|| "---".to_string(), |e| e.to_string())
}

fn rule(width: usize) -> String {
    format!("{}\n", "-".repeat(width))
}

fn truncate(s: &str, width: usize) -> &str {
    match s.char_indices().nth(width) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
