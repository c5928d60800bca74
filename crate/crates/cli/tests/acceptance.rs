//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use traindyn::composite::{pearson, zscore};
use traindyn::config::TaxonomyConfig;
use traindyn::dfa::{gaussian_tuning, hurst_exponent};
use traindyn::sensitivity::{
    group_heff_grid, render_threshold_table, threshold_grid, RunSensitivity, WeightSweep, SEPARATION_GAP,
};
use traindyn::synchrony::kuramoto_order;
use traindyn::synthgen::gen_fgn;
use traindyn::taxonomy::{classify_state, TaxonomySignature};
use traindyn::{MetricSeries, StateLabel, VolatilityTrend};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const TARGETS: [f64; 3] = [0.5, 0.7, 0.9];
const REALIZATIONS: u64 = 200;
const MIN_SCALE: usize = 4;

fn fitted(h: f64, gen_len: usize, keep: usize, seed: u64) -> Result<f64, String> {
    let x = gen_fgn(h, gen_len, seed).map_err(|e| e.to_string())?;
    hurst_exponent(&x[..keep], MIN_SCALE)
        .map(|e| e.hurst)
        .map_err(|e| e.to_string())
}

fn hurst_oracle() -> Outcome {
    let start = Instant::now();
    let mut detail = Vec::new();
    for (j, &h) in TARGETS.iter().enumerate() {
        let est = (0..REALIZATIONS)
            .map(|i| fitted(h, 1024, 1024, 10_000 * (j as u64 + 1) + i))
            .collect::<Result<Vec<_>, _>>()?;
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        let within = est.iter().filter(|e| (*e - h).abs() <= 0.15).count() as f64 / est.len() as f64;
        ensure((mean - h).abs() <= 0.05, || format!("H={h}: mean {mean:.4}"))?;
        ensure(within >= 0.95, || {
            format!("H={h}: only {:.1}% within 0.15", 100.0 * within)
        })?;
        detail.push(format!("H={h}: mean {mean:.3}, {:.1}% within", 100.0 * within));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{} [{elapsed:.2?}]", detail.join("; ")))
}

fn short_series() -> Outcome {
    let mut detail = Vec::new();
    for (j, &h) in TARGETS.iter().enumerate() {
        let est = (0..REALIZATIONS)
            .map(|i| fitted(h, 64, 50, 50_000 * (j as u64 + 1) + i))
            .collect::<Result<Vec<_>, _>>()?;
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / est.len() as f64).sqrt();
        ensure((mean - h).abs() <= 0.15, || format!("H={h}: mean {mean:.4}"))?;
        detail.push(format!("H={h}: mean {mean:.3} sd {sd:.3}"));
    }
    Ok(detail.join("; "))
}

fn tuning_exactness() -> Outcome {
    let tune = |h, o, s| gaussian_tuning(h, o, s).map_err(|e| e.to_string());
    let peak = tune(0.7, 0.7, 0.1)?;
    ensure(peak == 1.0, || format!("peak {peak}"))?;
    let one_sigma = tune(0.6, 0.7, 0.1)?;
    ensure((one_sigma - (-0.5f64).exp()).abs() < 1e-12, || {
        format!("one sigma {one_sigma}")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let h_opt = rng.random_range(0.0..1.0);
        let offset = rng.random_range(0.0..0.5);
        let sigma = rng.random_range(0.05..0.3);
        let d = (tune(h_opt + offset, h_opt, sigma)? - tune(h_opt - offset, h_opt, sigma)?).abs();
        worst = worst.max(d);
    }
    ensure(worst < 1e-12, || format!("asymmetry {worst:e}"))?;
    Ok(format!("max asymmetry {worst:.1e}"))
}

fn kuramoto() -> Outcome {
    let r = |p: &[f64]| kuramoto_order(p).map_err(|e| e.to_string());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 2..20 {
        let equal = vec![rng.random_range(-PI..PI); n];
        let v = r(&equal)?;
        ensure((v - 1.0).abs() < 1e-12, || format!("equal phases n={n}: {v}"))?;
        let symmetric: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
        let v = r(&symmetric)?;
        ensure(v < 1e-9, || format!("symmetric n={n}: {v:e}"))?;
    }
    let mut worst_shift = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..64);
        let phases: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        let base = r(&phases)?;
        ensure(base <= 1.0, || format!("R = {base}"))?;
        let shift = rng.random_range(-10.0..10.0);
        let moved: Vec<f64> = phases.iter().map(|p| p + shift).collect();
        worst_shift = worst_shift.max((r(&moved)? - base).abs());
    }
    ensure(worst_shift < 1e-9, || format!("shift changed R by {worst_shift:e}"))?;
    Ok(format!("max shift deviation {worst_shift:.1e}"))
}

fn sensitivity_reversal() -> Outcome {
    let start = Instant::now();
    let group = |h| vec![MetricSeries::from_values(&[h; 8])];
    let cells =
        group_heff_grid(&group(0.70), &group(0.42), &[0.7, 0.5], &[0.10], SEPARATION_GAP).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (at_07, at_05) = (&cells[0], &cells[1]);
    ensure(at_07.separated, || format!("no separation at H_opt=0.7: {at_07:?}"))?;
    ensure(!at_05.separated && at_05.group_b > at_05.group_a, || {
        format!("no reversal at H_opt=0.5: {at_05:?}")
    })?;
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "0.7: {:.3} vs {:.3}; 0.5: {:.3} vs {:.3} [{elapsed:.1?}]",
        at_07.group_a, at_07.group_b, at_05.group_a, at_05.group_b
    ))
}

fn taxonomy() -> Outcome {
    use StateLabel::*;
    use VolatilityTrend::*;
    let rows = [
        (
            "ResNet-152",
            0.931,
            PersistentlyElevated,
            0.600,
            -0.436,
            MetastableHighIntegration,
        ),
        (
            "DenseNet-121",
            0.880,
            RapidlyCollapsing,
            -0.371,
            0.600,
            StableConvergent,
        ),
        (
            "MobileNetV2",
            0.951,
            PersistentlyElevated,
            0.095,
            0.313,
            MetastableHighIntegration,
        ),
        (
            "ViT",
            0.980,
            PersistentlyElevated,
            0.036,
            -0.330,
            MetastableHighIntegration,
        ),
        (
            "ResNet-50",
            0.057,
            FlatNonconverging,
            0.864,
            -0.760,
            RigidlySynchronised,
        ),
        (
            "ResNet-101",
            0.070,
            FlatNonconverging,
            0.885,
            -0.725,
            RigidlySynchronised,
        ),
        ("VGG-16", 0.303, SlowlyCollapsing, 0.274, -0.396, PartialIntegration),
    ];
    // The two runs tabulated as transitional, with the labels the rules assign.
    let transitional = [
        ("ResNet-18", 0.830, SlowlyCollapsing, 0.777, -0.661, Unclassified),
        (
            "ResNet-34",
            0.852,
            PersistentlyElevated,
            0.514,
            -0.342,
            MetastableHighIntegration,
        ),
    ];
    let gates = TaxonomyConfig::default();
    let mut matched = 0;
    for (name, h, trend, r_hm, r_pa, want) in rows {
        let got = classify_state(&TaxonomySignature::new(h, trend, r_hm, Some(r_pa)), &gates);
        ensure(got == want, || format!("{name}: got {got:?}, want {want:?}"))?;
        matched += 1;
    }
    let mut notes = Vec::new();
    for (name, h, trend, r_hm, r_pa, want) in transitional {
        let got = classify_state(&TaxonomySignature::new(h, trend, r_hm, Some(r_pa)), &gates);
        ensure(got == want, || format!("{name}: got {got:?}, documented {want:?}"))?;
        notes.push(format!("{name} -> {}", got.as_str()));
    }
    Ok(format!("{matched}/7 rows; {}", notes.join(", ")))
}

fn pearson_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_affine, mut worst_z) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(3..80);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (a, b) = (MetricSeries::from_values(&a), MetricSeries::from_values(&b));
        let Ok(r) = pearson(&a, &b) else { continue };
        let c: f64 = rng.random_range(0.1..50.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let d = rng.random_range(-100.0..100.0);
        let mapped = pearson(&a, &b.map(|v| c * v + d)).map_err(|e| e.to_string())?;
        worst_affine = worst_affine.max((mapped - c.signum() * r).abs());
        let (za, zb) = (
            zscore(&a).map_err(|e| e.to_string())?,
            zscore(&b).map_err(|e| e.to_string())?,
        );
        worst_z = worst_z.max((pearson(&za, &zb).map_err(|e| e.to_string())? - r).abs());
        done += 1;
    }
    ensure(worst_affine < 1e-9, || format!("affine deviation {worst_affine:e}"))?;
    ensure(worst_z < 1e-9, || format!("zscore deviation {worst_z:e}"))?;
    Ok(format!("affine {worst_affine:.1e}, zscore {worst_z:.1e}"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_traindyn"))
        .args(args)
        .env("TRAINDYN_NO_COLOR", "1")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "`traindyn {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let trace = path("trace.csv");
    run_cli(&["synth", "metastable", "--length", "60", "--seed", "11", "-o", &trace])?;
    let mut timings = Vec::new();
    for name in ["a.json", "b.json"] {
        let start = Instant::now();
        run_cli(&["analyze", &trace, "-o", &path(name)])?;
        timings.push(start.elapsed());
    }
    let read = |name: &str| std::fs::read(Path::new(&path(name))).map_err(|e| e.to_string());
    let (a, b) = (read("a.json")?, read("b.json")?);
    ensure(!a.is_empty() && a == b, || "reports differ between runs".to_string())?;
    let slowest = timings.iter().max().copied().unwrap_or_default();
    ensure(slowest < Duration::from_secs(1), || format!("analyze took {slowest:?}"))?;
    let layers = std::fs::read_to_string(&trace).map_err(|e| e.to_string())?;
    let header = layers.lines().next().unwrap_or_default();
    ensure(
        header.split(',').filter(|c| c.starts_with("layer")).count() == 4,
        || format!("expected 4 layers in header {header:?}"),
    )?;
    Ok(format!("{} identical bytes, slowest analyze {slowest:.1?}", a.len()))
}

fn threshold_machinery() -> Outcome {
    let n = 40;
    let epochs: Vec<u32> = (1..=n).collect();
    let decay: Vec<f64> = (0..n).map(|t| 0.9 * (-(t as f64) / 12.0).exp()).collect();
    let grid = [0.35, 0.30, 0.25];
    let row =
        threshold_grid(&MetricSeries::from_values(&decay), &epochs, &grid, None, 0.98).map_err(|e| e.to_string())?;
    let at: Vec<u32> = row
        .crossings
        .iter()
        .map(|c| c.epoch.ok_or("threshold not crossed"))
        .collect::<Result<_, _>>()?;
    ensure(at.windows(2).all(|w| w[0] <= w[1]), || format!("crossings {at:?}"))?;

    let flat = MetricSeries::from_values(&[0.8; 40]);
    let never = threshold_grid(&flat, &epochs, &grid, None, 0.98).map_err(|e| e.to_string())?;
    let run = RunSensitivity {
        run_id: "flat".into(),
        heff: Vec::new(),
        weights: WeightSweep::unavailable(&[]),
        thresholds: never,
    };
    let table = render_threshold_table(&[run]);
    let cells: Vec<&str> = table
        .lines()
        .nth(1)
        .unwrap_or_default()
        .split_whitespace()
        .skip(1)
        .collect();
    ensure(cells == ["---"; 4], || format!("row {cells:?}"))?;
    Ok(format!("crossings at epochs {at:?}; never-crossing row all dashes"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("hurst oracle recovery (length 1024)", hurst_oracle),
        ("short-series hurst (length 50)", short_series),
        ("gaussian tuning exactness", tuning_exactness),
        ("kuramoto order parameter properties", kuramoto),
        ("sensitivity reversal", sensitivity_reversal),
        ("taxonomy reproduction", taxonomy),
        ("pearson affine invariance", pearson_invariance),
        ("end-to-end determinism and speed", end_to_end),
        ("rolling-volatility threshold machinery", threshold_machinery),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
