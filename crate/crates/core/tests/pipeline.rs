use std::f64::consts::PI;

use traindyn::config::{SeriesMode, TaxonomyConfig};
use traindyn::dfa::hurst_exponent;
use traindyn::sensitivity::{heff_grid, sweep_report, SweepGrids};
use traindyn::synchrony::synchrony_pipeline;
use traindyn::synthgen::{gen_coupled_phases, gen_fgn, gen_trace, Scenario};
use traindyn::taxonomy::classify_state;
use traindyn::trace::{load_trace, save_trace};
use traindyn::{analyze, ActivationTrace, AnalysisConfig, AnalysisReport, EpochRecord, StateLabel, TraceFormat};

fn trace_from_layers(layers: &[Vec<f64>]) -> ActivationTrace {
    let n = layers[0].len();
    let names = (1..=layers.len()).map(|l| format!("layer{l}")).collect();
    let records = (0..n)
        .map(|t| EpochRecord::new(t as u32 + 1, layers.iter().map(|l| l[t]).collect()))
        .collect();
    ActivationTrace::new("fixture", names, records).unwrap()
}

#[test]
fn persistent_fgn_recovers_its_exponent() {
    let x = gen_fgn(0.8, 1024, 21).unwrap();
    let est = hurst_exponent(&x, 4).unwrap();
    assert!((est.hurst - 0.8).abs() < 0.1, "{}", est.hurst);
    assert!(est.fit_r_squared > 0.9);
}

#[test]
fn locked_oscillators_synchronise_in_the_interior() {
    let layers = gen_coupled_phases(4, 128, 1.0, 3).unwrap();
    let sync = synchrony_pipeline(&trace_from_layers(&layers), SeriesMode::Retrospective).unwrap();
    for t in 16..112 {
        assert!(sync.r.get(t).unwrap() > 0.999);
    }
}

#[test]
fn alternating_regime_raises_metastability() {
    let n = 96;
    let boundary = 48;
    let w = 2.0 * PI / 8.0;
    let a: Vec<f64> = (0..n).map(|t| (w * t as f64).cos()).collect();
    let b: Vec<f64> = (0..n)
        .map(|t| {
            let flip = t >= boundary && ((t - boundary) / 8) % 2 == 0;
            (w * t as f64 + if flip { PI } else { 0.0 }).cos()
        })
        .collect();
    let sync = synchrony_pipeline(&trace_from_layers(&[a, b]), SeriesMode::Retrospective).unwrap();
    let m_boundary = sync.m.get(boundary - 1).unwrap();
    let m_end = sync.m.get(n - 1).unwrap();
    assert!(m_end > m_boundary + 0.1, "M {m_boundary} -> {m_end}");
}

#[test]
fn convergent_fixture_is_stable_convergent() {
    let trace = gen_trace(Scenario::Convergent, 60, 1).unwrap();
    let report = analyze(&trace, &AnalysisConfig::default()).unwrap();
    assert_eq!(report.taxonomy.state, StateLabel::StableConvergent);
    let sig = report.taxonomy.signature;
    assert!(sig.heff_late.unwrap() > 0.85);
    assert!(sig.r_hz_mz.unwrap() < 0.0);
}

#[test]
fn rigid_fixture_has_low_integration_and_locked_fields() {
    for length in [40, 60, 120] {
        let trace = gen_trace(Scenario::Rigid, length, 2).unwrap();
        let report = analyze(&trace, &AnalysisConfig::default()).unwrap();
        let sig = report.taxonomy.signature;
        assert!(sig.heff_late.unwrap() < 0.15, "{length}: {sig:?}");
        assert!(sig.r_hz_mz.unwrap() > 0.80, "{length}: {sig:?}");
    }
}

#[test]
fn partial_fixture_for_two_seeds() {
    for seed in [3, 4] {
        let trace = gen_trace(Scenario::Partial, 60, seed).unwrap();
        let report = analyze(&trace, &AnalysisConfig::default()).unwrap();
        assert_eq!(report.taxonomy.state, StateLabel::PartialIntegration);
    }
}

#[test]
fn metastable_fixture() {
    let trace = gen_trace(Scenario::Metastable, 80, 5).unwrap();
    let report = analyze(&trace, &AnalysisConfig::default()).unwrap();
    assert_eq!(report.taxonomy.state, StateLabel::MetastableHighIntegration);
}

#[test]
fn trace_files_roundtrip_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen_trace(Scenario::Partial, 45, 8).unwrap();
    for (name, format) in [("run.csv", TraceFormat::Csv), ("run.jsonl", TraceFormat::Jsonl)] {
        let path = dir.path().join(name);
        save_trace(&trace, &path, format).unwrap();
        assert_eq!(TraceFormat::from_path(&path), format);
        let back = load_trace(&path, format).unwrap();
        assert_eq!(back.run_id(), "run");
        assert_eq!(back.epochs(), trace.epochs());
        assert_eq!(back.layer_names(), trace.layer_names());
    }
}

#[test]
fn report_file_roundtrip_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen_trace(Scenario::Metastable, 50, 2).unwrap();
    let config = AnalysisConfig {
        w_h: 0.3,
        rolling_window: 4,
        ..Default::default()
    };
    let report = analyze(&trace, &config).unwrap();
    assert_eq!(report.config, config);
    let path = dir.path().join("report.json");
    report.save(&path).unwrap();
    assert_eq!(AnalysisReport::load(&path).unwrap(), report);
}

#[test]
fn stored_signature_reclassifies_identically() {
    let trace = gen_trace(Scenario::Rigid, 60, 9).unwrap();
    let report = analyze(&trace, &AnalysisConfig::default()).unwrap();
    let again = classify_state(&report.taxonomy.signature, &TaxonomyConfig::default());
    assert_eq!(again, report.taxonomy.state);
}

#[test]
fn default_grid_cell_matches_report_mean() {
    let trace = gen_trace(Scenario::Convergent, 60, 3).unwrap();
    let report = analyze(&trace, &AnalysisConfig::default()).unwrap();
    let cells = heff_grid(&report.series.h_raw, &[0.7], &[0.1]).unwrap();
    assert!((cells[0].mean_heff - report.summary.mean_heff.unwrap()).abs() < 1e-12);

    let sweep = sweep_report(&report, &SweepGrids::default()).unwrap();
    assert_eq!(sweep.heff.len(), 16);
    assert_eq!(sweep.weights.cells.len(), 3);
    assert_eq!(sweep.thresholds.crossings.len(), 3);
    let reference = sweep.weights.cells[1].r_psi_acc.unwrap();
    assert!((reference - report.summary.r_psi_acc.unwrap()).abs() < 1e-12);
}

#[test]
fn causal_phase_mode_runs_end_to_end() {
    let trace = gen_trace(Scenario::Convergent, 48, 6).unwrap();
    let config = AnalysisConfig {
        phase_mode: SeriesMode::Causal,
        ..Default::default()
    };
    let report = analyze(&trace, &config).unwrap();
    assert!(report.series.r.as_slice()[..3].iter().all(Option::is_none));
    assert!(report.series.r.get(3).is_some());
}

#[test]
fn missing_accuracy_disables_accuracy_diagnostics() {
    let layers = [
        gen_fgn(0.7, 64, 1).unwrap()[..40].to_vec(),
        gen_fgn(0.7, 64, 2).unwrap()[..40].to_vec(),
    ];
    let report = analyze(&trace_from_layers(&layers), &AnalysisConfig::default()).unwrap();
    assert_eq!(report.summary.r_psi_acc, None);
    assert_eq!(report.summary.accuracy_plateau_epoch, None);
    assert!(report
        .flags
        .warnings
        .iter()
        .any(|w| w.contains("no validation accuracy")));
    let sweep = sweep_report(&report, &SweepGrids::default()).unwrap();
    assert!(sweep.weights.cells.iter().all(|c| c.r_psi_acc.is_none()));
}
