mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, ColorChoice, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use traindyn::config::{HeffSummary, IntegrationField, SeriesMode};
use traindyn::sensitivity::{
    group_heff_grid, render_group_table, render_heff_table, render_threshold_table, render_weight_table, sweep_report,
    RunSensitivity, SweepGrids,
};
use traindyn::synthgen::{gen_trace, Scenario};
use traindyn::taxonomy::{classify_state, TaxonomySignature};
use traindyn::trace::{load_trace, save_trace, write_csv, write_jsonl};
use traindyn::{analyze, AnalysisConfig, AnalysisReport, MetricSeries, TraceFormat, VolatilityTrend};

use output::Style;

#[derive(Parser)]
#[command(
    name = "traindyn",
    version,
    about = "Dynamical diagnostics for layer-activation training traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse a trace and write the JSON report.
    Analyze(AnalyzeArgs),
    /// Sweep tuning, weight and threshold parameters over stored series.
    Sensitivity(SensitivityArgs),
    /// Assign a training state to a trace, a report, or an explicit signature.
    Classify(ClassifyArgs),
    /// Generate a synthetic trace shaped to one training state.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Retrospective,
    Causal,
}

impl From<Mode> for SeriesMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Retrospective => SeriesMode::Retrospective,
            Mode::Causal => SeriesMode::Causal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Field {
    Heff,
    Hraw,
}

#[derive(Clone, Copy, ValueEnum)]
enum Summary {
    Late,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

impl From<Format> for TraceFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TraceFormat::Csv,
            Format::Jsonl => TraceFormat::Jsonl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Convergent,
    Rigid,
    Partial,
    Metastable,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Convergent => Scenario::Convergent,
            ScenarioArg::Rigid => Scenario::Rigid,
            ScenarioArg::Partial => Scenario::Partial,
            ScenarioArg::Metastable => Scenario::Metastable,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum TrendArg {
    RapidlyCollapsing,
    SlowlyCollapsing,
    PersistentlyElevated,
    FlatNonconverging,
}

impl From<TrendArg> for VolatilityTrend {
    fn from(t: TrendArg) -> Self {
        match t {
            TrendArg::RapidlyCollapsing => VolatilityTrend::RapidlyCollapsing,
            TrendArg::SlowlyCollapsing => VolatilityTrend::SlowlyCollapsing,
            TrendArg::PersistentlyElevated => VolatilityTrend::PersistentlyElevated,
            TrendArg::FlatNonconverging => VolatilityTrend::FlatNonconverging,
        }
    }
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0,1], got {v}"))
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

/// Analysis parameters; anything omitted keeps its default.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Target Hurst exponent of the tuning curve [default: 0.7]
    #[arg(long, value_name = "H")]
    h_opt: Option<f64>,
    /// Width of the tuning curve [default: 0.1]
    #[arg(long, value_name = "SIGMA", value_parser = positive)]
    sigma_h: Option<f64>,
    /// Integration weight in [0,1]; metastability gets 1 - w_h [default: 0.5]
    #[arg(long, value_name = "W", value_parser = unit_interval)]
    w_h: Option<f64>,
    /// Rolling volatility window in epochs [default: 5]
    #[arg(long, value_name = "EPOCHS")]
    window: Option<usize>,
    /// Volatility convergence threshold [default: 0.30]
    #[arg(long, value_name = "T", value_parser = positive)]
    threshold: Option<f64>,
    /// Phase extraction over the full signal or per prefix [default: retrospective]
    #[arg(long, value_enum)]
    phase_mode: Option<Mode>,
    /// Hurst estimation per prefix or over the full signal [default: causal]
    #[arg(long, value_enum)]
    dfa_mode: Option<Mode>,
    /// Smallest DFA window [default: 4]
    #[arg(long, value_name = "S")]
    dfa_min_scale: Option<usize>,
    /// Fraction of peak accuracy that marks the plateau [default: 0.99]
    #[arg(long, value_name = "F")]
    plateau_fraction: Option<f64>,
    /// Integration field correlated against metastability [default: heff]
    #[arg(long, value_enum)]
    hz_field: Option<Field>,
    /// H_eff level used by the classifier [default: late]
    #[arg(long, value_enum)]
    heff_summary: Option<Summary>,
    /// Trailing fraction of epochs averaged for late H_eff [default: 0.25]
    #[arg(long, value_name = "F")]
    late_fraction: Option<f64>,
    /// Volatility ratio below which collapse is rapid [default: 0.6]
    #[arg(long, value_name = "R")]
    rapid_ratio: Option<f64>,
    /// Volatility ratio below which collapse is slow [default: 0.85]
    #[arg(long, value_name = "R")]
    slow_ratio: Option<f64>,
    /// Relative band counted as flat volatility [default: 0.15]
    #[arg(long, value_name = "R")]
    flat_band: Option<f64>,
    /// Late H_eff above which integration is high [default: 0.85]
    #[arg(long, value_name = "H")]
    high_heff: Option<f64>,
    /// Late H_eff below which integration is low [default: 0.15]
    #[arg(long, value_name = "H")]
    low_heff: Option<f64>,
    /// Upper bound of partial integration [default: 0.50]
    #[arg(long, value_name = "H")]
    partial_heff_max: Option<f64>,
    /// r(H_z, M_z) above which fields are rigidly coupled [default: 0.80]
    #[arg(long, value_name = "R")]
    rigid_r: Option<f64>,
    /// |r(H_z, M_z)| below which fields are weakly coupled [default: 0.5]
    #[arg(long, value_name = "R")]
    weak_r: Option<f64>,
}

impl ConfigArgs {
    fn build(&self) -> AnalysisConfig {
        let mut c = AnalysisConfig::default();
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v.into(); })*
            };
        }
        set! {
            h_opt => c.h_opt,
            sigma_h => c.sigma_h,
            w_h => c.w_h,
            window => c.rolling_window,
            threshold => c.volatility_threshold,
            phase_mode => c.phase_mode,
            dfa_mode => c.dfa_mode,
            dfa_min_scale => c.dfa_min_scale,
            plateau_fraction => c.plateau_fraction,
            late_fraction => c.taxonomy.late_fraction,
            rapid_ratio => c.taxonomy.rapid_ratio,
            slow_ratio => c.taxonomy.slow_ratio,
            flat_band => c.taxonomy.flat_band,
            high_heff => c.taxonomy.high_heff,
            low_heff => c.taxonomy.low_heff,
            partial_heff_max => c.taxonomy.partial_heff_max,
            rigid_r => c.taxonomy.rigid_r,
            weak_r => c.taxonomy.weak_r,
        }
        if let Some(f) = self.hz_field {
            c.hz_field = match f {
                Field::Heff => IntegrationField::Heff,
                Field::Hraw => IntegrationField::Hraw,
            };
        }
        if let Some(s) = self.heff_summary {
            c.taxonomy.heff_summary = match s {
                Summary::Late => HeffSummary::Late,
                Summary::Mean => HeffSummary::Mean,
            };
        }
        c
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace file (CSV or JSONL)
    trace: PathBuf,
    /// Trace format; inferred from the extension when omitted
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the JSON report here
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Print the JSON report to stdout instead of the summary
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SensitivityArgs {
    /// Reports (.json) or traces to sweep; they form group A
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Reports or traces forming a comparison group B
    #[arg(long, num_args = 1.., value_name = "PATH")]
    group_b: Vec<PathBuf>,
    #[arg(long, default_value = "A")]
    label_a: String,
    #[arg(long, default_value = "B")]
    label_b: String,
    /// Tuning targets [default: 0.5 0.6 0.7 0.8]
    #[arg(long, num_args = 1.., value_name = "H")]
    h_opt_grid: Vec<f64>,
    /// Tuning widths [default: 0.05 0.10 0.15 0.20]
    #[arg(long, num_args = 1.., value_name = "SIGMA", value_parser = positive)]
    sigma_grid: Vec<f64>,
    /// Integration weights [default: 0.3 0.5 0.7]
    #[arg(long, num_args = 1.., value_name = "W", value_parser = unit_interval)]
    w_h_grid: Vec<f64>,
    /// Volatility thresholds [default: 0.25 0.30 0.35]
    #[arg(long, num_args = 1.., value_name = "T", value_parser = positive)]
    thresholds: Vec<f64>,
    /// Minimum group gap counted as separation
    #[arg(long, default_value_t = 0.30)]
    gap: f64,
    /// Trace format for trace inputs; inferred when omitted
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the grids as JSON here
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Print JSON to stdout instead of text tables
    #[arg(long)]
    json: bool,
    /// Analysis parameters applied to trace inputs
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Report (.json) or trace; omit to classify the signature given by flags
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Late H_eff level
    #[arg(long, value_name = "H", conflicts_with = "input", requires_all = ["trend"])]
    heff_late: Option<f64>,
    /// Volatility trend
    #[arg(long, value_enum, conflicts_with = "input")]
    trend: Option<TrendArg>,
    /// Inter-field synchrony r(H_z, M_z)
    #[arg(long, value_name = "R", conflicts_with = "input", allow_hyphen_values = true)]
    r_hz_mz: Option<f64>,
    /// Print JSON instead of text
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    scenario: ScenarioArg,
    /// Seed for the generator (required)
    #[arg(long)]
    seed: u64,
    /// Number of epochs
    #[arg(long, default_value_t = 60)]
    length: usize,
    /// Output file; stdout when omitted
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Output format; inferred from the output extension when omitted
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn trace_format(explicit: Option<Format>, path: &Path) -> TraceFormat {
    explicit.map_or_else(|| TraceFormat::from_path(path), Into::into)
}

fn is_report(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn analyze_path(path: &Path, format: Option<Format>, config: &AnalysisConfig) -> Result<AnalysisReport> {
    let trace = load_trace(path, trace_format(format, path))?;
    analyze(&trace, config).with_context(|| format!("analysing {}", path.display()))
}

/// A stored report, or a trace analysed on the fly.
fn load_input(path: &Path, format: Option<Format>, config: &AnalysisConfig) -> Result<AnalysisReport> {
    if is_report(path) {
        Ok(AnalysisReport::load(path)?)
    } else {
        analyze_path(path, format, config)
    }
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_analyze(args: AnalyzeArgs, style: Style) -> Result<()> {
    let config = args.config.build();
    config.validate()?;
    let report = analyze_path(&args.trace, args.format, &config)?;
    let json = report.to_json()? + "\n";
    if let Some(path) = &args.output {
        write_output(path, &json)?;
    }
    if args.json {
        print!("{json}");
    } else {
        print!("{}", output::summary(&report, style));
    }
    Ok(())
}

fn cmd_sensitivity(args: SensitivityArgs) -> Result<()> {
    let config = args.config.build();
    config.validate()?;
    let defaults = SweepGrids::default();
    let pick = |given: &[f64], default: Vec<f64>| if given.is_empty() { default } else { given.to_vec() };
    let grids = SweepGrids {
        h_opt: pick(&args.h_opt_grid, defaults.h_opt),
        sigma_h: pick(&args.sigma_grid, defaults.sigma_h),
        w_h: pick(&args.w_h_grid, defaults.w_h),
        thresholds: pick(&args.thresholds, defaults.thresholds),
        gap: args.gap,
    };
    let load_all = |paths: &[PathBuf]| -> Result<Vec<AnalysisReport>> {
        paths.iter().map(|p| load_input(p, args.format, &config)).collect()
    };
    let group_a = load_all(&args.inputs)?;
    let group_b = load_all(&args.group_b)?;

    let runs = group_a
        .iter()
        .chain(&group_b)
        .map(|r| sweep_report(r, &grids))
        .collect::<traindyn::Result<Vec<RunSensitivity>>>()?;
    let groups = if group_b.is_empty() {
        None
    } else {
        let h_raw = |g: &[AnalysisReport]| g.iter().map(|r| r.series.h_raw.clone()).collect::<Vec<MetricSeries>>();
        Some(group_heff_grid(
            &h_raw(&group_a),
            &h_raw(&group_b),
            &grids.h_opt,
            &grids.sigma_h,
            grids.gap,
        )?)
    };

    let doc = serde_json::json!({ "grids": grids, "runs": runs, "groups": groups });
    let json = serde_json::to_string_pretty(&doc)? + "\n";
    if let Some(path) = &args.output {
        write_output(path, &json)?;
    }
    if args.json {
        print!("{json}");
        return Ok(());
    }
    let mut text = String::from("Mean H_eff\n");
    text += &render_heff_table(&runs);
    if let Some(cells) = &groups {
        text += &format!("\nGroup separation (gap > {:.2})\n", grids.gap);
        text += &render_group_table(cells, &args.label_a, &args.label_b);
    }
    text += "\nr(Psi, acc) by weight\n";
    text += &render_weight_table(&runs);
    text += "\nsigma_Psi threshold crossings\n";
    text += &render_threshold_table(&runs);
    print!("{text}");
    Ok(())
}

fn cmd_classify(args: ClassifyArgs, style: Style) -> Result<()> {
    let config = args.config.build();
    config.validate()?;
    let signature = match &args.input {
        Some(path) => load_input(path, args.format, &config)?.taxonomy.signature,
        None => {
            let (Some(heff), Some(trend)) = (args.heff_late, args.trend) else {
                bail!("give an input file, or --heff-late and --trend (plus --r-hz-mz if known)");
            };
            TaxonomySignature {
                heff_late: Some(heff),
                trend: Some(trend.into()),
                r_hz_mz: args.r_hz_mz,
                r_psi_acc: None,
            }
        }
    };
    let state = classify_state(&signature, &config.taxonomy);
    if args.json {
        let doc = serde_json::json!({ "signature": signature, "state": state });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        print!("{}", output::classification(&signature, state, style));
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs, style: Style) -> Result<()> {
    let scenario: Scenario = args.scenario.into();
    let trace = gen_trace(scenario, args.length, args.seed)?;
    let report = analyze(&trace, &AnalysisConfig::default())?;
    let label = output::state_label(report.taxonomy.state, style);
    match &args.output {
        Some(path) => {
            save_trace(&trace, path, trace_format(args.format, path))?;
            println!(
                "wrote {} ({} epochs, self-check: {label})",
                path.display(),
                trace.n_epochs()
            );
        }
        None => {
            let mut out = std::io::stdout().lock();
            match args.format.unwrap_or(Format::Csv) {
                Format::Csv => write_csv(&trace, &mut out)?,
                Format::Jsonl => write_jsonl(&trace, &mut out)?,
            }
            out.flush()?;
            eprintln!("self-check: {label}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let style = Style::detect();
    let command = Cli::command().color(if style.color {
        ColorChoice::Auto
    } else {
        ColorChoice::Never
    });
    let parsed = command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a, style),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Classify(a) => cmd_classify(a, style),
        Command::Synth(a) => cmd_synth(a, style),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{} {}", style.error_prefix(), output::error_chain(&e));
            ExitCode::from(1)
        }
    }
}
