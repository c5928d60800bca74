use std::fmt::Write as _;
use std::io::IsTerminal;

use traindyn::taxonomy::TaxonomySignature;
use traindyn::{AnalysisReport, StateLabel};

#[derive(Clone, Copy)]
pub struct Style {
    pub color: bool,
}

impl Style {
    /// Colour only on a terminal, and never when `TRAINDYN_NO_COLOR` is set.
    pub fn detect() -> Self {
        let disabled = std::env::var_os("TRAINDYN_NO_COLOR").is_some_and(|v| !v.is_empty());
        Self {
            color: !disabled && std::io::stdout().is_terminal(),
        }
    }

    fn paint(self, code: &str, text: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    pub fn error_prefix(self) -> String {
        if self.color && std::io::stderr().is_terminal() {
            "\x1b[1;31merror:\x1b[0m".into()
        } else {
            "error:".into()
        }
    }
}

pub fn state_label(state: StateLabel, style: Style) -> String {
    let code = match state {
        StateLabel::StableConvergent => "1;32",
        StateLabel::MetastableHighIntegration => "1;36",
        StateLabel::PartialIntegration => "1;33",
        StateLabel::RigidlySynchronised => "1;31",
        StateLabel::Unclassified => "1",
    };
    style.paint(code, state.display_name())
}

fn num(v: Option<f64>, signed: bool) -> String {
    match v {
        Some(v) if signed => format!("{v:+.3}"),
        Some(v) => format!("{v:.3}"),
        None => "n/a".into(),
    }
}

fn mean_std(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.3} ± {s:.3}"),
        _ => "n/a".into(),
    }
}

fn epoch(e: Option<u32>) -> String {
    e.map_or_else(|| "never".into(), |e| format!("epoch {e}"))
}

/// One-screen summary with the headline diagnostics.
pub fn summary(report: &AnalysisReport, style: Style) -> String {
    let s = &report.summary;
    let sig = &report.taxonomy.signature;
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k:<16}{v}");
    };
    line("run", s.run_id.clone());
    line("epochs", format!("{} ({} layers)", s.n_epochs, s.layers.len()));
    line(
        "best acc.",
        s.best_accuracy.map_or("n/a".into(), |a| format!("{:.1}%", 100.0 * a)),
    );
    line(
        "H_eff",
        format!(
            "{}  (late {})",
            mean_std(s.mean_heff, s.std_heff),
            num(sig.heff_late, false)
        ),
    );
    line("M", num(s.mean_m, false));
    line("Psi", mean_std(s.mean_psi, s.std_psi));
    line("r(H_z,M_z)", num(s.r_hz_mz, true));
    line("r(Psi,acc)", num(s.r_psi_acc, true));
    line(
        "sigma_Psi",
        format!(
            "< {:.2} at {}; trend {}",
            report.config.volatility_threshold,
            epoch(s.volatility_crossing_epoch),
            sig.trend.map_or("n/a", |t| t.as_str())
        ),
    );
    line("acc. plateau", epoch(s.accuracy_plateau_epoch));
    line("state", state_label(report.taxonomy.state, style));
    for w in &report.flags.warnings {
        let _ = writeln!(out, "{} {w}", style.paint("33", "warning:"));
    }
    for u in &report.flags.unavailable {
        let _ = writeln!(out, "{} {u}", style.paint("2", "unavailable:"));
    }
    out
}

pub fn classification(sig: &TaxonomySignature, state: StateLabel, style: Style) -> String {
    format!(
        "{:<16}{}\n{:<16}{}\n{:<16}{}\n{:<16}{}\n",
        "late H_eff",
        num(sig.heff_late, false),
        "sigma_Psi trend",
        sig.trend.map_or("n/a", |t| t.as_str()),
        "r(H_z,M_z)",
        num(sig.r_hz_mz, true),
        "state",
        state_label(state, style)
    )
}

/// The error and its causes, skipping causes already spelled out by an
/// outer message.
pub fn error_chain(err: &anyhow::Error) -> String {
    let mut msg = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
    }
    msg
}
