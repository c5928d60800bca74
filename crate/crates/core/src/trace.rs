//! Activation traces: the epoch-indexed per-layer signals every analysis
//! starts from, plus CSV/JSONL ingestion and validation.
//!
//! CSV layout: a header `epoch,acc,<layer_1>,...,<layer_n>` (the `acc`
//! column is optional) followed by one row per epoch. Lines starting with
//! `#` are comments. JSONL layout: one object per line with keys `epoch`,
//! optional `acc`, optional `loss`, and `signals` mapping layer name to value.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::series::MetricSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    /// Per-layer batch-mean activation, ordered like `layer_names`.
    pub signals: Vec<f64>,
    pub val_accuracy: Option<f64>,
    pub val_loss: Option<f64>,
}

impl EpochRecord {
    pub fn new(epoch: u32, signals: Vec<f64>) -> Self {
        Self {
            epoch,
            signals,
            val_accuracy: None,
            val_loss: None,
        }
    }

    pub fn with_accuracy(mut self, acc: f64) -> Self {
        self.val_accuracy = Some(acc);
        self
    }
}

/// Epoch-ordered layer signals for one training run.
///
/// Construction goes through [`ActivationTrace::new`], so every value of
/// this type satisfies the invariants: at least two uniquely named layers,
/// one finite signal per layer per epoch, strictly increasing positive
/// epoch indices, and accuracies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationTrace {
    run_id: String,
    layer_names: Vec<String>,
    epochs: Vec<EpochRecord>,
}

impl ActivationTrace {
    pub fn new(run_id: impl Into<String>, layer_names: Vec<String>, epochs: Vec<EpochRecord>) -> Result<Self> {
        if layer_names.len() < 2 {
            return Err(Error::Schema(format!(
                "a trace needs at least 2 layers, got {}",
                layer_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &layer_names {
            if name.is_empty() {
                return Err(Error::Schema("empty layer name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate layer name `{name}`")));
            }
        }
        let mut prev: Option<u32> = None;
        for rec in &epochs {
            if rec.epoch == 0 {
                return Err(Error::Domain("epoch indices start at 1".into()));
            }
            if let Some(p) = prev {
                if rec.epoch <= p {
                    return Err(Error::Schema(format!(
                        "epoch {} follows epoch {p}; epochs must be strictly increasing",
                        rec.epoch
                    )));
                }
            }
            prev = Some(rec.epoch);
            if rec.signals.len() != layer_names.len() {
                return Err(Error::Schema(format!(
                    "epoch {} has {} signals, expected {}",
                    rec.epoch,
                    rec.signals.len(),
                    layer_names.len()
                )));
            }
            check_record_domain(rec, &layer_names)?;
        }
        Ok(Self {
            run_id: run_id.into(),
            layer_names,
            epochs,
        })
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn layer_names(&self) -> &[String] {
        &self.layer_names
    }

    pub fn epochs(&self) -> &[EpochRecord] {
        &self.epochs
    }

    pub fn n_epochs(&self) -> usize {
        self.epochs.len()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_names.len()
    }

    pub fn epoch_numbers(&self) -> Vec<u32> {
        self.epochs.iter().map(|e| e.epoch).collect()
    }

    /// The signal of layer `idx` across all epochs.
    pub fn layer_signal(&self, idx: usize) -> Vec<f64> {
        self.epochs.iter().map(|e| e.signals[idx]).collect()
    }

    pub fn layer_signals(&self) -> Vec<Vec<f64>> {
        (0..self.n_layers()).map(|l| self.layer_signal(l)).collect()
    }

    pub fn accuracy(&self) -> MetricSeries {
        self.epochs.iter().map(|e| e.val_accuracy).collect()
    }

    pub fn has_accuracy(&self) -> bool {
        self.epochs.iter().any(|e| e.val_accuracy.is_some())
    }
}

fn check_record_domain(rec: &EpochRecord, layers: &[String]) -> Result<()> {
    for (v, name) in rec.signals.iter().zip(layers) {
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "epoch {}: non-finite signal {v} for layer `{name}`",
                rec.epoch
            )));
        }
    }
    if let Some(acc) = rec.val_accuracy {
        if !(0.0..=1.0).contains(&acc) {
            return Err(Error::Domain(format!(
                "epoch {}: accuracy {acc} outside [0,1]",
                rec.epoch
            )));
        }
    }
    if let Some(loss) = rec.val_loss {
        if !(loss.is_finite() && loss >= 0.0) {
            return Err(Error::Domain(format!(
                "epoch {}: loss {loss} must be a nonnegative real",
                rec.epoch
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Csv,
    Jsonl,
}

impl TraceFormat {
    /// Guesses the format from the file extension (`.jsonl`/`.ndjson`, else CSV).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("jsonl") || ext.eq_ignore_ascii_case("ndjson") => TraceFormat::Jsonl,
            _ => TraceFormat::Csv,
        }
    }
}

/// Reads a trace file. The run id is the file stem.
pub fn load_trace(path: &Path, format: TraceFormat) -> Result<ActivationTrace> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let run_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match format {
        TraceFormat::Csv => read_csv(file, run_id),
        TraceFormat::Jsonl => read_jsonl(BufReader::new(file), run_id),
    }
}

pub fn save_trace(trace: &ActivationTrace, path: &Path, format: TraceFormat) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    match format {
        TraceFormat::Csv => write_csv(trace, &mut file)?,
        TraceFormat::Jsonl => write_jsonl(trace, &mut file)?,
    }
    file.flush().map_err(io_err)
}

fn parse_f64(field: &str, what: &str, line: u64) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("{what}: `{field}` is not a number"),
    })
}

pub fn read_csv<R: Read>(reader: R, run_id: impl Into<String>) -> Result<ActivationTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.first() != Some(&"epoch") {
        return Err(Error::Schema("missing required column `epoch` (must be first)".into()));
    }
    let has_acc = cols.get(1) == Some(&"acc");
    let first_layer = if has_acc { 2 } else { 1 };
    let layer_names: Vec<String> = cols[first_layer..].iter().map(|s| s.to_string()).collect();
    if layer_names.len() < 2 {
        return Err(Error::Schema(format!(
            "header declares {} layer column(s); at least 2 are required",
            layer_names.len()
        )));
    }

    let mut epochs = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != cols.len() {
            return Err(Error::Schema(format!(
                "row at line {line} has {} fields ({} signals) but the header declares {} ({} layers)",
                row.len(),
                row.len().saturating_sub(first_layer),
                cols.len(),
                layer_names.len()
            )));
        }
        let epoch: u32 = row[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("epoch: `{}` is not a positive integer", &row[0]),
        })?;
        let val_accuracy = if has_acc && !row[1].is_empty() {
            Some(parse_f64(&row[1], "acc", line)?)
        } else {
            None
        };
        let mut signals = Vec::with_capacity(layer_names.len());
        for (field, name) in row.iter().skip(first_layer).zip(&layer_names) {
            if field.is_empty() {
                return Err(Error::Schema(format!(
                    "row at line {line}: missing signal for layer `{name}`"
                )));
            }
            signals.push(parse_f64(field, name, line)?);
        }
        let rec = EpochRecord {
            epoch,
            signals,
            val_accuracy,
            val_loss: None,
        };
        check_record_domain(&rec, &layer_names).map_err(|e| at_line(e, line))?;
        epochs.push(rec);
    }
    if epochs.is_empty() {
        return Err(Error::Schema("trace contains no data rows".into()));
    }
    ActivationTrace::new(run_id, layer_names, epochs)
}

fn at_line(err: Error, line: u64) -> Error {
    match err {
        Error::Domain(m) => Error::Domain(format!("line {line}: {m}")),
        Error::Schema(m) => Error::Schema(format!("line {line}: {m}")),
        other => other,
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    epoch: u32,
    #[serde(default)]
    acc: Option<f64>,
    #[serde(default)]
    loss: Option<f64>,
    signals: serde_json::Map<String, serde_json::Value>,
}

pub fn read_jsonl<R: BufRead>(reader: R, run_id: impl Into<String>) -> Result<ActivationTrace> {
    let mut layer_names: Option<Vec<String>> = None;
    let mut epochs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx as u64 + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let names = layer_names.get_or_insert_with(|| rec.signals.keys().cloned().collect());
        if rec.signals.len() != names.len() {
            return Err(Error::Schema(format!(
                "record at line {lineno} has {} signals, expected {}",
                rec.signals.len(),
                names.len()
            )));
        }
        let mut signals = Vec::with_capacity(names.len());
        for name in names.iter() {
            let value = rec
                .signals
                .get(name)
                .ok_or_else(|| Error::Schema(format!("record at line {lineno}: missing signal for layer `{name}`")))?;
            let v = match value {
                serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: format!("{name}: unrepresentable number"),
                })?,
                serde_json::Value::Null => {
                    return Err(Error::Schema(format!(
                        "record at line {lineno}: missing signal for layer `{name}`"
                    )))
                }
                other => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("{name}: expected a number, got {other}"),
                    })
                }
            };
            signals.push(v);
        }
        let rec = EpochRecord {
            epoch: rec.epoch,
            signals,
            val_accuracy: rec.acc,
            val_loss: rec.loss,
        };
        check_record_domain(&rec, names).map_err(|e| at_line(e, lineno))?;
        epochs.push(rec);
    }
    let layer_names = layer_names.ok_or_else(|| Error::Schema("trace contains no records".into()))?;
    ActivationTrace::new(run_id, layer_names, epochs)
}

pub fn write_csv<W: Write>(trace: &ActivationTrace, writer: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io {
        path: "<csv writer>".into(),
        source: std::io::Error::other(e),
    };
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let has_acc = trace.has_accuracy();
    let mut header = vec!["epoch".to_string()];
    if has_acc {
        header.push("acc".into());
    }
    header.extend(trace.layer_names.iter().cloned());
    wtr.write_record(&header).map_err(csv_err)?;
    for rec in &trace.epochs {
        let mut row = vec![rec.epoch.to_string()];
        if has_acc {
            row.push(rec.val_accuracy.map(|a| a.to_string()).unwrap_or_default());
        }
        row.extend(rec.signals.iter().map(|v| v.to_string()));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })
}

pub fn write_jsonl<W: Write>(trace: &ActivationTrace, mut writer: W) -> Result<()> {
    let io = |source| Error::Io {
        path: "<jsonl writer>".into(),
        source,
    };
    for rec in &trace.epochs {
        let mut obj = serde_json::Map::new();
        obj.insert("epoch".into(), rec.epoch.into());
        if let Some(acc) = rec.val_accuracy {
            obj.insert("acc".into(), acc.into());
        }
        if let Some(loss) = rec.val_loss {
            obj.insert("loss".into(), loss.into());
        }
        let signals: serde_json::Map<String, serde_json::Value> = trace
            .layer_names
            .iter()
            .zip(&rec.signals)
            .map(|(n, v)| (n.clone(), (*v).into()))
            .collect();
        obj.insert("signals".into(), signals.into());
        serde_json::to_writer(&mut writer, &obj).map_err(|e| io(e.into()))?;
        writer.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

/// Advisory checks. Never fails; returns human-readable warnings.
pub fn validate_trace(trace: &ActivationTrace, config: &AnalysisConfig) -> Vec<String> {
    let mut warnings = Vec::new();
    let min_prefix = config.min_dfa_prefix();
    if trace.n_epochs() < min_prefix {
        warnings.push(format!(
            "series too short for any DFA estimate before epoch {min_prefix} \
             ({} epochs recorded)",
            trace.n_epochs()
        ));
    }
    for (l, name) in trace.layer_names.iter().enumerate() {
        let first = trace.epochs.first().map(|e| e.signals[l]);
        if let Some(first) = first {
            if trace.epochs.iter().all(|e| e.signals[l] == first) {
                warnings.push(format!("layer `{name}` has a constant signal"));
            }
        }
    }
    let with_acc = trace.epochs.iter().filter(|e| e.val_accuracy.is_some()).count();
    if with_acc == 0 {
        warnings.push("no validation accuracy recorded: accuracy-dependent diagnostics disabled".into());
    } else if with_acc < trace.n_epochs() {
        warnings.push(format!(
            "validation accuracy missing for {} of {} epochs",
            trace.n_epochs() - with_acc,
            trace.n_epochs()
        ));
    }
    warnings
}
