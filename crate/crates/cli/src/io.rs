//! Input files and report emission.

use std::path::Path;

use mismatch_core::channel::{ChannelRepr, TwoOutputChannel};
use mismatch_core::genie::Codebook;
use mismatch_core::metric::{Dmc, DmcRepr, Metric, MetricRepr};
use mismatch_core::prob::FinDist;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

/// Declared symbol names of an input file, kept only to cross-check files.
#[derive(Debug, Clone, Default)]
pub struct Alphabets {
    pub source: String,
    pub x: Option<Vec<String>>,
    pub y: Option<Vec<String>>,
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {what} file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{what} file {}: {e}", path.display())))
}

fn in_file<'a>(path: &'a Path, what: &str) -> impl Fn(mismatch_core::Error) -> CliError + 'a {
    let what = what.to_string();
    move |e| CliError::Input(format!("{what} file {}: {e}", path.display()))
}

pub fn load_dmc(path: &Path, renormalize: bool) -> Result<(Dmc, Alphabets), CliError> {
    let r: DmcRepr = read_json(path, "channel")?;
    let a = Alphabets { source: path.display().to_string(), x: r.x_alphabet.clone(), y: r.y_alphabet.clone() };
    Ok((r.build(renormalize).map_err(in_file(path, "channel"))?, a))
}

pub fn load_metric(path: &Path) -> Result<(Metric, Alphabets), CliError> {
    let r: MetricRepr = read_json(path, "metric")?;
    let a = Alphabets { source: path.display().to_string(), x: r.x_alphabet.clone(), y: r.y_alphabet.clone() };
    Ok((Metric::try_from(r).map_err(in_file(path, "metric"))?, a))
}

pub fn load_two_output(path: &Path, renormalize: bool) -> Result<(TwoOutputChannel, Alphabets), CliError> {
    let r: ChannelRepr = read_json(path, "two-output channel")?;
    let a = Alphabets { source: path.display().to_string(), x: r.x_alphabet.clone(), y: r.y_alphabet.clone() };
    Ok((TwoOutputChannel::from_repr(r, renormalize).map_err(in_file(path, "two-output channel"))?, a))
}

pub fn load_codebook(path: &Path) -> Result<Codebook, CliError> {
    read_json(path, "codebook")
}

/// Files that both declare an alphabet must declare the same one.
pub fn check_alphabets(a: &Alphabets, b: &Alphabets) -> Result<(), CliError> {
    for (axis, u, v) in [("x", &a.x, &b.x), ("y", &a.y, &b.y)] {
        if let (Some(u), Some(v)) = (u, v) {
            if u != v {
                return Err(CliError::Input(format!(
                    "{axis}_alphabet {u:?} in {} differs from {v:?} in {}",
                    a.source, b.source
                )));
            }
        }
    }
    Ok(())
}

pub fn check_shape(what: &str, got: (usize, usize), want: (usize, usize)) -> Result<(), CliError> {
    if got != want {
        return Err(CliError::Input(format!(
            "{what} is {}x{} but the channel is |X|={} by |Y|={}",
            got.0, got.1, want.0, want.1
        )));
    }
    Ok(())
}

/// A comma-separated probability vector such as `0.59,0.41`.
pub fn parse_dist(s: &str, renormalize: bool) -> Result<FinDist, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Input(format!("'{t}' is not a number in '{s}'"))))
        .collect::<Result<_, _>>()?;
    let d = if renormalize { FinDist::renormalized(v) } else { FinDist::new(v) };
    d.map_err(|e| CliError::Input(format!("input distribution '{s}': {e}")))
}

/// The inputs a bound report was computed from, so `verify` needs nothing else.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundInputs {
    pub channel: Dmc,
    pub metric: Metric,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Value>,
    pub result: Value,
    /// The headline numbers, in the configured units where they are information quantities.
    pub summary: Map<String, Value>,
}

/// What a command produced, before formatting.
pub struct Outcome {
    pub command: String,
    pub inputs: Option<Value>,
    pub result: Value,
    pub summary: Map<String, Value>,
    pub message: String,
    /// Nonzero when the command ran but its verdict is a refusal.
    pub exit: i32,
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub fn render(o: &Outcome, cfg: &RunConfig) -> Result<String, CliError> {
    match cfg.format {
        Format::Json => {
            let env = Envelope {
                tool: "mismatch".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: o.command.clone(),
                config: cfg.clone(),
                inputs: o.inputs.clone(),
                result: o.result.clone(),
                summary: o.summary.clone(),
            };
            Ok(serde_json::to_string_pretty(&env).expect("reports serialize") + "\n")
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let cols: Vec<(String, String)> = [
                ("command".to_string(), o.command.clone()),
                ("seed".to_string(), cfg.seed.to_string()),
                ("units".to_string(), cfg.units.name().to_string()),
            ]
            .into_iter()
            .chain(o.summary.iter().map(|(k, v)| (k.clone(), cell(v))))
            .collect();
            let io = |e: csv::Error| CliError::Input(format!("csv output: {e}"));
            w.write_record(cols.iter().map(|c| &c.0)).map_err(io)?;
            w.write_record(cols.iter().map(|c| &c.1)).map_err(io)?;
            let bytes = w.into_inner().map_err(|e| CliError::Input(format!("csv output: {e}")))?;
            Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Array(a) => a.iter().map(cell).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    }
}

pub fn emit(text: &str, cfg: &RunConfig) -> Result<(), CliError> {
    match &cfg.output {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
