//! CSV rows and the human-readable cost table.

use std::io::Write;
use std::path::Path;

use ptinfer::{CostReport, Error, Result};
use serde::Serialize;

/// One benchmark or party run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRow {
    pub rep: String,
    pub protocol: String,
    pub shape: String,
    pub profile: String,
    pub bytes_a: f64,
    pub bytes_b: f64,
    pub messages: f64,
    pub rounds: f64,
    pub simulated_time: f64,
    pub wall_time: f64,
    pub max_abs_error: Option<f64>,
}

impl RunRow {
    pub fn new(
        rep: impl Into<String>,
        protocol: &str,
        shape: &str,
        profile: &str,
        cost: &CostReport,
    ) -> Self {
        Self {
            rep: rep.into(),
            protocol: protocol.into(),
            shape: shape.into(),
            profile: profile.into(),
            bytes_a: cost.bytes_sent[0] as f64,
            bytes_b: cost.bytes_sent[1] as f64,
            messages: cost.message_count as f64,
            rounds: cost.round_count as f64,
            simulated_time: cost.simulated_time(),
            wall_time: 0.0,
            max_abs_error: None,
        }
    }

    /// Column-wise mean of `rows`, labelled `mean`.
    pub fn mean(rows: &[RunRow]) -> Option<RunRow> {
        let first = rows.first()?;
        let n = rows.len() as f64;
        let avg = |f: fn(&RunRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let errors: Option<Vec<f64>> = rows.iter().map(|r| r.max_abs_error).collect();
        Some(RunRow {
            rep: "mean".into(),
            protocol: first.protocol.clone(),
            shape: first.shape.clone(),
            profile: first.profile.clone(),
            bytes_a: avg(|r| r.bytes_a),
            bytes_b: avg(|r| r.bytes_b),
            messages: avg(|r| r.messages),
            rounds: avg(|r| r.rounds),
            simulated_time: avg(|r| r.simulated_time),
            wall_time: avg(|r| r.wall_time),
            max_abs_error: errors.map(|e| e.iter().sum::<f64>() / n),
        })
    }
}

/// Metric row of the approximation suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaeRow {
    pub function: String,
    pub variant: String,
    pub metric: String,
    pub x: Option<f64>,
    pub value: f64,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Serializes `rows` to `path`, or to stdout when `path` is `None`.
pub fn write_csv<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-label cost table.
pub fn render(cost: &CostReport) -> String {
    let mut out = format!(
        "{:<48} {:>14} {:>6} {:>6} {:>12}\n",
        "label", "bytes", "msgs", "rounds", "sim_s"
    );
    for (label, c) in &cost.per_label {
        if label.starts_with("setup/") {
            continue;
        }
        out.push_str(&format!(
            "{:<48} {:>14} {:>6} {:>6} {:>12.6}\n",
            label,
            c.bytes,
            c.messages,
            c.rounds,
            c.simulated_ps as f64 / 1e12
        ));
    }
    out.push_str(&format!(
        "{:<48} {:>14} {:>6} {:>6} {:>12.6}\n",
        "total",
        cost.total_bytes(),
        cost.message_count,
        cost.round_count,
        cost.simulated_time()
    ));
    if !cost.uncosted.is_empty() {
        let names: Vec<&str> = cost.uncosted.iter().map(String::as_str).collect();
        out.push_str(&format!("uncosted gadgets: {}\n", names.join(", ")));
    }
    out
}
