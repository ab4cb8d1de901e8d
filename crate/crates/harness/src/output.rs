//! CSV time series and JSON summaries, each stamped with provenance.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use llbar_core::diagnostics::RunRecord;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const RECORD_COLUMNS: [&str; 7] = ["t", "l2", "l4", "h1", "h2", "lyapunov", "h_residual"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    /// Squared H2 norm of the current density.
    pub nu_infinity: f64,
    pub version: String,
}

impl Provenance {
    fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("# experiment: {}", self.experiment),
            format!("# config_hash: {}", self.config_hash),
            format!("# seed: {}", self.seed),
            format!("# nu_infinity: {:e}", self.nu_infinity),
            format!("# version: {}", self.version),
        ]
    }
}

/// Shortest round-trip text for a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// Writes `#` provenance lines, a header and rows of floats.
pub fn write_table(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for line in prov.comment_lines() {
        writeln!(out, "{line}").map_err(|e| HarnessError::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let fmt = |e: csv::Error| HarnessError::Format(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(fmt)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(fmt)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_record(path: &Path, prov: &Provenance, record: &RunRecord) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..record.len())
        .map(|i| {
            vec![
                record.times[i],
                record.l2[i],
                record.l4[i],
                record.h1[i],
                record.h2[i],
                record.lyapunov[i],
                record.h_residual[i],
            ]
        })
        .collect();
    write_table(path, prov, &RECORD_COLUMNS, &rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub comments: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn comment(&self, key: &str) -> Option<&str> {
        self.comments.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut comments = Vec::new();
    let mut body = String::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        match line.strip_prefix('#') {
            Some(c) => {
                if let Some((k, v)) = c.split_once(':') {
                    comments.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            None => {
                body.push_str(&line);
                body.push('\n');
            }
        }
    }
    let bad = |e: String| HarnessError::Format(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| bad(format!("{s}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { comments, header, rows })
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, prov: &Provenance, body: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(&Stamped { provenance: prov, body })
        .map_err(|e| HarnessError::Format(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}
