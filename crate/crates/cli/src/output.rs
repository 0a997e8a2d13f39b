use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const CSV_HEADER: [&str; 12] =
    ["command", "spec", "delta", "eta", "T", "R", "reps", "seed", "estimate", "stderr", "elapsed_s", "fingerprint"];

/// One output line. Empty cells mean the parameter does not apply to the command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub command: String,
    pub spec: String,
    pub delta: Option<f64>,
    pub eta: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    #[serde(rename = "R")]
    pub window: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub elapsed_s: Option<f64>,
    pub fingerprint: String,
}

/// Path of the resolved-config file written next to an output file.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

pub fn write_rows(rows: &[Row], format: Format, out: impl Write) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut out = out;
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Writes rows to the configured destination and, for files, the resolved portable config beside them.
pub fn emit(rows: &[Row], cfg: &RunConfig) -> Result<(), CliError> {
    match &cfg.output {
        None => write_rows(rows, cfg.format, io::stdout().lock()),
        Some(path) => {
            write_rows(rows, cfg.format, BufWriter::new(File::create(path)?))?;
            let side = BufWriter::new(File::create(sidecar_path(path))?);
            serde_json::to_writer_pretty(side, &cfg.portable())?;
            Ok(())
        }
    }
}
