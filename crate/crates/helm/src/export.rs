//! Writing run logs to disk.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::log::{LogError, RunLog};
use crate::metrics::{compute_metrics, Metrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
    Plotdata,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Jsonl, Format::Csv, Format::Plotdata];

    pub fn file_name(self) -> &'static str {
        match self {
            Format::Jsonl => "run.jsonl",
            Format::Csv => "run.csv",
            Format::Plotdata => "plot.json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            "plotdata" => Ok(Format::Plotdata),
            other => Err(format!("unknown format {other:?} (jsonl, csv, plotdata)")),
        }
    }
}

/// Time series of the speed and heading loops plus the metric summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotData {
    pub metrics: Metrics,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub sp_u: Vec<f64>,
    pub psi: Vec<f64>,
    pub sp_psi: Vec<Option<f64>>,
    pub mode: Vec<&'static str>,
}

pub fn plot_data(log: &RunLog) -> PlotData {
    let ticks = &log.ticks;
    PlotData {
        metrics: compute_metrics(log, &log.header.plan),
        t: ticks.iter().map(|t| t.t).collect(),
        x: ticks.iter().map(|t| t.measured.x).collect(),
        y: ticks.iter().map(|t| t.measured.y).collect(),
        u: ticks.iter().map(|t| t.measured.speed).collect(),
        sp_u: ticks.iter().map(|t| t.speed_sp).collect(),
        psi: ticks.iter().map(|t| t.measured.psi).collect(),
        sp_psi: ticks.iter().map(|t| t.heading_sp).collect(),
        mode: ticks.iter().map(|t| t.mode.name()).collect(),
    }
}

/// Writes `log` in `format` into `dir`, returning the file path.
pub fn export(log: &RunLog, format: Format, dir: &Path) -> Result<PathBuf, LogError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format.file_name());
    let mut w = BufWriter::new(File::create(&path)?);
    match format {
        Format::Jsonl => log.write_jsonl(&mut w)?,
        Format::Csv => log.write_csv(&mut w)?,
        Format::Plotdata => {
            serde_json::to_writer_pretty(&mut w, &plot_data(log)).map_err(|source| LogError::Json { line: 0, source })?
        }
    }
    w.flush()?;
    Ok(path)
}
