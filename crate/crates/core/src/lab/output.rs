use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ConvergenceResult, ExperimentResult, SweepResult, TrialOutcome};
use crate::error::{Error, Result};

pub const CONVERGENCE_HEADER: [&str; 5] = ["trial", "iter", "rel_err", "f", "grad_norm"];
pub const SWEEP_HEADER: [&str; 5] = ["param", "trials", "successes", "rate", "mean_iters"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    /// Whitespace-separated columns for gnuplot.
    Dat,
}

impl OutputFormat {
    pub fn all() -> Vec<Self> {
        vec![Self::Csv, Self::Json, Self::Dat]
    }
}

/// 17 significant digits.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_number(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes traces as `trial,iter,rel_err,f,grad_norm` rows.
pub fn write_trace_csv(traces: &[TrialOutcome], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CONVERGENCE_HEADER).map_err(csv_err(path))?;
    for t in traces {
        for r in &t.records {
            w.write_record([
                t.trial.to_string(),
                r.iter.to_string(),
                opt_number(r.rel_err),
                format_number(r.f),
                format_number(r.grad_norm),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SWEEP_HEADER).map_err(csv_err(path))?;
    for p in &result.points {
        w.write_record([
            format_number(p.param),
            p.trials.to_string(),
            p.successes.to_string(),
            format_number(p.rate),
            opt_number(p.mean_iters),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

fn convergence_dat(result: &ConvergenceResult) -> String {
    let mut s = String::from("# iter rel_err  (one block per trial)\n");
    for t in &result.traces {
        s.push_str(&format!("# trial {}\n", t.trial));
        for r in &t.records {
            s.push_str(&format!("{} {}\n", r.iter, opt_number(r.rel_err)));
        }
        s.push_str("\n\n");
    }
    s
}

fn sweep_dat(result: &SweepResult) -> String {
    let mut s = String::from("# param rate ci95_half_width\n");
    for p in &result.points {
        s.push_str(&format!(
            "{} {} {}\n",
            format_number(p.param),
            format_number(p.rate),
            format_number(p.ci95_half_width)
        ));
    }
    s
}

/// Writes the requested formats into `dir` (created if missing) and returns
/// the written paths. File stems: `convergence` or `success_rate`.
pub fn write_results(result: &ExperimentResult, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = match result {
        ExperimentResult::Convergence(_) => "convergence",
        ExperimentResult::SuccessRate(_) => "success_rate",
    };
    let mut written = Vec::new();
    for &format in formats {
        let path = dir.join(format!(
            "{stem}.{}",
            match format {
                OutputFormat::Csv => "csv",
                OutputFormat::Json => "json",
                OutputFormat::Dat => "dat",
            }
        ));
        match (format, result) {
            (OutputFormat::Csv, ExperimentResult::Convergence(r)) => write_trace_csv(&r.traces, &path)?,
            (OutputFormat::Csv, ExperimentResult::SuccessRate(r)) => write_sweep_csv(r, &path)?,
            (OutputFormat::Json, r) => write_json(r, &path)?,
            (OutputFormat::Dat, ExperimentResult::Convergence(r)) => write_text(&path, &convergence_dat(r))?,
            (OutputFormat::Dat, ExperimentResult::SuccessRate(r)) => write_text(&path, &sweep_dat(r))?,
        }
        written.push(path);
    }
    Ok(written)
}
