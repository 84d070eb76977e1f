use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::runner::{QuenchResult, RunDiagnostics};
use crate::CliError;

const NA: &str = "NA";

/// Formats `x` with 15 significant digits, trimming trailing zeros, in the
/// style of C's `%.15g`.
pub fn fmt_g15(x: f64) -> String {
    if !x.is_finite() {
        return NA.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.14e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let fixed = format!("{:.*}", (14 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_g15).unwrap_or_else(|| NA.into())
}

/// A file-name-safe form of a quench id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._=-".contains(c) { c } else { '_' })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_series(path: &Path, results: &[QuenchResult]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["quench_id", "measure", "ell", "delta", "t", "value"])?;
    for r in results {
        for s in &r.series {
            for (t, v) in s.times.iter().zip(&s.values) {
                w.write_record([
                    r.id.clone(),
                    s.measure.label().into(),
                    s.ell.to_string(),
                    fmt_g15(s.delta),
                    fmt_g15(*t),
                    fmt_g15(*v),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_degrees(path: &Path, results: &[QuenchResult]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["quench_id", "measure", "ell", "delta", "degree", "window_start", "window_end"])?;
    for r in results {
        for d in &r.degrees {
            w.write_record([
                r.id.clone(),
                d.measure.label().into(),
                d.ell.to_string(),
                fmt_g15(d.delta),
                opt(d.degree),
                opt(d.window.map(|w| w.0)),
                opt(d.window.map(|w| w.1)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_timescales(path: &Path, results: &[QuenchResult]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["quench_id", "series_kind", "ell", "delta", "mean_gap", "n_extrema"])?;
    for r in results {
        for t in &r.timescales {
            w.write_record([
                r.id.clone(),
                t.series_kind.clone(),
                t.ell.to_string(),
                opt(t.delta),
                opt(t.mean_gap),
                t.n_extrema.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub software: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub status: &'static str,
    pub total_wall_time_s: f64,
    pub config: &'a ExperimentConfig,
    pub runs: Vec<&'a RunDiagnostics>,
}

pub fn write_manifest(path: &Path, config: &ExperimentConfig, results: &[QuenchResult], wall: f64) -> Result<(), CliError> {
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        status: if results.iter().any(QuenchResult::failed) { "aborted" } else { "ok" },
        total_wall_time_s: wall,
        config,
        runs: results.iter().map(|r| &r.diagnostics).collect(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Writes the three tables, then the manifest. The manifest goes last and is
/// attempted even when a table fails to write.
pub fn write_all(dir: &Path, config: &ExperimentConfig, results: &[QuenchResult], wall: f64) -> Result<(), CliError> {
    let tables = write_series(&dir.join("series.csv"), results)
        .and_then(|_| write_degrees(&dir.join("degrees.csv"), results))
        .and_then(|_| write_timescales(&dir.join("timescales.csv"), results));
    write_manifest(&dir.join("manifest.json"), config, results, wall)?;
    tables
}
