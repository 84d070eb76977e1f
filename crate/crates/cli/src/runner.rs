use std::path::{Path, PathBuf};
use std::time::Instant;

use quench_core::analysis::{
    degree, distance_series, extrema_gaps, DegreeCurve, DistanceSeries, ExtremumKind, Measure,
};
use quench_core::dmrg::ground_state;
use quench_core::tebd::{evolve, AbortReason, EvolutionRecord};
use quench_core::{build_hamiltonian, HamiltonianParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, QuenchPoint};
use crate::output;
use crate::CliError;

/// One row of `degrees.csv`; `degree` is `None` when the series at this
/// separation has fewer than two samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeRow {
    pub measure: Measure,
    pub ell: usize,
    pub delta: f64,
    pub degree: Option<f64>,
    pub window: Option<(f64, f64)>,
}

/// One row of `timescales.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimescaleRow {
    pub series_kind: String,
    pub ell: usize,
    /// Separation of a distance-vs-time series; `None` for degree curves.
    pub delta: Option<f64>,
    pub mean_gap: Option<f64>,
    pub n_extrema: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub quench_id: String,
    pub pre: HamiltonianParams,
    pub post: HamiltonianParams,
    pub ground_energy: Option<f64>,
    pub dmrg_converged: Option<bool>,
    pub dmrg_sweeps: usize,
    pub records: usize,
    pub t_end: Option<f64>,
    pub max_bond: usize,
    pub cumulative_discarded: f64,
    pub energy_drift: Option<f64>,
    pub max_norm_defect: Option<f64>,
    pub wall_time_s: f64,
    pub abort: Option<AbortReason>,
    pub error: Option<String>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct QuenchResult {
    pub id: String,
    pub record: Option<EvolutionRecord>,
    pub series: Vec<DistanceSeries>,
    pub degrees: Vec<DegreeRow>,
    /// Degree curves restricted to the separations where the degree is defined.
    pub curves: Vec<DegreeCurve>,
    pub timescales: Vec<TimescaleRow>,
    pub diagnostics: RunDiagnostics,
}

impl QuenchResult {
    pub fn failed(&self) -> bool {
        self.diagnostics.abort.is_some() || self.diagnostics.error.is_some()
    }

    pub fn curve(&self, measure: Measure, ell: usize) -> Option<&DegreeCurve> {
        self.curves.iter().find(|c| c.measure == measure && c.ell == ell)
    }

    pub fn series_at(&self, measure: Measure, ell: usize, delta: f64) -> Option<&DistanceSeries> {
        self.series
            .iter()
            .find(|s| s.measure == measure && s.ell == ell && (s.delta - delta).abs() < 1e-9)
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub results: Vec<QuenchResult>,
}

impl ExperimentOutcome {
    /// `Err(Numerical)` when any quench aborted or failed.
    pub fn status(&self) -> Result<(), CliError> {
        let failed: Vec<&str> = self.results.iter().filter(|r| r.failed()).map(|r| r.id.as_str()).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Numerical(format!(
                "{} of {} quenches ended early ({}); see manifest.json",
                failed.len(),
                self.results.len(),
                failed.join(", ")
            )))
        }
    }
}

pub(crate) fn sorted_deltas(config: &ExperimentConfig) -> Vec<f64> {
    let mut deltas = config.delta_grid();
    deltas.extend(config.analysis.series_deltas.iter().copied());
    deltas.sort_by(f64::total_cmp);
    deltas.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    deltas
}

type Analysis = (Vec<DistanceSeries>, Vec<DegreeRow>, Vec<DegreeCurve>, Vec<TimescaleRow>, Vec<String>);

/// Distance series, degrees and extrema reports for one record.
pub fn analyze(record: &EvolutionRecord, config: &ExperimentConfig) -> Result<Analysis, quench_core::Error> {
    let a = &config.analysis;
    let grid = config.delta_grid();
    let step = record.spacing;
    let mut series = Vec::new();
    let mut degrees = Vec::new();
    let mut curves = Vec::new();
    let mut timescales = Vec::new();
    let mut flags = Vec::new();
    let mut undefined = 0usize;

    for &measure in &a.measures {
        for ell in config.analysis_ells() {
            let mut group = Vec::new();
            for &delta in &sorted_deltas(config) {
                group.push(distance_series(record, ell, delta, measure)?);
            }
            let mut curve = DegreeCurve { measure, ell, deltas: vec![], degrees: vec![], windows: vec![] };
            for &delta in &grid {
                let s = group.iter().find(|s| (s.delta - delta).abs() < 1e-9).expect("grid delta computed");
                if s.len() >= 2 {
                    let d = degree(s, step)?;
                    let window = (s.times[0], s.times[s.len() - 1]);
                    curve.deltas.push(delta);
                    curve.degrees.push(d);
                    curve.windows.push(window);
                    degrees.push(DegreeRow { measure, ell, delta, degree: Some(d), window: Some(window) });
                } else {
                    undefined += 1;
                    degrees.push(DegreeRow { measure, ell, delta, degree: None, window: None });
                }
            }
            for &delta in &a.series_deltas {
                let s = group.iter().find(|s| (s.delta - delta).abs() < 1e-9).expect("series delta computed");
                timescales.push(timescale_row(
                    ExtremumKind::Minima,
                    format!("{}_minima", measure.label()),
                    ell,
                    Some(delta),
                    &s.times,
                    &s.values,
                    a.smoothing_series,
                ));
            }
            timescales.push(timescale_row(
                ExtremumKind::Maxima,
                format!("{}_degree_maxima", measure.label()),
                ell,
                None,
                &curve.deltas,
                &curve.degrees,
                a.smoothing_degree,
            ));
            curves.push(curve);
            series.extend(group);
        }
    }
    if undefined > 0 {
        flags.push(format!("{undefined} degree values undefined: record too short for their separation"));
    }
    let missing = timescales.iter().filter(|t| t.mean_gap.is_none()).count();
    if missing > 0 {
        flags.push(format!("{missing} timescales undefined: fewer than two extrema"));
    }
    Ok((series, degrees, curves, timescales, flags))
}

fn timescale_row(
    kind: ExtremumKind,
    label: String,
    ell: usize,
    delta: Option<f64>,
    xs: &[f64],
    ys: &[f64],
    window: usize,
) -> TimescaleRow {
    let (mean_gap, n_extrema) = match extrema_gaps(xs, ys, kind, window) {
        Ok(rep) => (rep.mean_gap, rep.positions.len()),
        Err(_) => (None, 0),
    };
    TimescaleRow { series_kind: label, ell, delta, mean_gap, n_extrema }
}

/// Ground state, evolution and analysis for one sweep point. Failures are
/// recorded in the diagnostics rather than returned.
pub fn run_point(config: &ExperimentConfig, point: &QuenchPoint, checkpoint_dir: Option<&Path>) -> QuenchResult {
    let start = Instant::now();
    let p = &point.protocol;
    let mut diag = RunDiagnostics {
        quench_id: point.id.clone(),
        pre: p.pre,
        post: p.post,
        ground_energy: None,
        dmrg_converged: None,
        dmrg_sweeps: 0,
        records: 0,
        t_end: None,
        max_bond: 0,
        cumulative_discarded: 0.0,
        energy_drift: None,
        max_norm_defect: None,
        wall_time_s: 0.0,
        abort: None,
        error: None,
        flags: Vec::new(),
    };
    let mut result = QuenchResult {
        id: point.id.clone(),
        record: None,
        series: Vec::new(),
        degrees: Vec::new(),
        curves: Vec::new(),
        timescales: Vec::new(),
        diagnostics: diag.clone(),
    };

    let mut run = || -> Result<EvolutionRecord, quench_core::Error> {
        let gs = ground_state(&build_hamiltonian(p.pre)?, &config.dmrg_settings(), config.seed)?;
        diag.ground_energy = Some(gs.energy);
        diag.dmrg_converged = Some(gs.converged);
        diag.dmrg_sweeps = gs.sweep_energies.len();
        if !gs.converged {
            diag.flags.push("DMRG did not reach the energy tolerance".into());
        }
        evolve(&gs.state, p)
    };
    match run() {
        Ok(record) => {
            diag.records = record.len();
            diag.t_end = Some(record.t_end());
            diag.max_bond = record.max_bond.iter().copied().max().unwrap_or(0);
            diag.cumulative_discarded = record.cumulative_discarded.last().copied().unwrap_or(0.0);
            diag.energy_drift = Some(record.energy_drift());
            diag.max_norm_defect = record.norms.iter().map(|n| (n - 1.0).abs()).reduce(f64::max);
            diag.abort = record.abort.clone();
            if record.abort.is_some() {
                diag.flags.push(format!("evolution stopped early at t = {}", record.t_end()));
            }
            if record.len() < 2 {
                diag.flags.push("record holds only t = 0".into());
            }
            match analyze(&record, config) {
                Ok((series, degrees, curves, timescales, flags)) => {
                    result.series = series;
                    result.degrees = degrees;
                    result.curves = curves;
                    result.timescales = timescales;
                    diag.flags.extend(flags);
                }
                Err(e) => diag.error = Some(format!("analysis: {e}")),
            }
            if let Some(dir) = checkpoint_dir {
                let path = dir.join(format!("{}.json", output::file_stem(&point.id)));
                let written = serde_json::to_string(&record)
                    .map_err(|e| e.to_string())
                    .and_then(|s| std::fs::write(&path, s).map_err(|e| e.to_string()));
                if let Err(e) = written {
                    diag.flags.push(format!("checkpoint {} not written: {e}", path.display()));
                }
            }
            result.record = Some(record);
        }
        Err(e) => diag.error = Some(e.to_string()),
    }
    diag.wall_time_s = start.elapsed().as_secs_f64();
    result.diagnostics = diag;
    result
}

/// Runs every sweep point on a pool of `workers` threads and writes the CSV
/// tables and the manifest into the configured output directory. The
/// manifest is written even when quenches abort; check
/// [`ExperimentOutcome::status`] for that.
pub fn run_quench_experiment(config: &ExperimentConfig, workers: usize) -> Result<ExperimentOutcome, CliError> {
    config.validate()?;
    let start = Instant::now();
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let checkpoint_dir = if config.checkpoint {
        let d = dir.join("records");
        std::fs::create_dir_all(&d)?;
        Some(d)
    } else {
        None
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    let points = config.points();
    let results: Vec<QuenchResult> = pool.install(|| {
        points
            .par_iter()
            .map(|pt| {
                let r = run_point(config, pt, checkpoint_dir.as_deref());
                eprintln!(
                    "[run] {} finished in {:.1} s (t_end {:?}, max bond {})",
                    r.id, r.diagnostics.wall_time_s, r.diagnostics.t_end, r.diagnostics.max_bond
                );
                r
            })
            .collect()
    });
    output::write_all(&dir, config, &results, start.elapsed().as_secs_f64())?;
    Ok(ExperimentOutcome { output_dir: dir, results })
}
