use std::collections::BTreeMap;

use quench_core::analysis::distance_series;
use quench_core::dmrg::ground_state;
use quench_core::ed_oracle::{ed_rdm, EdSpectrum};
use quench_core::tebd::{evolve, AbortReason, EvolutionRecord};
use quench_core::{build_hamiltonian, DensityMatrix};
use serde::Serialize;

use crate::config::{ExperimentConfig, QuenchPoint};
use crate::runner::sorted_deltas;
use crate::CliError;

/// Largest chain the oracle check accepts.
pub const ORACLE_MAX_SITES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleTolerances {
    pub rdm: f64,
    pub series: f64,
    pub ground_energy: f64,
}

impl Default for OracleTolerances {
    fn default() -> Self {
        Self { rdm: 1e-4, series: 1e-4, ground_energy: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub quench_id: String,
    pub n: usize,
    pub t_end: f64,
    pub dmrg_energy: f64,
    pub ed_energy: f64,
    pub ground_energy_deviation: f64,
    /// Largest entrywise difference over every recorded reduced density matrix.
    pub max_rdm_deviation: f64,
    /// Largest difference over every distance series the analysis would write.
    pub max_series_deviation: f64,
    pub abort: Option<AbortReason>,
    pub tolerances: OracleTolerances,
    pub passed: bool,
}

fn check_point(config: &ExperimentConfig, point: &QuenchPoint, tol: OracleTolerances) -> Result<OracleReport, CliError> {
    let p = &point.protocol;
    let numerical = |e: quench_core::Error| CliError::Numerical(format!("{}: {e}", point.id));

    let gs = ground_state(&build_hamiltonian(p.pre).map_err(numerical)?, &config.dmrg_settings(), config.seed)
        .map_err(numerical)?;
    let pre_spec = EdSpectrum::new(&p.pre).map_err(numerical)?;
    let record = evolve(&gs.state, p).map_err(numerical)?;

    let post_spec = EdSpectrum::new(&p.post).map_err(numerical)?;
    let psi0 = pre_spec.ground_state();
    let mut exact: BTreeMap<usize, Vec<DensityMatrix>> = BTreeMap::new();
    for &t in &record.times {
        let psi = post_spec.evolve(&psi0, t).map_err(numerical)?;
        for &ell in record.rdms.keys() {
            exact.entry(ell).or_default().push(ed_rdm(&psi, p.block(ell)).map_err(numerical)?);
        }
    }
    let exact = EvolutionRecord::from_rdms(record.spacing, exact).map_err(numerical)?;

    let mut rdm_dev = 0.0f64;
    for (ell, series) in &record.rdms {
        for (a, b) in series.iter().zip(&exact.rdms[ell]) {
            rdm_dev = rdm_dev.max(a.max_abs_diff(b));
        }
    }
    let mut series_dev = 0.0f64;
    for &measure in &config.analysis.measures {
        for ell in config.analysis_ells() {
            for delta in sorted_deltas(config) {
                let a = distance_series(&record, ell, delta, measure).map_err(numerical)?;
                let b = distance_series(&exact, ell, delta, measure).map_err(numerical)?;
                for (x, y) in a.values.iter().zip(&b.values) {
                    series_dev = series_dev.max((x - y).abs());
                }
            }
        }
    }
    let energy_dev = (gs.energy - pre_spec.ground_energy()).abs();
    let passed = record.abort.is_none()
        && rdm_dev <= tol.rdm
        && series_dev <= tol.series
        && energy_dev <= tol.ground_energy;
    Ok(OracleReport {
        quench_id: point.id.clone(),
        n: p.post.n,
        t_end: record.t_end(),
        dmrg_energy: gs.energy,
        ed_energy: pre_spec.ground_energy(),
        ground_energy_deviation: energy_dev,
        max_rdm_deviation: rdm_dev,
        max_series_deviation: series_dev,
        abort: record.abort,
        tolerances: tol,
        passed,
    })
}

/// Runs the MPS pipeline and exact diagonalization side by side for every
/// sweep point of a small-chain configuration.
pub fn run_oracle_check(config: &ExperimentConfig, tol: OracleTolerances) -> Result<Vec<OracleReport>, CliError> {
    config.validate()?;
    if config.protocol.n > ORACLE_MAX_SITES {
        return Err(CliError::Config(vec![format!(
            "oracle check is capped at {ORACLE_MAX_SITES} sites, got {}",
            config.protocol.n
        )]));
    }
    config.points().iter().map(|pt| check_point(config, pt, tol)).collect()
}
