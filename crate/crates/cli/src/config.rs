use std::path::{Path, PathBuf};

use quench_core::analysis::{delta_grid, Measure};
use quench_core::dmrg::DmrgSettings;
use quench_core::mps::RDM_MAX_SITES;
use quench_core::tebd::QuenchProtocol;
use quench_core::{HamiltonianParams, TruncationPolicy};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    #[serde(rename = "J")]
    pub j: f64,
    pub h_x: f64,
    pub h_z: f64,
}

impl FieldsConfig {
    pub fn params(&self, n: usize) -> HamiltonianParams {
        HamiltonianParams { j: self.j, hx: self.h_x, hz: self.h_z, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n: usize,
    pub t_max: f64,
    pub tau: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    pub subsystem_sizes: Vec<usize>,
    #[serde(default)]
    pub block_start: Option<usize>,
    pub pre: FieldsConfig,
    pub post: FieldsConfig,
}

fn default_stride() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub cutoff: f64,
    pub chi_max: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        let p = TruncationPolicy::default();
        Self { cutoff: p.cutoff, chi_max: p.chi_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmrgConfig {
    pub max_sweeps: usize,
    pub energy_tol: f64,
    pub local_solver_iters: usize,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        let d = DmrgSettings::default();
        Self {
            max_sweeps: d.max_sweeps,
            energy_tol: d.energy_tol,
            local_solver_iters: d.local_solver_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub delta_grid: GridConfig,
    pub measures: Vec<Measure>,
    /// Subsystem sizes to analyze; empty means every recorded size.
    pub ells: Vec<usize>,
    /// Separations whose distance-vs-time series get an extrema report.
    pub series_deltas: Vec<f64>,
    pub smoothing_series: usize,
    pub smoothing_degree: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            delta_grid: GridConfig { start: 0.1, stop: 4.0, step: 0.1 },
            measures: vec![Measure::TraceDistance, Measure::TotalVariation],
            ells: Vec::new(),
            series_deltas: vec![1.0, 2.0],
            smoothing_series: 1,
            smoothing_degree: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "post.h_z")]
    PostHz,
    #[serde(rename = "post.h_x")]
    PostHx,
    #[serde(rename = "post.J")]
    PostJ,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PostHz => "post.h_z",
            SweepAxis::PostHx => "post.h_x",
            SweepAxis::PostJ => "post.J",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Also write each evolution record as JSON.
    #[serde(default)]
    pub checkpoint: bool,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub dmrg: DmrgConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

/// One fully resolved quench of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuenchPoint {
    pub id: String,
    pub protocol: QuenchProtocol,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    pub fn policy(&self) -> TruncationPolicy {
        TruncationPolicy { cutoff: self.truncation.cutoff, chi_max: self.truncation.chi_max }
    }

    pub fn dmrg_settings(&self) -> DmrgSettings {
        DmrgSettings {
            max_sweeps: self.dmrg.max_sweeps,
            energy_tol: self.dmrg.energy_tol,
            policy: self.policy(),
            local_solver_iters: self.dmrg.local_solver_iters,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.protocol.tau * self.protocol.record_stride as f64
    }

    pub fn delta_grid(&self) -> Vec<f64> {
        let g = self.analysis.delta_grid;
        delta_grid(g.start, g.stop, g.step).unwrap_or_default()
    }

    /// Subsystem sizes the analysis covers.
    pub fn analysis_ells(&self) -> Vec<usize> {
        if self.analysis.ells.is_empty() {
            let mut v = self.protocol.subsystem_sizes.clone();
            v.sort_unstable();
            v.dedup();
            v
        } else {
            self.analysis.ells.clone()
        }
    }

    fn base_protocol(&self) -> QuenchProtocol {
        let p = &self.protocol;
        QuenchProtocol {
            pre: p.pre.params(p.n),
            post: p.post.params(p.n),
            t_max: p.t_max,
            tau: p.tau,
            record_stride: p.record_stride,
            subsystem_sizes: p.subsystem_sizes.clone(),
            policy: self.policy(),
            block_start: p.block_start,
        }
    }

    /// The quenches to run, in sweep order.
    pub fn points(&self) -> Vec<QuenchPoint> {
        let base = self.base_protocol();
        match &self.sweep {
            None => vec![QuenchPoint { id: "base".into(), protocol: base }],
            Some(s) => s
                .values
                .iter()
                .map(|&v| {
                    let mut protocol = base.clone();
                    match s.axis {
                        SweepAxis::PostHz => protocol.post.hz = v,
                        SweepAxis::PostHx => protocol.post.hx = v,
                        SweepAxis::PostJ => protocol.post.j = v,
                    }
                    QuenchPoint { id: format!("{}={}", s.axis.name(), v), protocol }
                })
                .collect(),
        }
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs = Vec::new();
        let p = &self.protocol;
        if p.n < 2 {
            errs.push(format!("protocol.n must be >= 2, got {}", p.n));
        }
        for (name, v) in [
            ("protocol.t_max", p.t_max),
            ("protocol.tau", p.tau),
            ("truncation.cutoff", self.truncation.cutoff),
            ("dmrg.energy_tol", self.dmrg.energy_tol),
            ("analysis.delta_grid.start", self.analysis.delta_grid.start),
            ("analysis.delta_grid.stop", self.analysis.delta_grid.stop),
            ("analysis.delta_grid.step", self.analysis.delta_grid.step),
        ] {
            if !v.is_finite() {
                errs.push(format!("{name} must be finite, got {v}"));
            }
        }
        for (side, f) in [("pre", &p.pre), ("post", &p.post)] {
            for (name, v) in [("J", f.j), ("h_x", f.h_x), ("h_z", f.h_z)] {
                if !v.is_finite() {
                    errs.push(format!("protocol.{side}.{name} must be finite, got {v}"));
                }
            }
        }
        if !(p.t_max > 0.0) {
            errs.push(format!("protocol.t_max must be > 0, got {}", p.t_max));
        }
        if !(p.tau > 0.0) {
            errs.push(format!("protocol.tau must be > 0, got {}", p.tau));
        }
        if p.record_stride < 1 {
            errs.push("protocol.record_stride must be >= 1".into());
        }
        if p.subsystem_sizes.is_empty() {
            errs.push("protocol.subsystem_sizes must not be empty".into());
        }
        for &ell in &p.subsystem_sizes {
            if ell == 0 || ell > RDM_MAX_SITES {
                errs.push(format!("subsystem size {ell} outside 1..={RDM_MAX_SITES}"));
            } else if ell > p.n || p.block_start.is_some_and(|s| s + ell > p.n) {
                errs.push(format!("subsystem size {ell} does not fit a chain of {} sites", p.n));
            }
        }
        if !(self.truncation.cutoff >= 0.0) {
            errs.push(format!("truncation.cutoff must be >= 0, got {}", self.truncation.cutoff));
        }
        if self.truncation.chi_max < 1 {
            errs.push("truncation.chi_max must be >= 1".into());
        }
        if self.dmrg.max_sweeps < 1 {
            errs.push("dmrg.max_sweeps must be >= 1".into());
        }
        if !(self.dmrg.energy_tol > 0.0) {
            errs.push(format!("dmrg.energy_tol must be > 0, got {}", self.dmrg.energy_tol));
        }
        if self.dmrg.local_solver_iters < 2 {
            errs.push("dmrg.local_solver_iters must be >= 2".into());
        }
        let a = &self.analysis;
        let g = a.delta_grid;
        if delta_grid(g.start, g.stop, g.step).is_err() {
            errs.push(format!("analysis.delta_grid {}:{}:{} is not a valid grid", g.start, g.step, g.stop));
        }
        let spacing = self.spacing();
        let on_grid = |d: f64| {
            let lag = d / spacing;
            (lag - lag.round()).abs() <= 1e-9 * lag.round().max(1.0)
        };
        if spacing > 0.0 && spacing.is_finite() {
            let off: Vec<f64> = self
                .delta_grid()
                .into_iter()
                .chain(a.series_deltas.iter().copied())
                .filter(|&d| !on_grid(d))
                .collect();
            if let Some(first) = off.first() {
                errs.push(format!(
                    "{} separations are not multiples of the record spacing {spacing} (first: {first:.6})",
                    off.len()
                ));
            }
        }
        for &d in &a.series_deltas {
            if !(d >= 0.0) || !d.is_finite() {
                errs.push(format!("analysis.series_deltas entry {d} must be finite and >= 0"));
            }
        }
        if a.measures.is_empty() {
            errs.push("analysis.measures must not be empty".into());
        }
        for &ell in &a.ells {
            if !p.subsystem_sizes.contains(&ell) {
                errs.push(format!("analysis.ells entry {ell} is not among protocol.subsystem_sizes"));
            }
        }
        if a.smoothing_series < 1 || a.smoothing_degree < 1 {
            errs.push("smoothing windows must be >= 1".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                errs.push("sweep.values must not be empty".into());
            }
            for &v in &s.values {
                if !v.is_finite() {
                    errs.push(format!("sweep value {v} must be finite"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
seed = 7
output_dir = "out"

[protocol]
n = 8
t_max = 1.0
tau = 0.01
subsystem_sizes = [1, 2]
pre = { J = 0.2, h_x = 1.0, h_z = 0.0 }
post = { J = 1.0, h_x = 0.1, h_z = 0.5 }
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.protocol.record_stride, 10);
        assert_eq!(c.truncation.chi_max, 50);
        assert_eq!(c.dmrg.max_sweeps, 30);
        assert_eq!(c.analysis.smoothing_degree, 3);
        assert_eq!(c.delta_grid().len(), 40);
        assert_eq!(c.points().len(), 1);
        assert_eq!(c.points()[0].protocol.post.hz, 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("seed = 7", "seed = 7\nsed = 3");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(CliError::Config(_))));
        let text = MINIMAL.replace("h_z = 0.5 }", "h_z = 0.5, hz = 1.0 }");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn problems_are_itemized() {
        let text = MINIMAL.replace("tau = 0.01", "tau = -0.01").replace("subsystem_sizes = [1, 2]", "subsystem_sizes = [1, 9]");
        match ExperimentConfig::from_toml(&text) {
            Err(CliError::Config(items)) => assert!(items.len() >= 2, "{items:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_points() {
        let text = format!("{MINIMAL}\n[sweep]\naxis = \"post.h_x\"\nvalues = [0.1, 0.3]\n");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let pts = c.points();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].protocol.post.hx, 0.3);
        assert_eq!(pts[1].id, "post.h_x=0.3");
        let bad = format!("{MINIMAL}\n[sweep]\naxis = \"pre.h_x\"\nvalues = [0.1]\n");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn off_grid_separation_is_a_config_error() {
        let text = format!("{MINIMAL}\n[analysis]\nseries_deltas = [0.25]\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
