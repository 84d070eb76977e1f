//! Sudden-quench time evolution with second-order TEBD.
//!
//! Between two recorded times the trailing half-step outer layer of one step
//! and the leading one of the next are fused into a single full-step layer,
//! so a record interval of `k` steps costs `2k + 1` layers instead of `3k`.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, build_trotter_gates, GateLayer, HamiltonianParams, HamiltonianSpec};
use crate::mps::{centered_block, Mps, TruncationPolicy, RDM_MAX_SITES};

/// Consecutive over-budget steps tolerated before a run is aborted.
pub const BUDGET_PATIENCE: usize = 10;
/// Per-step discarded weight above `BUDGET_FACTOR * cutoff` counts as over
/// budget while the bond dimension is saturated.
pub const BUDGET_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchProtocol {
    pub pre: HamiltonianParams,
    pub post: HamiltonianParams,
    pub t_max: f64,
    pub tau: f64,
    pub record_stride: usize,
    pub subsystem_sizes: Vec<usize>,
    pub policy: TruncationPolicy,
    /// Left edge of every recorded block; `None` centers each block.
    #[serde(default)]
    pub block_start: Option<usize>,
}

impl QuenchProtocol {
    pub fn validate(&self) -> Result<()> {
        self.pre.validate()?;
        self.post.validate()?;
        if self.pre.n != self.post.n {
            return Err(Error::DimensionMismatch(format!(
                "pre-quench chain has {} sites, post-quench {}",
                self.pre.n, self.post.n
            )));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidParameter(format!("t_max must be positive, got {}", self.t_max)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if self.record_stride < 1 {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        for &ell in &self.subsystem_sizes {
            if ell == 0 || ell > RDM_MAX_SITES {
                return Err(Error::SubsystemTooLarge { len: ell, cap: RDM_MAX_SITES });
            }
            let block = self.block(ell);
            if block.end > self.post.n {
                return Err(Error::InvalidParameter(format!(
                    "block {block:?} does not fit a chain of {} sites",
                    self.post.n
                )));
            }
        }
        self.policy.validate()
    }

    pub fn block(&self, ell: usize) -> Range<usize> {
        match self.block_start {
            Some(s) => s..s + ell,
            None => centered_block(self.post.n, ell),
        }
    }

    /// Number of Trotter steps actually taken: the largest whole number of
    /// record intervals that fits in `t_max`.
    pub fn n_steps(&self) -> usize {
        let raw = (self.t_max / self.tau * (1.0 + 1e-12)).floor() as usize;
        raw / self.record_stride * self.record_stride
    }

    pub fn spacing(&self) -> f64 {
        self.tau * self.record_stride as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AbortReason {
    /// Bond dimension saturated with excessive per-step truncation.
    TruncationBudget { step: usize, discarded: f64 },
    NonFinite { step: usize, detail: String },
}

/// Time-indexed archive of one quench run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub spacing: f64,
    pub times: Vec<f64>,
    /// Subsystem size to one density matrix per recorded time.
    pub rdms: BTreeMap<usize, Vec<DensityMatrix>>,
    pub energies: Vec<f64>,
    pub norms: Vec<f64>,
    pub max_bond: Vec<usize>,
    pub cumulative_discarded: Vec<f64>,
    pub abort: Option<AbortReason>,
}

impl EvolutionRecord {
    /// Record holding only density matrices, on a grid starting at zero.
    pub fn from_rdms(spacing: f64, rdms: BTreeMap<usize, Vec<DensityMatrix>>) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!("spacing must be positive, got {spacing}")));
        }
        let len = rdms.values().next().map(Vec::len).unwrap_or(0);
        if rdms.values().any(|v| v.len() != len) {
            return Err(Error::DimensionMismatch("unequal series lengths".into()));
        }
        for (&ell, series) in &rdms {
            for rho in series {
                if rho.ell() != ell {
                    return Err(Error::DimensionMismatch(format!("size-{} matrix filed under {ell}", rho.ell())));
                }
                rho.validate()?;
            }
        }
        Ok(Self {
            spacing,
            times: (0..len).map(|k| k as f64 * spacing).collect(),
            rdms,
            energies: Vec::new(),
            norms: Vec::new(),
            max_bond: Vec::new(),
            cumulative_discarded: Vec::new(),
            abort: None,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn series(&self, ell: usize) -> Result<&[DensityMatrix]> {
        self.rdms.get(&ell).map(Vec::as_slice).ok_or(Error::NotRecorded(ell))
    }

    /// Largest relative deviation of the recorded energy from its initial
    /// value.
    pub fn energy_drift(&self) -> f64 {
        let Some(&e0) = self.energies.first() else { return 0.0 };
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        self.energies.iter().map(|e| (e - e0).abs() / scale).fold(0.0, f64::max)
    }
}

/// Applies one layer, visiting bonds in the direction that starts nearest
/// to the current orthogonality center. Returns the summed discarded weight.
fn apply_layer(state: &mut Mps, layer: &GateLayer, policy: &TruncationPolicy) -> Result<f64> {
    let (Some(&(first, _)), Some(&(last, _))) = (layer.gates.first(), layer.gates.last()) else {
        return Ok(0.0);
    };
    let c = state.center().unwrap_or(0);
    let mut discarded = 0.0;
    if c.abs_diff(first) <= c.abs_diff(last + 1) {
        for (bond, gate) in &layer.gates {
            state.canonicalize(*bond)?;
            discarded += state.apply_two_site_gate(gate, *bond, policy)?;
        }
    } else {
        for (bond, gate) in layer.gates.iter().rev() {
            state.canonicalize(bond + 1)?;
            discarded += state.apply_two_site_gate(gate, *bond, policy)?;
        }
    }
    Ok(discarded)
}

struct Recorder<'a> {
    protocol: &'a QuenchProtocol,
    hspec: &'a HamiltonianSpec,
    blocks: Vec<(usize, Range<usize>)>,
    record: EvolutionRecord,
}

impl Recorder<'_> {
    fn push(&mut self, state: &Mps, k: usize, cumulative: f64) -> Result<()> {
        let t = k as f64 * self.protocol.spacing();
        let ranges: Vec<Range<usize>> = self.blocks.iter().map(|(_, b)| b.clone()).collect();
        let rdms = state.rdms(&ranges)?;
        let energy = state.energy(self.hspec)?;
        let norm = state.norm();
        if !energy.is_finite() || !norm.is_finite() {
            return Err(Error::NonFinite(format!("energy {energy}, norm {norm} at t = {t}")));
        }
        let mut validated = Vec::with_capacity(rdms.len());
        for rho in rdms {
            rho.validate()?;
            validated.push(rho.with_time(t));
        }
        for ((ell, _), rho) in self.blocks.iter().zip(validated) {
            self.record.rdms.entry(*ell).or_default().push(rho);
        }
        self.record.times.push(t);
        self.record.energies.push(energy);
        self.record.norms.push(norm);
        self.record.max_bond.push(state.max_bond());
        self.record.cumulative_discarded.push(cumulative);
        Ok(())
    }
}

/// Evolves `initial` under the post-quench Hamiltonian and records reduced
/// density matrices and diagnostics every `record_stride` steps, starting at
/// `t = 0`. Numerical trouble ends the run early with `abort` set and the
/// record kept up to the last good time.
pub fn evolve(initial: &Mps, protocol: &QuenchProtocol) -> Result<EvolutionRecord> {
    protocol.validate()?;
    if initial.n_sites() != protocol.post.n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} sites, protocol {}",
            initial.n_sites(),
            protocol.post.n
        )));
    }
    let hspec = build_hamiltonian(protocol.post)?;
    let scheme = build_trotter_gates(&hspec, protocol.tau)?;
    let mut sizes = protocol.subsystem_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let blocks = sizes.iter().map(|&ell| (ell, protocol.block(ell))).collect();
    let mut rec = Recorder {
        protocol,
        hspec: &hspec,
        blocks,
        record: EvolutionRecord {
            spacing: protocol.spacing(),
            times: Vec::new(),
            rdms: BTreeMap::new(),
            energies: Vec::new(),
            norms: Vec::new(),
            max_bond: Vec::new(),
            cumulative_discarded: Vec::new(),
            abort: None,
        },
    };

    let mut state = initial.clone();
    if state.center().is_none() {
        state.canonicalize(0)?;
    }
    state.normalize();
    rec.push(&state, 0, 0.0)?;

    let stride = protocol.record_stride;
    let n_records = protocol.n_steps() / stride;
    let policy = protocol.policy;
    let mut cumulative = 0.0;
    let mut over_budget = 0usize;
    let mut step = 0usize;

    let outcome = (|| -> std::result::Result<(), AbortReason> {
        let fail = |step: usize, e: Error| AbortReason::NonFinite { step, detail: e.to_string() };
        for k in 1..=n_records {
            for j in 0..stride {
                let lead = if j == 0 { scheme.outer_half_layer() } else { scheme.merged_outer_layer() };
                let mut w = apply_layer(&mut state, lead, &policy).map_err(|e| fail(step, e))?;
                w += apply_layer(&mut state, scheme.inner_layer(), &policy).map_err(|e| fail(step, e))?;
                if j + 1 == stride {
                    w += apply_layer(&mut state, scheme.outer_half_layer(), &policy).map_err(|e| fail(step, e))?;
                }
                step += 1;
                if !w.is_finite() {
                    return Err(AbortReason::NonFinite { step, detail: "discarded weight".into() });
                }
                cumulative += w;
                if state.max_bond() >= policy.chi_max && w > BUDGET_FACTOR * policy.cutoff {
                    over_budget += 1;
                    if over_budget >= BUDGET_PATIENCE {
                        return Err(AbortReason::TruncationBudget { step, discarded: w });
                    }
                } else {
                    over_budget = 0;
                }
            }
            rec.push(&state, k, cumulative).map_err(|e| fail(step, e))?;
        }
        Ok(())
    })();
    if let Err(reason) = outcome {
        rec.record.abort = Some(reason);
    }
    Ok(rec.record)
}
