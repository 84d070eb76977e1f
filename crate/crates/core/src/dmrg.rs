//! Two-site DMRG ground-state search.
//!
//! The Hamiltonian is turned into a lower-triangular MPO by splitting each
//! bond term into a sum of products `A_k (x) B_k` (operator Schmidt
//! decomposition), so any nearest-neighbor bond Hamiltonian is supported.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ONE, ZERO};
use crate::model::HamiltonianSpec;
use crate::mps::{Mps, SiteTensor, TruncationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmrgSettings {
    pub max_sweeps: usize,
    pub energy_tol: f64,
    pub policy: TruncationPolicy,
    pub local_solver_iters: usize,
}

impl Default for DmrgSettings {
    fn default() -> Self {
        Self {
            max_sweeps: 30,
            energy_tol: 1e-10,
            policy: TruncationPolicy::default(),
            local_solver_iters: 40,
        }
    }
}

impl DmrgSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps < 1 {
            return Err(Error::InvalidParameter("max_sweeps must be >= 1".into()));
        }
        if !(self.energy_tol > 0.0) {
            return Err(Error::InvalidParameter("energy_tol must be > 0".into()));
        }
        if self.local_solver_iters < 2 {
            return Err(Error::InvalidParameter("local_solver_iters must be >= 2".into()));
        }
        self.policy.validate()
    }
}

#[derive(Debug, Clone)]
pub struct DmrgOutcome {
    /// Unit-norm state, orthogonality center on site 0.
    pub state: Mps,
    /// `energy(state, hspec)`.
    pub energy: f64,
    pub converged: bool,
    /// Energy after each full (right then left) sweep.
    pub sweep_energies: Vec<f64>,
    /// Largest discarded weight seen in the final sweep.
    pub max_discarded: f64,
}

type Op = Matrix2<C64>;

/// One site of the MPO as a sparse list of `(left channel, right channel,
/// operator)`.
#[derive(Debug, Clone)]
struct MpoSite {
    entries: Vec<(usize, usize, Op)>,
}

#[derive(Debug, Clone)]
struct Mpo {
    sites: Vec<MpoSite>,
    dim: usize,
}

impl Mpo {
    fn from_spec(hspec: &HamiltonianSpec) -> Result<Self> {
        let n = hspec.n_sites();
        let mut splits = Vec::with_capacity(n - 1);
        for term in hspec.bond_terms() {
            // rows (s1', s1), cols (s2', s2)
            let m = DMatrix::from_fn(4, 4, |x, y| {
                let (s1p, s1) = (x / 2, x % 2);
                let (s2p, s2) = (y / 2, y % 2);
                term[(2 * s1p + s2p, 2 * s1 + s2)]
            });
            let (u, s, vt) = linalg::svd(m)?;
            let floor = s[0] * 1e-14;
            let pairs: Vec<(Op, Op)> = (0..4)
                .filter(|&k| s[k] > floor && s[k] > 0.0)
                .map(|k| {
                    let a = Op::from_fn(|p, q| u[(2 * p + q, k)] * s[k]);
                    let b = Op::from_fn(|p, q| vt[(k, 2 * p + q)]);
                    (a, b)
                })
                .collect();
            splits.push(pairs);
        }
        let rank = splits.iter().map(Vec::len).max().unwrap_or(0);
        let dim = rank + 2;
        let done = dim - 1;
        let id = Op::identity();
        let sites = (0..n)
            .map(|i| {
                let mut entries = vec![(0, 0, id)];
                if i + 1 < n {
                    for (k, (a, _)) in splits[i].iter().enumerate() {
                        entries.push((0, 1 + k, *a));
                    }
                }
                if i > 0 {
                    for (k, (_, b)) in splits[i - 1].iter().enumerate() {
                        entries.push((1 + k, done, *b));
                    }
                }
                entries.push((done, done, id));
                MpoSite { entries }
            })
            .collect();
        Ok(Self { sites, dim })
    }
}

/// Per-channel environment matrices; `None` marks an identically zero channel.
type Env = Vec<Option<DMatrix<C64>>>;

fn boundary_env(dim: usize, channel: usize) -> Env {
    let mut env = vec![None; dim];
    env[channel] = Some(DMatrix::from_element(1, 1, ONE));
    env
}

fn grow_left(env: &Env, t: &SiteTensor, w: &MpoSite, dim: usize) -> Env {
    let mut out: Env = vec![None; dim];
    // (A^{s'})^dagger L[w] A^s, cached per (w, s', s)
    for &(wl, wr, ref op) in &w.entries {
        let Some(l) = &env[wl] else { continue };
        for sp in 0..2 {
            for s in 0..2 {
                let c = op[(sp, s)];
                if c == ZERO {
                    continue;
                }
                let term = t.block(sp).adjoint() * l * t.block(s) * c;
                match &mut out[wr] {
                    Some(acc) => *acc += term,
                    slot => *slot = Some(term),
                }
            }
        }
    }
    out
}

fn grow_right(env: &Env, t: &SiteTensor, w: &MpoSite, dim: usize) -> Env {
    let mut out: Env = vec![None; dim];
    for &(wl, wr, ref op) in &w.entries {
        let Some(r) = &env[wr] else { continue };
        for sp in 0..2 {
            for s in 0..2 {
                let c = op[(sp, s)];
                if c == ZERO {
                    continue;
                }
                let term = t.block(s) * r * t.block(sp).adjoint() * c;
                match &mut out[wl] {
                    Some(acc) => *acc += term,
                    slot => *slot = Some(term),
                }
            }
        }
    }
    out
}

/// Effective two-site Hamiltonian acting on vectors laid out as four
/// column-major `l x r` blocks, block index `2 * s1 + s2`.
struct TwoSiteOperator<'a> {
    left: &'a Env,
    right: &'a Env,
    w1: &'a MpoSite,
    w2: &'a MpoSite,
    dim: usize,
    l: usize,
    r: usize,
}

impl TwoSiteOperator<'_> {
    fn apply(&self, x: &DVector<C64>) -> DVector<C64> {
        let (l, r) = (self.l, self.r);
        let lr = l * r;
        let block = |q: usize| nalgebra::DMatrixView::from_slice(&x.as_slice()[q * lr..(q + 1) * lr], l, r);
        // T[w0][q] = L[w0] theta_q
        let mut t: Vec<Option<Vec<DMatrix<C64>>>> = vec![None; self.dim];
        for (w0, env) in self.left.iter().enumerate() {
            if let Some(lm) = env {
                t[w0] = Some((0..4).map(|q| lm * block(q)).collect());
            }
        }
        // U[w1][(s1', s2)] = sum opA[s1', s1] T[w0][(s1, s2)]
        let mut u: Vec<Option<Vec<DMatrix<C64>>>> = vec![None; self.dim];
        for &(w0, w1, ref op) in &self.w1.entries {
            let Some(tw) = &t[w0] else { continue };
            let slot = u[w1].get_or_insert_with(|| vec![DMatrix::zeros(l, r); 4]);
            for s1p in 0..2 {
                for s1 in 0..2 {
                    let c = op[(s1p, s1)];
                    if c == ZERO {
                        continue;
                    }
                    for s2 in 0..2 {
                        slot[2 * s1p + s2] += &tw[2 * s1 + s2] * c;
                    }
                }
            }
        }
        // V[w2][(s1', s2')] = sum opB[s2', s2] U[w1][(s1', s2)]
        let mut v: Vec<Option<Vec<DMatrix<C64>>>> = vec![None; self.dim];
        for &(w1, w2, ref op) in &self.w2.entries {
            if self.right[w2].is_none() {
                continue;
            }
            let Some(uw) = &u[w1] else { continue };
            let slot = v[w2].get_or_insert_with(|| vec![DMatrix::zeros(l, r); 4]);
            for s2p in 0..2 {
                for s2 in 0..2 {
                    let c = op[(s2p, s2)];
                    if c == ZERO {
                        continue;
                    }
                    for s1p in 0..2 {
                        slot[2 * s1p + s2p] += &uw[2 * s1p + s2] * c;
                    }
                }
            }
        }
        let mut out = DVector::zeros(4 * lr);
        for (w2, vw) in v.iter().enumerate() {
            let (Some(vw), Some(rm)) = (vw, &self.right[w2]) else { continue };
            for q in 0..4 {
                // right env is stored as (ket, bra)
                let prod = &vw[q] * rm;
                let mut dst = nalgebra::DMatrixViewMut::from_slice(&mut out.as_mut_slice()[q * lr..(q + 1) * lr], l, r);
                dst += prod;
            }
        }
        out
    }
}

fn theta_to_blocks(theta: &DMatrix<C64>, l: usize, r: usize) -> DVector<C64> {
    let mut v = DVector::zeros(4 * l * r);
    for s1 in 0..2 {
        for s2 in 0..2 {
            let q = 2 * s1 + s2;
            for b in 0..r {
                for a in 0..l {
                    v[q * l * r + a + l * b] = theta[(a + l * s1, s2 + 2 * b)];
                }
            }
        }
    }
    v
}

fn blocks_to_theta(v: &DVector<C64>, l: usize, r: usize) -> DMatrix<C64> {
    let mut theta = DMatrix::zeros(2 * l, 2 * r);
    for s1 in 0..2 {
        for s2 in 0..2 {
            let q = 2 * s1 + s2;
            for b in 0..r {
                for a in 0..l {
                    theta[(a + l * s1, s2 + 2 * b)] = v[q * l * r + a + l * b];
                }
            }
        }
    }
    theta
}

/// Lowest eigenpair of a Hermitian operator by Lanczos with full
/// reorthogonalization and thick restarts from the Ritz vector.
pub(crate) fn lanczos_lowest<F>(apply: F, start: &DVector<C64>, max_iter: usize, residual_tol: f64) -> (f64, DVector<C64>)
where
    F: Fn(&DVector<C64>) -> DVector<C64>,
{
    let dim = start.len();
    let mut x = start.clone();
    if x.norm() < 1e-300 {
        x = DVector::from_element(dim, ONE);
    }
    x /= C64::from(x.norm());
    let mut best = (f64::INFINITY, x.clone());
    for _restart in 0..6 {
        let mut basis: Vec<DVector<C64>> = vec![x.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let krylov = max_iter.min(dim).max(1);
        let mut converged = false;
        let mut ritz = (f64::INFINITY, DVector::from_element(1, 1.0));
        for k in 0..krylov {
            let mut w = apply(&basis[k]);
            let alpha = basis[k].dotc(&w).re;
            alphas.push(alpha);
            for _ in 0..2 {
                for v in &basis {
                    let c = v.dotc(&w);
                    w.axpy(-c, v, ONE);
                }
            }
            let beta = w.norm();
            let tri = DMatrix::from_fn(k + 1, k + 1, |i, j| {
                if i == j {
                    alphas[i]
                } else if i == j + 1 {
                    betas[j]
                } else if j == i + 1 {
                    betas[i]
                } else {
                    0.0
                }
            });
            let eig = tri.symmetric_eigen();
            let (imin, &emin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty");
            let y = eig.eigenvectors.column(imin).into_owned();
            ritz = (emin, y.clone());
            let residual = beta * y[k].abs();
            if residual < residual_tol || beta < 1e-13 || k + 1 == krylov {
                converged = residual < residual_tol || beta < 1e-13;
                break;
            }
            betas.push(beta);
            basis.push(w / C64::from(beta));
        }
        let y = &ritz.1;
        let mut vec = DVector::zeros(dim);
        for (j, v) in basis.iter().enumerate().take(y.len()) {
            vec.axpy(C64::from(y[j]), v, ONE);
        }
        vec /= C64::from(vec.norm());
        if ritz.0 <= best.0 {
            best = (ritz.0, vec.clone());
        }
        if converged {
            break;
        }
        x = vec;
    }
    best
}

/// Random product state; when the field favors a ferromagnet with no
/// longitudinal field the spins are tilted toward up so the search lands on
/// one symmetry-broken branch deterministically.
fn initial_guess(hspec: &HamiltonianSpec, seed: u64) -> Result<Mps> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tilt = hspec
        .params
        .map(|p| p.hz == 0.0 && p.j.abs() > p.hx.abs())
        .unwrap_or(false);
    let polar_max = if tilt { std::f64::consts::FRAC_PI_4 } else { std::f64::consts::PI };
    let local: Vec<[C64; 2]> = (0..hspec.n_sites())
        .map(|_| {
            let theta: f64 = rng.gen_range(0.0..polar_max);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            [C64::from((theta / 2.0).cos()), C64::from_polar((theta / 2.0).sin(), phi)]
        })
        .collect();
    Mps::product_state(&local)
}

/// Ground state of `hspec` by two-site DMRG from a seeded random product
/// state.
pub fn ground_state(hspec: &HamiltonianSpec, settings: &DmrgSettings, seed: u64) -> Result<DmrgOutcome> {
    settings.validate()?;
    let n = hspec.n_sites();
    let mpo = Mpo::from_spec(hspec)?;
    let dim = mpo.dim;
    let mut state = initial_guess(hspec, seed)?;
    state.canonicalize(0)?;

    let mut left: Vec<Env> = vec![Vec::new(); n];
    let mut right: Vec<Env> = vec![Vec::new(); n];
    left[0] = boundary_env(dim, 0);
    right[n - 1] = boundary_env(dim, dim - 1);
    for i in (1..n).rev() {
        right[i - 1] = grow_right(&right[i], &state.sites[i], &mpo.sites[i], dim);
    }

    let residual_tol = (settings.energy_tol / 10.0).sqrt().max(1e-12);
    let mut sweep_energies = Vec::new();
    let mut converged = false;
    let mut max_discarded = 0.0f64;

    let optimize = |state: &mut Mps, left: &[Env], right: &[Env], i: usize, center_right: bool| -> Result<f64> {
        let theta = state.two_site_theta(i);
        let l = state.sites[i].left;
        let r = state.sites[i + 1].right;
        let op = TwoSiteOperator {
            left: &left[i],
            right: &right[i + 1],
            w1: &mpo.sites[i],
            w2: &mpo.sites[i + 1],
            dim,
            l,
            r,
        };
        let start = theta_to_blocks(&theta, l, r);
        let (_, vec) = lanczos_lowest(|x| op.apply(x), &start, settings.local_solver_iters, residual_tol);
        let theta = blocks_to_theta(&vec, l, r);
        let (w, _) = state.split_theta(i, theta, &settings.policy, center_right)?;
        Ok(w)
    };

    for _sweep in 0..settings.max_sweeps {
        let mut sweep_discarded = 0.0f64;
        for i in 0..n - 1 {
            let w = optimize(&mut state, &left, &right, i, true)?;
            sweep_discarded = sweep_discarded.max(w);
            left[i + 1] = grow_left(&left[i], &state.sites[i], &mpo.sites[i], dim);
        }
        for i in (0..n - 1).rev() {
            let w = optimize(&mut state, &left, &right, i, false)?;
            sweep_discarded = sweep_discarded.max(w);
            right[i] = grow_right(&right[i + 1], &state.sites[i + 1], &mpo.sites[i + 1], dim);
        }
        max_discarded = sweep_discarded;
        let e = state.energy(hspec)?;
        if !e.is_finite() {
            return Err(Error::NonFinite("DMRG energy".into()));
        }
        let done = sweep_energies
            .last()
            .map(|prev: &f64| (prev - e).abs() < settings.energy_tol)
            .unwrap_or(false);
        sweep_energies.push(e);
        if done {
            converged = true;
            break;
        }
    }

    state.normalize();
    let energy = state.energy(hspec)?;
    Ok(DmrgOutcome {
        state,
        energy,
        converged,
        sweep_energies,
        max_discarded,
    })
}
