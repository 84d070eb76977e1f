//! Open-boundary matrix product states for spin-1/2 chains.
//!
//! Site tensors have shape `(left bond, physical 2, right bond)` and are
//! stored column-major as a `(2 * left) x right` matrix whose row index is
//! `a + left * s`. Reinterpreting the same buffer as a `left x (2 * right)`
//! matrix gives column index `s + 2 * b`, so both groupings needed by the
//! two-site update are free reshapes.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, Dyn, Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, ONE, ZERO};
use crate::model::HamiltonianSpec;

/// Hard cap on the size of an extracted reduced density matrix.
pub const RDM_MAX_SITES: usize = 6;

/// Discarded-weight threshold and bond-dimension cap for SVD truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub cutoff: f64,
    pub chi_max: usize,
}

impl TruncationPolicy {
    pub fn new(cutoff: f64, chi_max: usize) -> Result<Self> {
        let p = Self { cutoff, chi_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff >= 0.0) || !self.cutoff.is_finite() {
            return Err(Error::InvalidParameter(format!("cutoff must be >= 0, got {}", self.cutoff)));
        }
        if self.chi_max < 1 {
            return Err(Error::InvalidParameter("chi_max must be >= 1".into()));
        }
        Ok(())
    }

    /// No truncation beyond numerically zero singular values.
    pub fn exact() -> Self {
        Self { cutoff: 0.0, chi_max: usize::MAX }
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { cutoff: 1e-9, chi_max: 50 }
    }
}

/// Block of `ell` sites centered on the middle of an `n`-site chain.
pub fn centered_block(n: usize, ell: usize) -> Range<usize> {
    let start = n.saturating_sub(ell) / 2;
    start..start + ell
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SiteTensor {
    pub(crate) left: usize,
    pub(crate) right: usize,
    /// `(2 * left) x right`, row `a + left * s`.
    pub(crate) data: DMatrix<C64>,
}

impl SiteTensor {
    pub(crate) fn from_left_grouped(left: usize, data: DMatrix<C64>) -> Self {
        debug_assert_eq!(data.nrows(), 2 * left);
        let right = data.ncols();
        Self { left, right, data }
    }

    /// From a `left x (2 * right)` matrix with column `s + 2 * b`.
    pub(crate) fn from_right_grouped(data: DMatrix<C64>) -> Self {
        let left = data.nrows();
        let right = data.ncols() / 2;
        let data = data.reshape_generic(Dyn(2 * left), Dyn(right));
        Self { left, right, data }
    }

    pub(crate) fn right_grouped(&self) -> DMatrix<C64> {
        self.data.clone().reshape_generic(Dyn(self.left), Dyn(2 * self.right))
    }

    /// The `left x right` matrix for physical index `s`.
    pub(crate) fn block(&self, s: usize) -> nalgebra::DMatrixView<'_, C64> {
        self.data.rows(s * self.left, self.left)
    }
}

/// Matrix product state with optional orthogonality-center bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Mps {
    pub(crate) sites: Vec<SiteTensor>,
    pub(crate) center: Option<usize>,
}

impl Mps {
    /// Product state from normalized single-site amplitudes `(up, down)`.
    pub fn product_state(local_states: &[[C64; 2]]) -> Result<Self> {
        if local_states.is_empty() {
            return Err(Error::InvalidParameter("empty chain".into()));
        }
        let sites = local_states
            .iter()
            .enumerate()
            .map(|(j, amp)| {
                let norm = (amp[0].norm_sqr() + amp[1].norm_sqr()).sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "local state {j} has norm {norm}"
                    )));
                }
                Ok(SiteTensor::from_left_grouped(1, DMatrix::from_column_slice(2, 1, amp)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sites, center: Some(0) })
    }

    /// Random normalized state with bond dimensions up to `chi`, canonical at
    /// site 0.
    pub fn random<R: Rng>(n: usize, chi: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || chi == 0 {
            return Err(Error::InvalidParameter("random MPS needs n, chi >= 1".into()));
        }
        let bond = |b: usize| -> usize {
            // bond b sits between sites b-1 and b; b = 0 and b = n are edges
            let from_left = 1usize.checked_shl(b as u32).unwrap_or(usize::MAX);
            let from_right = 1usize.checked_shl((n - b) as u32).unwrap_or(usize::MAX);
            chi.min(from_left).min(from_right)
        };
        let sites = (0..n)
            .map(|j| {
                let (l, r) = (bond(j), bond(j + 1));
                let data = DMatrix::from_fn(2 * l, r, |_, _| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                SiteTensor::from_left_grouped(l, data)
            })
            .collect();
        let mut mps = Self { sites, center: None };
        mps.canonicalize(0)?;
        mps.normalize();
        Ok(mps)
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    /// Bond dimensions between neighboring sites (`n - 1` entries).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1].iter().map(|t| t.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites() {
            return Err(Error::SiteOutOfRange { site, n: self.n_sites() });
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        match self.center {
            Some(c) => self.sites[c].data.norm(),
            None => self.overlap(self).map(|z| z.re.max(0.0).sqrt()).unwrap_or(f64::NAN),
        }
    }

    /// Rescales to unit norm; requires an orthogonality center.
    pub fn normalize(&mut self) {
        if let Some(c) = self.center {
            let n = self.sites[c].data.norm();
            if n > 0.0 {
                self.sites[c].data /= C64::from(n);
            }
        }
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Mps) -> Result<C64> {
        if self.n_sites() != other.n_sites() {
            return Err(Error::DimensionMismatch(format!(
                "overlap of {} and {} site states",
                self.n_sites(),
                other.n_sites()
            )));
        }
        let mut env = DMatrix::from_element(1, 1, ONE);
        for (a, b) in self.sites.iter().zip(&other.sites) {
            let mut next = DMatrix::zeros(a.right, b.right);
            for s in 0..2 {
                next += a.block(s).adjoint() * &env * b.block(s);
            }
            env = next;
        }
        Ok(env[(0, 0)])
    }

    /// Moves the orthogonality center to `center` with QR sweeps. A state
    /// without a center is brought into mixed canonical form from scratch.
    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        self.check_site(center)?;
        let current = match self.center {
            Some(c) => c,
            None => {
                let last = self.n_sites() - 1;
                for i in 0..last {
                    self.shift_center_right(i);
                }
                last
            }
        };
        if current < center {
            for i in current..center {
                self.shift_center_right(i);
            }
        } else {
            for i in (center + 1..=current).rev() {
                self.shift_center_left(i);
            }
        }
        self.center = Some(center);
        Ok(())
    }

    /// QR on site `i`, absorbing R into site `i + 1`.
    pub(crate) fn shift_center_right(&mut self, i: usize) {
        let t = &self.sites[i];
        let left = t.left;
        let qr = t.data.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let next = &self.sites[i + 1];
        let merged = r * next.right_grouped();
        self.sites[i] = SiteTensor::from_left_grouped(left, q);
        self.sites[i + 1] = SiteTensor::from_right_grouped(merged);
        self.center = Some(i + 1);
    }

    /// LQ on site `i`, absorbing L into site `i - 1`.
    pub(crate) fn shift_center_left(&mut self, i: usize) {
        let m = self.sites[i].right_grouped();
        let qr = m.adjoint().qr();
        let q = qr.q();
        let r = qr.r();
        let prev = &self.sites[i - 1];
        let prev_left = prev.left;
        let merged = &prev.data * r.adjoint();
        self.sites[i] = SiteTensor::from_right_grouped(q.adjoint());
        self.sites[i - 1] = SiteTensor::from_left_grouped(prev_left, merged);
        self.center = Some(i - 1);
    }

    /// Contracts sites `left` and `left + 1` into a `(2 l) x (2 r)` matrix with
    /// row `a + l * s1` and column `s2 + 2 * b`.
    pub(crate) fn two_site_theta(&self, left: usize) -> DMatrix<C64> {
        &self.sites[left].data * self.sites[left + 1].right_grouped()
    }

    /// Splits a two-site matrix back into sites `left` and `left + 1` with a
    /// truncated SVD, leaving the singular values on the side given by
    /// `center_right`. Returns the discarded weight and the kept (normalized)
    /// singular values.
    pub(crate) fn split_theta(
        &mut self,
        left: usize,
        theta: DMatrix<C64>,
        policy: &TruncationPolicy,
        center_right: bool,
    ) -> Result<(f64, Vec<f64>)> {
        let l = self.sites[left].left;
        let (u, s, vt) = linalg::svd(theta)?;
        let (k, discarded) = linalg::truncation_rank(&s, policy.cutoff, policy.chi_max);
        let kept_norm = s[..k].iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(kept_norm > 0.0) {
            return Err(Error::NonFinite("zero norm after truncation".into()));
        }
        let kept: Vec<f64> = s[..k].iter().map(|x| x / kept_norm).collect();
        let mut u = u.columns(0, k).into_owned();
        let mut vt = vt.rows(0, k).into_owned();
        for (i, &sv) in kept.iter().enumerate() {
            if center_right {
                vt.row_mut(i).scale_mut(sv);
            } else {
                u.column_mut(i).scale_mut(sv);
            }
        }
        self.sites[left] = SiteTensor::from_left_grouped(l, u);
        self.sites[left + 1] = SiteTensor::from_right_grouped(vt);
        self.center = Some(if center_right { left + 1 } else { left });
        Ok((discarded, kept))
    }

    /// Applies a two-site gate on sites `left_site` and `left_site + 1` and
    /// truncates. The orthogonality center must sit on one of the two sites;
    /// afterwards it sits on the other one. The state is renormalized and the
    /// discarded weight is returned.
    pub fn apply_two_site_gate(
        &mut self,
        gate: &Matrix4<C64>,
        left_site: usize,
        policy: &TruncationPolicy,
    ) -> Result<f64> {
        if left_site + 1 >= self.n_sites() {
            return Err(Error::SiteOutOfRange { site: left_site + 1, n: self.n_sites() });
        }
        let center_right = match self.center {
            Some(c) if c == left_site => true,
            Some(c) if c == left_site + 1 => false,
            other => return Err(Error::CenterNotAtGate { center: other, expected: left_site }),
        };
        let mut theta = self.two_site_theta(left_site);
        let l = self.sites[left_site].left;
        let r = self.sites[left_site + 1].right;
        let mut v = [ZERO; 4];
        for b in 0..r {
            for a in 0..l {
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        v[2 * s1 + s2] = theta[(a + l * s1, s2 + 2 * b)];
                    }
                }
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        let row = 2 * s1 + s2;
                        let mut acc = ZERO;
                        for (k, vk) in v.iter().enumerate() {
                            acc += gate[(row, k)] * vk;
                        }
                        theta[(a + l * s1, s2 + 2 * b)] = acc;
                    }
                }
            }
        }
        let (discarded, _) = self.split_theta(left_site, theta, policy, center_right)?;
        Ok(discarded)
    }

    /// Normalized Schmidt coefficients across the bond between `bond` and
    /// `bond + 1`.
    pub fn schmidt_values(&self, bond: usize) -> Result<Vec<f64>> {
        self.check_site(bond + 1)?;
        let mut work = self.clone();
        work.canonicalize(bond)?;
        let (_, s, _) = linalg::svd(work.sites[bond].data.clone())?;
        let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(s.into_iter().map(|x| x / norm).filter(|x| *x > 0.0).collect())
    }

    /// Von Neumann entanglement entropy (natural log) across a bond.
    pub fn entanglement_entropy(&self, bond: usize) -> Result<f64> {
        Ok(self
            .schmidt_values(bond)?
            .iter()
            .map(|s| s * s)
            .filter(|p| *p > 1e-300)
            .map(|p| -p * p.ln())
            .sum())
    }

    /// Full state vector, leftmost site most significant. Small chains only.
    pub fn to_dense(&self) -> Result<DVector<C64>> {
        let n = self.n_sites();
        if n > 24 {
            return Err(Error::InvalidParameter(format!("{n} sites is too many for a dense vector")));
        }
        // rows: basis index of the sites contracted so far
        let mut acc = DMatrix::from_element(1, 1, ONE);
        for t in &self.sites {
            let rows = acc.nrows();
            let mut next = DMatrix::zeros(rows * 2, t.right);
            for s in 0..2 {
                let part = &acc * t.block(s);
                for r in 0..rows {
                    next.row_mut(2 * r + s).copy_from(&part.row(r));
                }
            }
            acc = next;
        }
        Ok(acc.column(0).into_owned())
    }

    /// Left environment of site `i` given the environment of site `i - 1`.
    fn grow_left(env: &DMatrix<C64>, t: &SiteTensor) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(t.right, t.right);
        for s in 0..2 {
            let a = t.block(s);
            out += a.transpose() * env * a.map(|z| z.conj());
        }
        out
    }

    /// Right environment of site `i` given that of site `i + 1`.
    fn grow_right(env: &DMatrix<C64>, t: &SiteTensor) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(t.left, t.left);
        for s in 0..2 {
            let a = t.block(s);
            out += a * env * a.adjoint();
        }
        out
    }

    /// Reduced density matrices of several contiguous blocks, sharing the
    /// environment contractions.
    pub fn rdms(&self, blocks: &[Range<usize>]) -> Result<Vec<DensityMatrix>> {
        let n = self.n_sites();
        for b in blocks {
            if b.is_empty() || b.end > n {
                return Err(Error::InvalidParameter(format!("block {b:?} invalid for {n} sites")));
            }
            if b.len() > RDM_MAX_SITES {
                return Err(Error::SubsystemTooLarge { len: b.len(), cap: RDM_MAX_SITES });
            }
        }
        if blocks.is_empty() {
            return Ok(Vec::new());
        }
        if self.center.is_some() {
            self.rdms_canonical(blocks)
        } else {
            let mut work = self.clone();
            work.canonicalize(0)?;
            work.rdms_canonical(blocks)
        }
    }

    /// Left environments are identity up to the center (left-isometric
    /// sites) and right environments are identity from the center on, so only
    /// the stretch between the center and each block is contracted.
    fn rdms_canonical(&self, blocks: &[Range<usize>]) -> Result<Vec<DensityMatrix>> {
        let n = self.n_sites();
        let c = self.center.expect("canonical state");
        let max_start = blocks.iter().map(|b| b.start).max().unwrap_or(0);
        let min_last = blocks.iter().map(|b| b.end - 1).min().unwrap_or(n - 1);

        let mut left_env: Vec<Option<DMatrix<C64>>> = vec![None; n];
        for i in c..max_start {
            let next = match &left_env[i] {
                Some(env) => Self::grow_left(env, &self.sites[i]),
                None => Self::grow_left(&DMatrix::identity(self.sites[i].left, self.sites[i].left), &self.sites[i]),
            };
            left_env[i + 1] = Some(next);
        }
        let mut right_env: Vec<Option<DMatrix<C64>>> = vec![None; n];
        for i in (min_last + 1..=c).rev() {
            let next = match &right_env[i] {
                Some(env) => Self::grow_right(env, &self.sites[i]),
                None => Self::grow_right(&DMatrix::identity(self.sites[i].right, self.sites[i].right), &self.sites[i]),
            };
            right_env[i - 1] = Some(next);
        }
        blocks
            .iter()
            .map(|b| self.block_rdm(b.clone(), left_env[b.start].as_ref(), right_env[b.end - 1].as_ref()))
            .collect()
    }

    fn block_rdm(
        &self,
        block: Range<usize>,
        left_env: Option<&DMatrix<C64>>,
        right_env: Option<&DMatrix<C64>>,
    ) -> Result<DensityMatrix> {
        let first = &self.sites[block.start];
        let mut ys: Vec<DMatrix<C64>> = (0..2).map(|s| first.block(s).into_owned()).collect();
        for t in &self.sites[block.start + 1..block.end] {
            ys = ys
                .iter()
                .flat_map(|y| (0..2).map(move |s| y * t.block(s)))
                .collect();
        }
        let dim = ys.len();
        let chi_l = ys[0].nrows();
        let chi_r = ys[0].ncols();
        let flat = chi_l * chi_r;
        let mut yf = DMatrix::zeros(dim, flat);
        let mut zf = DMatrix::zeros(dim, flat);
        for (s, y) in ys.iter().enumerate() {
            let mut z = match left_env {
                Some(el) => el.transpose() * y,
                None => y.clone(),
            };
            if let Some(er) = right_env {
                z = z * er;
            }
            yf.row_mut(s).copy_from_slice(y.as_slice());
            zf.row_mut(s).copy_from_slice(z.as_slice());
        }
        let mut rho = zf * yf.adjoint();
        rho = (&rho + rho.adjoint()) * C64::from(0.5);
        let tr = rho.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::NonFinite(format!("reduced density matrix trace {tr}")));
        }
        rho /= C64::from(tr);
        DensityMatrix::from_raw(block, 0.0, rho)
    }

    /// Reduced density matrix of a contiguous block.
    pub fn rdm(&self, sites: Range<usize>) -> Result<DensityMatrix> {
        let mut v = self.rdms(std::slice::from_ref(&sites))?;
        let rho = v.pop().expect("one block requested");
        rho.validate()?;
        Ok(rho)
    }

    /// `<psi|op_site|psi>` for a Hermitian single-site operator.
    pub fn expectation_local(&self, op: &Matrix2<C64>, site: usize) -> Result<f64> {
        self.check_site(site)?;
        let defect = (op - op.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if defect > 1e-12 {
            return Err(Error::InvalidParameter("operator is not Hermitian".into()));
        }
        let rho = self.rdm(site..site + 1)?;
        let m = rho.matrix();
        let mut acc = ZERO;
        for a in 0..2 {
            for b in 0..2 {
                acc += m[(a, b)] * op[(b, a)];
            }
        }
        debug_assert!(acc.im.abs() <= 1e-10);
        Ok(acc.re)
    }

    /// Sum of bond-term expectation values.
    pub fn energy(&self, hspec: &HamiltonianSpec) -> Result<f64> {
        if hspec.n_sites() != self.n_sites() {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonian for {} sites, state has {}",
                hspec.n_sites(),
                self.n_sites()
            )));
        }
        let blocks: Vec<Range<usize>> = (0..self.n_sites() - 1).map(|b| b..b + 2).collect();
        let rdms = self.rdms(&blocks)?;
        let mut e = ZERO;
        for (b, rho) in rdms.iter().enumerate() {
            let h = hspec.bond_term(b);
            let m = rho.matrix();
            for i in 0..4 {
                for j in 0..4 {
                    e += m[(i, j)] * h[(j, i)];
                }
            }
        }
        Ok(e.re)
    }

    /// Largest deviation of any non-center tensor from its isometry
    /// condition.
    pub fn isometry_defect(&self) -> Option<f64> {
        let c = self.center?;
        let mut worst: f64 = 0.0;
        for (i, t) in self.sites.iter().enumerate() {
            let g = if i < c {
                t.data.adjoint() * &t.data
            } else if i > c {
                let m = t.right_grouped();
                &m * m.adjoint()
            } else {
                continue;
            };
            let dev = (&g - DMatrix::identity(g.nrows(), g.ncols())).iter().map(|z| z.norm()).fold(0.0, f64::max);
            worst = worst.max(dev);
        }
        Some(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, kron2, pauli, HamiltonianParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const UP: [C64; 2] = [ONE, ZERO];
    const DOWN: [C64; 2] = [ZERO, ONE];

    fn plus() -> [C64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [C64::from(s), C64::from(s)]
    }

    fn fidelity(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
        a.dotc(b).norm_sqr() / (a.norm_squared() * b.norm_squared())
    }

    /// Dense partial trace, independent of the environment code.
    fn dense_rdm(psi: &DVector<C64>, n: usize, block: Range<usize>) -> DMatrix<C64> {
        let bd = 1usize << block.len();
        let rd = 1usize << (n - block.end);
        let ld = 1usize << block.start;
        DMatrix::from_fn(bd, bd, |a, b| {
            let mut acc = ZERO;
            for l in 0..ld {
                for r in 0..rd {
                    acc += psi[(l * bd + a) * rd + r] * psi[(l * bd + b) * rd + r].conj();
                }
            }
            acc
        })
    }

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn product_state_expectations() {
        let up = Mps::product_state(&[UP; 6]).unwrap();
        let px = Mps::product_state(&[plus(); 6]).unwrap();
        let alt: Vec<_> = (0..6).map(|j| if j % 2 == 0 { UP } else { DOWN }).collect();
        let alt = Mps::product_state(&alt).unwrap();
        for j in 0..6 {
            assert!((up.expectation_local(&pauli::sigma_z(), j).unwrap() - 1.0).abs() < 1e-14);
            assert!((px.expectation_local(&pauli::sigma_x(), j).unwrap() - 1.0).abs() < 1e-14);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            assert!((alt.expectation_local(&pauli::sigma_z(), j).unwrap() - sign).abs() < 1e-14);
        }
        assert_eq!(up.bond_dims(), vec![1; 5]);
        assert!((up.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn product_state_rejects_unnormalized() {
        assert!(Mps::product_state(&[[C64::from(1.0), C64::from(0.1)]]).is_err());
    }

    #[test]
    fn canonicalize_preserves_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut mps = Mps::random(9, 8, &mut rng).unwrap();
        let before = mps.to_dense().unwrap();
        mps.canonicalize(8).unwrap();
        assert!(mps.isometry_defect().unwrap() < 1e-10);
        mps.canonicalize(0).unwrap();
        assert!(mps.isometry_defect().unwrap() < 1e-10);
        mps.canonicalize(4).unwrap();
        assert!(mps.isometry_defect().unwrap() < 1e-10);
        let after = mps.to_dense().unwrap();
        assert!(fidelity(&before, &after) >= 1.0 - 1e-10);
        assert!(mps.canonicalize(9).is_err());

        let mut prod = Mps::product_state(&[plus(); 5]).unwrap();
        prod.canonicalize(3).unwrap();
        assert_eq!(prod.bond_dims(), vec![1; 4]);
    }

    #[test]
    fn identity_and_swap_gates() {
        let mut mps = Mps::product_state(&[UP, DOWN, plus()]).unwrap();
        let before = mps.to_dense().unwrap();
        let w = mps.apply_two_site_gate(&Matrix4::identity(), 0, &TruncationPolicy::default()).unwrap();
        assert_eq!(w, 0.0);
        assert!(fidelity(&before, &mps.to_dense().unwrap()) > 1.0 - 1e-14);
        assert_eq!(mps.center(), Some(1));

        let mut swap = Matrix4::zeros();
        for (r, c) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            swap[(r, c)] = ONE;
        }
        let mut mps = Mps::product_state(&[UP, DOWN]).unwrap();
        mps.apply_two_site_gate(&swap, 0, &TruncationPolicy::default()).unwrap();
        assert_eq!(mps.bond_dims(), vec![1]);
        let z0 = mps.expectation_local(&pauli::sigma_z(), 0).unwrap();
        let z1 = mps.expectation_local(&pauli::sigma_z(), 1).unwrap();
        assert!((z0 + 1.0).abs() < 1e-14 && (z1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bell_pair_from_gate() {
        // CNOT . (H x I) maps |up up> to (|up up> + |down down>)/sqrt 2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = Matrix2::new(ONE * s, ONE * s, ONE * s, -ONE * s);
        let mut cnot = Matrix4::zeros();
        for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            cnot[(r, c)] = ONE;
        }
        let gate = cnot * kron2(&h, &pauli::identity());
        let mut mps = Mps::product_state(&[UP, UP]).unwrap();
        mps.apply_two_site_gate(&gate, 0, &TruncationPolicy::default()).unwrap();
        assert_eq!(mps.bond_dims(), vec![2]);
        let sv = mps.schmidt_values(0).unwrap();
        assert_eq!(sv.len(), 2);
        assert!(sv.iter().all(|x| (x - s).abs() < 1e-14));
        assert!((mps.entanglement_entropy(0).unwrap() - 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn gate_requires_center() {
        let mut mps = Mps::product_state(&[UP; 4]).unwrap();
        let err = mps.apply_two_site_gate(&Matrix4::identity(), 2, &TruncationPolicy::default());
        assert!(matches!(err, Err(Error::CenterNotAtGate { .. })));
        let err = mps.apply_two_site_gate(&Matrix4::identity(), 3, &TruncationPolicy::default());
        assert!(matches!(err, Err(Error::SiteOutOfRange { .. })));
    }

    #[test]
    fn ghz_rdm() {
        let n = 5;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // GHZ as an explicit bond-dimension-2 MPS
        let mut sites = Vec::new();
        for j in 0..n {
            let l = if j == 0 { 1 } else { 2 };
            let r = if j == n - 1 { 1 } else { 2 };
            let mut data = DMatrix::zeros(2 * l, r);
            for s_ in 0..2 {
                let a = if j == 0 { 0 } else { s_ };
                let b = if j == n - 1 { 0 } else { s_ };
                data[(a + l * s_, b)] = ONE;
            }
            sites.push(SiteTensor::from_left_grouped(l, data));
        }
        sites[0].data *= C64::from(s);
        let mps = Mps { sites, center: None };
        let rho = mps.rdm(1..3).unwrap();
        let want = [0.5, 0.0, 0.0, 0.5];
        for a in 0..4 {
            for b in 0..4 {
                let w = if a == b { want[a] } else { 0.0 };
                assert!((rho.matrix()[(a, b)] - C64::from(w)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rdms_match_dense_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let mut mps = Mps::random(n, 6, &mut rng).unwrap();
        let psi = mps.to_dense().unwrap();
        for center in [0, 3, 7] {
            mps.canonicalize(center).unwrap();
            for block in [0..1, 2..5, 3..4, 5..8, 0..4, 1..7] {
                let rho = mps.rdm(block.clone()).unwrap();
                let want = dense_rdm(&psi, n, block.clone());
                assert!(max_abs(&(rho.matrix() - want)) < 1e-12, "center {center} block {block:?}");
            }
        }
        // no center bookkeeping at all
        let raw = Mps { sites: mps.sites.clone(), center: None };
        let rho = raw.rdm(2..5).unwrap();
        assert!(max_abs(&(rho.matrix() - dense_rdm(&psi, n, 2..5))) < 1e-12);
    }

    #[test]
    fn rdm_nesting_and_caps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mps = Mps::random(10, 8, &mut rng).unwrap();
        let big = mps.rdm(2..7).unwrap();
        for sub in [2..4, 3..6, 6..7] {
            let small = mps.rdm(sub.clone()).unwrap();
            assert!(big.partial_trace(sub).unwrap().max_abs_diff(&small) < 1e-10);
        }
        assert!(matches!(mps.rdm(0..7), Err(Error::SubsystemTooLarge { .. })));
        assert!(mps.rdm(8..11).is_err());
    }

    #[test]
    fn energies_of_product_states() {
        let up = Mps::product_state(&[UP; 10]).unwrap();
        let h = build_hamiltonian(HamiltonianParams::new(1.0, 0.0, 0.0, 10).unwrap()).unwrap();
        assert!((up.energy(&h).unwrap() + 9.0).abs() < 1e-12);
        let h = build_hamiltonian(HamiltonianParams::new(1.0, 0.0, 0.5, 10).unwrap()).unwrap();
        assert!((up.energy(&h).unwrap() + 14.0).abs() < 1e-12);
        let h = build_hamiltonian(HamiltonianParams::new(1.0, 0.0, 0.5, 9).unwrap()).unwrap();
        assert!(up.energy(&h).is_err());
    }

    #[test]
    fn energy_matches_dense_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mps = Mps::random(7, 5, &mut rng).unwrap();
        mps.canonicalize(4).unwrap();
        let h = build_hamiltonian(HamiltonianParams::new(0.8, 0.3, -0.4, 7).unwrap()).unwrap();
        let psi = mps.to_dense().unwrap();
        let want = psi.dotc(&(h.to_dense() * &psi)).re;
        assert!((mps.energy(&h).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn exact_gates_track_dense_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 6;
        let mut mps = Mps::random(n, 4, &mut rng).unwrap();
        let mut psi = mps.to_dense().unwrap();
        let h = build_hamiltonian(HamiltonianParams::new(1.0, 0.7, 0.3, n).unwrap()).unwrap();
        let policy = TruncationPolicy::exact();
        for sweep in 0..3 {
            let bonds: Vec<usize> = if sweep % 2 == 0 { (0..n - 1).collect() } else { (0..n - 1).rev().collect() };
            for b in bonds {
                let start = if sweep % 2 == 0 { b } else { b + 1 };
                mps.canonicalize(start).unwrap();
                let g = linalg::unitary_from_hermitian4(h.bond_term(b), 0.3);
                mps.apply_two_site_gate(&g, b, &policy).unwrap();
                let e = crate::model::embed_bond_operator(&g, b, n);
                psi = e * psi;
                let f = fidelity(&psi, &mps.to_dense().unwrap());
                assert!(f >= 1.0 - 1e-10, "fidelity {f}");
            }
        }
        assert!((mps.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_weight_bounded_by_cutoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let policy = TruncationPolicy::new(1e-3, 1000).unwrap();
        for _ in 0..10 {
            let mut mps = Mps::random(8, 16, &mut rng).unwrap();
            mps.canonicalize(3).unwrap();
            let g = linalg::unitary_from_hermitian4(
                &(kron2(&pauli::sigma_x(), &pauli::sigma_y()) + kron2(&pauli::sigma_z(), &pauli::sigma_z())),
                0.7,
            );
            let w = mps.apply_two_site_gate(&g, 3, &policy).unwrap();
            assert!(w <= 1e-3 + 1e-15);
            assert!((mps.norm() - 1.0).abs() < 1e-12);
        }
    }
}
