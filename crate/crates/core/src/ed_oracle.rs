//! Dense state-vector reference for short chains.
//!
//! Everything here is built term by term from the Ising Hamiltonian in the
//! computational basis, without going through the bond decomposition or any
//! tensor-network code, so it can serve as an independent oracle for them.
//! Site 0 is the most significant bit of a basis index; bit value `0` is
//! spin up.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, ZERO};
use crate::model::HamiltonianParams;

pub const ED_MAX_SITES: usize = 12;

fn check_cap(n: usize) -> Result<()> {
    if n > ED_MAX_SITES {
        return Err(Error::OracleCapExceeded { n, cap: ED_MAX_SITES });
    }
    Ok(())
}

/// `sigma^z` eigenvalue of `site` in basis state `idx`.
fn z_of(idx: usize, site: usize, n: usize) -> f64 {
    if (idx >> (n - 1 - site)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    n: usize,
    amplitudes: DVector<C64>,
}

impl DenseState {
    pub fn new(n: usize, amplitudes: DVector<C64>) -> Result<Self> {
        if n == 0 || amplitudes.len() != 1usize << n {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {n} sites",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("state norm {norm}")));
        }
        Ok(Self { n, amplitudes })
    }

    /// Tensor product of single-site amplitude pairs.
    pub fn product(local: &[[C64; 2]]) -> Result<Self> {
        let n = local.len();
        check_cap(n)?;
        let amps = DVector::from_fn(1usize << n, |idx, _| {
            (0..n).fold(C64::from(1.0), |acc, site| {
                acc * local[site][(idx >> (n - 1 - site)) & 1]
            })
        });
        Self::new(n, amps)
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    /// `<psi|sigma^z_site|psi>`.
    pub fn sz(&self, site: usize) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(idx, a)| a.norm_sqr() * z_of(idx, site, self.n))
            .sum()
    }

    /// `<psi|H|psi>` for the given parameters.
    pub fn energy(&self, params: &HamiltonianParams) -> Result<f64> {
        let h = ed_hamiltonian(&params.with_sites(self.n))?;
        let hpsi = h.map(C64::from) * &self.amplitudes;
        Ok(self.amplitudes.dotc(&hpsi).re)
    }
}

/// Dense real-symmetric Ising Hamiltonian.
pub fn ed_hamiltonian(params: &HamiltonianParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let n = params.n;
    check_cap(n)?;
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for idx in 0..dim {
        let mut diag = 0.0;
        for j in 0..n - 1 {
            diag -= params.j * z_of(idx, j, n) * z_of(idx, j + 1, n);
        }
        for j in 0..n {
            diag -= params.hz * z_of(idx, j, n);
            h[(idx ^ (1 << (n - 1 - j)), idx)] -= params.hx;
        }
        h[(idx, idx)] += diag;
    }
    Ok(h)
}

/// Full spectral decomposition of the dense Hamiltonian, reusable for many
/// evolution times.
#[derive(Debug, Clone)]
pub struct EdSpectrum {
    n: usize,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl EdSpectrum {
    pub fn new(params: &HamiltonianParams) -> Result<Self> {
        let (values, vectors) = linalg::symmetric_eigen_real(ed_hamiltonian(params)?, true)?;
        let vectors = vectors.expect("eigenvectors requested");
        Ok(Self { n: params.n, values, vectors })
    }

    pub fn ground_energy(&self) -> f64 {
        self.values[0]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Lowest eigenvector with its first non-negligible amplitude made
    /// positive.
    pub fn ground_state(&self) -> DenseState {
        let mut v: DVector<f64> = self.vectors.column(0).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        let v = v.normalize();
        DenseState { n: self.n, amplitudes: v.map(C64::from) }
    }

    /// `exp(-i H t)|psi>`.
    pub fn evolve(&self, state: &DenseState, t: f64) -> Result<DenseState> {
        if state.n != self.n {
            return Err(Error::DimensionMismatch(format!(
                "state has {} sites, Hamiltonian {}",
                state.n, self.n
            )));
        }
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("evolution time {t}")));
        }
        let re = self.vectors.tr_mul(&state.amplitudes.map(|z| z.re));
        let im = self.vectors.tr_mul(&state.amplitudes.map(|z| z.im));
        let coeffs = DVector::from_fn(self.values.len(), |k, _| {
            C64::new(re[k], im[k]) * C64::from_polar(1.0, -self.values[k] * t)
        });
        let out_re = &self.vectors * coeffs.map(|z| z.re);
        let out_im = &self.vectors * coeffs.map(|z| z.im);
        let amplitudes = DVector::from_fn(out_re.len(), |i, _| C64::new(out_re[i], out_im[i]));
        Ok(DenseState { n: self.n, amplitudes })
    }
}

/// Ground state and energy by full dense diagonalization.
pub fn ed_ground_state(params: &HamiltonianParams) -> Result<(DenseState, f64)> {
    let spec = EdSpectrum::new(params)?;
    Ok((spec.ground_state(), spec.ground_energy()))
}

/// Ground energy only; skips eigenvectors, which matters near the size cap.
pub fn ed_ground_energy(params: &HamiltonianParams) -> Result<f64> {
    let (values, _) = linalg::symmetric_eigen_real(ed_hamiltonian(params)?, false)?;
    Ok(values[0])
}

pub fn ed_evolve(state: &DenseState, params: &HamiltonianParams, t: f64) -> Result<DenseState> {
    EdSpectrum::new(&params.with_sites(state.n))?.evolve(state, t)
}

/// Exact partial trace onto a contiguous block.
pub fn ed_rdm(state: &DenseState, sites: Range<usize>) -> Result<DensityMatrix> {
    let n = state.n;
    if sites.is_empty() || sites.end > n {
        return Err(Error::InvalidParameter(format!("block {sites:?} invalid for {n} sites")));
    }
    let ell = sites.len();
    let bd = 1usize << ell;
    let rd = 1usize << (n - sites.end);
    let ld = 1usize << sites.start;
    let amp = &state.amplitudes;
    let mut rho = DMatrix::from_element(bd, bd, ZERO);
    for l in 0..ld {
        for r in 0..rd {
            for a in 0..bd {
                let pa = amp[(l * bd + a) * rd + r];
                if pa == ZERO {
                    continue;
                }
                for b in 0..bd {
                    rho[(a, b)] += pa * amp[(l * bd + b) * rd + r].conj();
                }
            }
        }
    }
    DensityMatrix::new(sites, 0.0, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_hamiltonian;

    fn p(j: f64, hx: f64, hz: f64, n: usize) -> HamiltonianParams {
        HamiltonianParams::new(j, hx, hz, n).unwrap()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    #[test]
    fn two_site_diagonals() {
        let h = ed_hamiltonian(&p(1.0, 0.0, 0.0, 2)).unwrap();
        assert!(max_abs(&(h - DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0, -1.0])))) == 0.0);
        let h = ed_hamiltonian(&p(0.0, 0.0, 1.0, 2)).unwrap();
        assert!(max_abs(&(h - DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 0.0, 0.0, 2.0])))) == 0.0);
    }

    #[test]
    fn cap_enforced() {
        let big = HamiltonianParams { j: 1.0, hx: 1.0, hz: 0.0, n: 13 };
        assert!(matches!(ed_hamiltonian(&big), Err(Error::OracleCapExceeded { .. })));
    }

    #[test]
    fn matches_bond_decomposition() {
        for (n, j, hx, hz) in [(8, 0.37, -1.2, 0.55), (10, 1.0, 0.1, 0.5), (3, -0.4, 0.9, -0.2)] {
            let params = p(j, hx, hz, n);
            let dense = ed_hamiltonian(&params).unwrap();
            let embedded = build_hamiltonian(params).unwrap().to_dense();
            let diff = embedded - dense.map(C64::from);
            assert!(diff.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
        }
    }

    #[test]
    fn ground_states_of_trivial_models() {
        let (psi, e) = ed_ground_state(&p(0.0, 1.0, 0.0, 4)).unwrap();
        assert!((e + 4.0).abs() < 1e-12);
        let plus = 0.25;
        assert!(psi.amplitudes().iter().all(|a| (a.re - plus).abs() < 1e-10 && a.im.abs() < 1e-14));

        let (psi, e) = ed_ground_state(&p(1.0, 0.0, 0.5, 6)).unwrap();
        assert!((e + 8.0).abs() < 1e-12);
        assert!((psi.amplitudes()[0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn paramagnetic_ground_energy_regression() {
        let params = p(0.2, 1.0, 0.0, 10);
        let e = ed_ground_energy(&params).unwrap();
        let (_, e_full) = ed_ground_state(&params).unwrap();
        assert!((e - e_full).abs() < 1e-10);
        assert!((e - PARA_N10_GROUND).abs() < 1e-9, "{e:.15}");
    }

    /// Frozen from the first verified dense diagonalization; agrees with the
    /// free-fermion value below to 1e-13.
    const PARA_N10_GROUND: f64 = -10.090176261793424;

    /// Open transverse-field chain (`h_z = 0`) ground energy from its
    /// free-fermion mode energies: minus half the singular values of the
    /// bidiagonal matrix with `2 h_x` on the diagonal and `2 J` above it.
    fn free_fermion_ground_energy(j: f64, hx: f64, n: usize) -> f64 {
        let m = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                2.0 * hx
            } else if c == r + 1 {
                2.0 * j
            } else {
                0.0
            }
        });
        -0.5 * m.singular_values().sum()
    }

    #[test]
    fn free_fermion_cross_check() {
        for n in [4, 7, 10] {
            let params = p(0.2, 1.0, 0.0, n);
            let e = ed_ground_energy(&params).unwrap();
            assert!((e - free_fermion_ground_energy(0.2, 1.0, n)).abs() < 1e-11);
        }
        assert!((free_fermion_ground_energy(0.2, 1.0, 10) - PARA_N10_GROUND).abs() < 1e-12);
    }

    #[test]
    fn single_spin_rotation() {
        // one spin under -h_x sigma^x: <sigma^z>(t) = cos(2 t)
        let params = HamiltonianParams { j: 0.0, hx: 1.0, hz: 0.0, n: 2 };
        let up = [C64::from(1.0), ZERO];
        let psi = DenseState::product(&[up, up]).unwrap();
        let spec = EdSpectrum::new(&params).unwrap();
        for &t in &[0.0, 0.3, 1.1, 2.7] {
            let out = spec.evolve(&psi, t).unwrap();
            assert!((out.sz(0) - (2.0 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn evolution_group_property_and_conservation() {
        let params = p(1.0, 0.3, 0.2, 6);
        let spec = EdSpectrum::new(&params).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = DenseState::product(&[[C64::from(s), C64::from(s)]; 6]).unwrap();
        let once = spec.evolve(&psi, 1.7).unwrap();
        let twice = spec.evolve(&spec.evolve(&psi, 0.6).unwrap(), 1.1).unwrap();
        assert!((once.amplitudes() - twice.amplitudes()).norm() < 1e-10);
        assert!((once.amplitudes().norm() - 1.0).abs() < 1e-12);
        let e0 = psi.energy(&params).unwrap();
        let e1 = once.energy(&params).unwrap();
        assert!((e0 - e1).abs() < 1e-10);
        let same = spec.evolve(&psi, 0.0).unwrap();
        assert!((same.amplitudes() - psi.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn two_site_evolution_matches_series_exponential() {
        // independent route: scaling and squaring of a Taylor series
        let params = p(1.0, 0.3, 0.0, 2);
        let h = ed_hamiltonian(&params).unwrap().map(C64::from);
        let t = 1.0;
        let squarings = 10;
        let a = h * C64::new(0.0, -t / f64::from(1 << squarings));
        let mut term = DMatrix::<C64>::identity(4, 4);
        let mut series = DMatrix::<C64>::identity(4, 4);
        for k in 1..20 {
            term = &term * &a / C64::from(k as f64);
            series += &term;
        }
        for _ in 0..squarings {
            series = &series * &series;
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = DenseState::product(&[[C64::from(1.0), ZERO], [C64::from(s), C64::new(0.0, s)]]).unwrap();
        let expect = &series * psi.amplitudes();
        let got = ed_evolve(&psi, &params, t).unwrap();
        assert!((got.amplitudes() - expect).norm() < 1e-10);
    }

    #[test]
    fn rdm_axioms_and_nesting() {
        let up = [C64::from(1.0), ZERO];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [C64::from(s), C64::from(s)];
        let prod = DenseState::product(&[up, plus, up, plus]).unwrap();
        let r = ed_rdm(&prod, 1..3).unwrap();
        assert!((r.purity() - 1.0).abs() < 1e-14);

        // GHZ(4), inner two sites
        let mut amp = DVector::from_element(16, ZERO);
        amp[0] = C64::from(s);
        amp[15] = C64::from(s);
        let ghz = DenseState::new(4, amp).unwrap();
        let r = ed_rdm(&ghz, 1..3).unwrap();
        let d = [0.5, 0.0, 0.0, 0.5];
        for a in 0..4 {
            for b in 0..4 {
                let want = if a == b { d[a] } else { 0.0 };
                assert!((r.matrix()[(a, b)] - C64::from(want)).norm() < 1e-15);
            }
        }

        let params = p(1.0, 0.1, 0.5, 10);
        let spec = EdSpectrum::new(&params).unwrap();
        let psi = DenseState::product(&[plus; 10]).unwrap();
        let out = spec.evolve(&psi, 2.3).unwrap();
        let big = ed_rdm(&out, 3..7).unwrap();
        assert!((big.trace() - 1.0).abs() < 1e-12);
        assert!(big.eigenvalues()[0] >= -1e-12);
        let small = ed_rdm(&out, 4..6).unwrap();
        assert!(big.partial_trace(4..6).unwrap().max_abs_diff(&small) < 1e-12);
    }

    #[test]
    fn invalid_rdm_ranges() {
        let up = [C64::from(1.0), ZERO];
        let psi = DenseState::product(&[up; 3]).unwrap();
        assert!(ed_rdm(&psi, 2..4).is_err());
        assert!(ed_rdm(&psi, 1..1).is_err());
    }
}
