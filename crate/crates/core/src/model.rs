//! Mixed-field Ising chain with open boundaries and its second-order
//! Trotter gate set.
//!
//! Basis convention shared by every module: local state `0` is spin up
//! (`sigma^z = +1`), `1` is spin down, and in multi-site indices the leftmost
//! site is the most significant bit. A two-site operator therefore acts on the
//! index `2 * s_left + s_right`.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ONE, ZERO};

/// Hermiticity tolerance for bond terms.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Pauli matrices and the identity.
pub mod pauli {
    use super::*;

    pub fn identity() -> Matrix2<C64> {
        Matrix2::new(ONE, ZERO, ZERO, ONE)
    }

    pub fn sigma_x() -> Matrix2<C64> {
        Matrix2::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn sigma_y() -> Matrix2<C64> {
        let i = C64::new(0.0, 1.0);
        Matrix2::new(ZERO, -i, i, ZERO)
    }

    pub fn sigma_z() -> Matrix2<C64> {
        Matrix2::new(ONE, ZERO, ZERO, -ONE)
    }
}

/// Kronecker product of two single-site operators, left site most significant.
pub fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Parameters of `H = -J sum zz - h_x sum x - h_z sum z` on `n` open sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    pub j: f64,
    pub hx: f64,
    pub hz: f64,
    pub n: usize,
}

impl HamiltonianParams {
    pub fn new(j: f64, hx: f64, hz: f64, n: usize) -> Result<Self> {
        let p = Self { j, hx, hz, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "chain needs at least 2 sites, got {}",
                self.n
            )));
        }
        for (name, v) in [("J", self.j), ("h_x", self.hx), ("h_z", self.hz)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} is not finite")));
            }
        }
        Ok(())
    }

    pub fn with_sites(self, n: usize) -> Self {
        Self { n, ..self }
    }
}

/// A nearest-neighbor Hamiltonian given as one Hermitian 4x4 term per bond.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub params: Option<HamiltonianParams>,
    n: usize,
    bond_terms: Vec<Matrix4<C64>>,
}

impl HamiltonianSpec {
    /// Generic constructor from arbitrary Hermitian bond terms; bond `b`
    /// couples sites `b` and `b + 1`.
    pub fn from_bond_terms(bond_terms: Vec<Matrix4<C64>>) -> Result<Self> {
        if bond_terms.is_empty() {
            return Err(Error::InvalidParameter("at least one bond is required".into()));
        }
        for (b, term) in bond_terms.iter().enumerate() {
            if term.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite(format!("bond term {b}")));
            }
            let defect = (term - term.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if defect > HERMITIAN_TOL {
                return Err(Error::InvalidParameter(format!(
                    "bond term {b} is not Hermitian (defect {defect:e})"
                )));
            }
        }
        Ok(Self {
            params: None,
            n: bond_terms.len() + 1,
            bond_terms,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn bond_terms(&self) -> &[Matrix4<C64>] {
        &self.bond_terms
    }

    pub fn bond_term(&self, bond: usize) -> &Matrix4<C64> {
        &self.bond_terms[bond]
    }

    /// Dense `2^n x 2^n` matrix obtained by embedding and summing the bond
    /// terms. Intended for small chains only.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n;
        self.bond_terms
            .iter()
            .enumerate()
            .fold(DMatrix::zeros(dim, dim), |acc, (b, term)| acc + embed_bond_operator(term, b, self.n))
    }
}

/// `op` acting on sites `bond, bond + 1` of an `n`-site chain, identity
/// elsewhere, as a dense `2^n x 2^n` matrix.
pub fn embed_bond_operator(op: &Matrix4<C64>, bond: usize, n: usize) -> DMatrix<C64> {
    let dim = 1usize << n;
    let mut out = DMatrix::zeros(dim, dim);
    // bits of sites bond, bond+1 sit at positions n-1-bond and n-2-bond
    let shift = n - 2 - bond;
    for col in 0..dim {
        let local_in = (col >> shift) & 3;
        let rest = col & !(3 << shift);
        for local_out in 0..4 {
            let v = op[(local_out, local_in)];
            if v != ZERO {
                out[(rest | (local_out << shift), col)] += v;
            }
        }
    }
    out
}

/// Builds the bond decomposition of the mixed-field Ising chain.
///
/// Each site's field is split evenly between the bonds that touch it, so the
/// two boundary sites put their full field on their single bond.
pub fn build_hamiltonian(params: HamiltonianParams) -> Result<HamiltonianSpec> {
    params.validate()?;
    let n = params.n;
    let x = pauli::sigma_x();
    let z = pauli::sigma_z();
    let id = pauli::identity();
    let field = x * C64::from(params.hx) + z * C64::from(params.hz);
    let weight = |site: usize| if site == 0 || site == n - 1 { 1.0 } else { 0.5 };

    let bond_terms = (0..n - 1)
        .map(|b| {
            let zz = kron2(&z, &z) * C64::from(-params.j);
            let left = kron2(&(field * C64::from(-weight(b))), &id);
            let right = kron2(&id, &(field * C64::from(-weight(b + 1))));
            zz + left + right
        })
        .collect();
    let mut spec = HamiltonianSpec::from_bond_terms(bond_terms)?;
    spec.params = Some(params);
    Ok(spec)
}

/// One Trotter layer: gates on mutually disjoint bonds.
#[derive(Debug, Clone, PartialEq)]
pub struct GateLayer {
    /// Time slice this layer integrates.
    pub dt: f64,
    /// `(bond, gate)` pairs, bonds increasing.
    pub gates: Vec<(usize, Matrix4<C64>)>,
}

impl GateLayer {
    fn new(hspec: &HamiltonianSpec, parity: usize, dt: f64) -> Self {
        let gates = (parity..hspec.n_sites() - 1)
            .step_by(2)
            .map(|b| (b, linalg::unitary_from_hermitian4(hspec.bond_term(b), dt)))
            .collect();
        Self { dt, gates }
    }
}

/// Symmetric second-order splitting: bonds (1,2),(3,4),... for `tau/2`, then
/// bonds (2,3),(4,5),... for `tau`, then the first set again for `tau/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrotterScheme {
    pub tau: f64,
    pub layers: Vec<GateLayer>,
    pub order: u32,
    // first-set layer over a full tau, for fusing the half steps of
    // consecutive steps
    merged_outer: GateLayer,
}

impl TrotterScheme {
    /// The outer layer evaluated over a full `tau`. Applying it in place of two
    /// adjacent half-step layers from consecutive steps is exact.
    pub fn merged_outer_layer(&self) -> &GateLayer {
        &self.merged_outer
    }

    pub fn outer_half_layer(&self) -> &GateLayer {
        &self.layers[0]
    }

    pub fn inner_layer(&self) -> &GateLayer {
        &self.layers[1]
    }
}

pub fn build_trotter_gates(hspec: &HamiltonianSpec, tau: f64) -> Result<TrotterScheme> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
    }
    let outer = GateLayer::new(hspec, 0, tau / 2.0);
    let inner = GateLayer::new(hspec, 1, tau);
    Ok(TrotterScheme {
        tau,
        layers: vec![outer.clone(), inner, outer],
        order: 2,
        merged_outer: GateLayer::new(hspec, 0, tau),
    })
}
