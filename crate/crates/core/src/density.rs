use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, ZERO};

/// Tolerance for the Hermiticity, trace and positivity checks.
pub const DENSITY_TOL: f64 = 1e-10;

/// Reduced density matrix of a contiguous block of sites.
///
/// Row and column indices follow the chain convention: the leftmost site of
/// the block is the most significant bit, local state `0` is spin up.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    sites: Range<usize>,
    time: f64,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps `matrix` after checking its shape and the density-matrix axioms.
    pub fn new(sites: Range<usize>, time: f64, matrix: DMatrix<C64>) -> Result<Self> {
        let rho = Self::from_raw(sites, time, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps `matrix` checking only that its shape matches the block.
    pub fn from_raw(sites: Range<usize>, time: f64, matrix: DMatrix<C64>) -> Result<Self> {
        let ell = sites.len();
        let dim = 1usize << ell;
        if ell == 0 || matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for a block of {} sites",
                matrix.nrows(),
                matrix.ncols(),
                ell
            )));
        }
        Ok(Self { sites, time, matrix })
    }

    pub fn validate(&self) -> Result<()> {
        if self.matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("density matrix entry".into()));
        }
        let herm = linalg::hermiticity_defect(&self.matrix);
        if herm > DENSITY_TOL {
            return Err(Error::InvalidParameter(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr}")));
        }
        let min = self.eigenvalues()[0];
        if min < -DENSITY_TOL {
            return Err(Error::InvalidParameter(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn sites(&self) -> Range<usize> {
        self.sites.clone()
    }

    pub fn ell(&self) -> usize {
        self.sites.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Spectrum in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(self.matrix.clone())
    }

    /// Largest entrywise deviation from another matrix of the same size.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Traces out every site of this block outside `keep`.
    pub fn partial_trace(&self, keep: Range<usize>) -> Result<DensityMatrix> {
        if keep.is_empty() || keep.start < self.sites.start || keep.end > self.sites.end {
            return Err(Error::InvalidParameter(format!(
                "cannot reduce block {:?} to {:?}",
                self.sites, keep
            )));
        }
        let left = keep.start - self.sites.start;
        let right = self.sites.end - keep.end;
        let kd = 1usize << keep.len();
        let rd = 1usize << right;
        let ld = 1usize << left;
        let idx = |l: usize, k: usize, r: usize| (l * kd + k) * rd + r;
        let mut out = DMatrix::from_element(kd, kd, ZERO);
        for a in 0..kd {
            for b in 0..kd {
                let mut acc = ZERO;
                for l in 0..ld {
                    for r in 0..rd {
                        acc += self.matrix[(idx(l, a, r), idx(l, b, r))];
                    }
                }
                out[(a, b)] = acc;
            }
        }
        Self::from_raw(keep, self.time, out)
    }

    /// Pure-state projector `|v><v|` on `sites`; `v` must have unit norm.
    pub fn from_pure(sites: Range<usize>, amplitudes: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        Self::new(sites, 0.0, &v * v.adjoint())
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixRepr {
    start: usize,
    end: usize,
    time: f64,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let dim = self.dim();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                let z = self.matrix[(r, c)];
                entries.push([z.re, z.im]);
            }
        }
        DensityMatrixRepr {
            start: self.sites.start,
            end: self.sites.end,
            time: self.time,
            entries,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = DensityMatrixRepr::deserialize(deserializer)?;
        let ell = repr.end.saturating_sub(repr.start);
        let dim = 1usize << ell;
        if repr.entries.len() != dim * dim {
            return Err(serde::de::Error::custom("entry count does not match block size"));
        }
        let m = DMatrix::from_row_iterator(dim, dim, repr.entries.iter().map(|[re, im]| C64::new(*re, *im)));
        DensityMatrix::from_raw(repr.start..repr.end, repr.time, m).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    #[test]
    fn rejects_bad_matrices() {
        let m = DMatrix::from_diagonal_element(2, 2, C64::from(0.6));
        assert!(DensityMatrix::new(0..1, 0.0, m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[ONE * 1.2, ZERO, ZERO, ONE * -0.2]);
        assert!(DensityMatrix::new(0..1, 0.0, m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[ONE * 0.5, ONE * 0.1, ZERO, ONE * 0.5]);
        assert!(DensityMatrix::new(0..1, 0.0, m).is_err());
        assert!(DensityMatrix::new(0..2, 0.0, DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn ghz_marginal() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amp = vec![ZERO; 8];
        amp[0] = C64::from(s);
        amp[7] = C64::from(s);
        let rho = DensityMatrix::from_pure(0..3, &amp).unwrap();
        let two = rho.partial_trace(1..3).unwrap();
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::from(0.5),
            ZERO,
            ZERO,
            C64::from(0.5),
        ]));
        assert!((two.matrix() - expect).norm() < 1e-15);
        assert!((rho.purity() - 1.0).abs() < 1e-14);
        assert!((two.purity() - 0.5).abs() < 1e-14);
    }
}
