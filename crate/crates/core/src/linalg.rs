//! Thin wrappers around the dense decompositions used by the tensor code.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Singular values below this fraction of the largest one are numerical zeros.
const SVD_ZERO_FLOOR: f64 = 1e-15;

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn eigh(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let dim = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: DMatrix<C64>) -> Vec<f64> {
    let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// `exp(-i h dt)` for a Hermitian 4x4 `h`, built from its eigendecomposition.
pub fn unitary_from_hermitian4(h: &Matrix4<C64>, dt: f64) -> Matrix4<C64> {
    let eig = SymmetricEigen::new(*h);
    let v = eig.eigenvectors;
    let phases = Matrix4::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * dt)));
    v * phases * v.adjoint()
}

/// Deviation of `u` from unitarity, max-entry norm of `U^dagger U - I`.
pub fn unitarity_defect4(u: &Matrix4<C64>) -> f64 {
    let prod = u.adjoint() * u - Matrix4::identity();
    prod.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermiticity defect, max-entry norm of `h - h^dagger`.
pub fn hermiticity_defect(h: &DMatrix<C64>) -> f64 {
    (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Thin singular value decomposition `m = U diag(s) V^dagger` with singular
/// values sorted descending, computed by LAPACK (`zgesdd`, falling back to
/// `zgesvd`).
pub fn svd(m: DMatrix<C64>) -> Result<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    if m.is_empty() {
        return Err(Error::DimensionMismatch("SVD of an empty matrix".into()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("SVD input".into()));
    }
    lapack_svd(m.clone(), true).or_else(|_| lapack_svd(m, false))
}

fn lapack_svd(mut a: DMatrix<C64>, divide_conquer: bool) -> Result<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    use lapack_sys::{c_double_complex, zgesdd_, zgesvd_};
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut s = vec![0.0f64; k];
    let mut u = DMatrix::<C64>::zeros(m, k);
    let mut vt = DMatrix::<C64>::zeros(k, n);
    let (mi, ni, ki) = (m as i32, n as i32, k as i32);
    let mut info = 0i32;
    let mut query = [ZERO];
    let ap = a.as_mut_slice().as_mut_ptr() as *mut c_double_complex;
    let up = u.as_mut_slice().as_mut_ptr() as *mut c_double_complex;
    let vp = vt.as_mut_slice().as_mut_ptr() as *mut c_double_complex;
    let big = m.max(n);
    // SAFETY: Complex64 and the bindgen complex type are both repr(C) pairs of
    // f64; every buffer is sized as LAPACK documents for these arguments.
    unsafe {
        if divide_conquer {
            let mut rwork = vec![0.0f64; (k * (5 * k + 7).max(2 * big + 2 * k + 1)).max(1)];
            let mut iwork = vec![0i32; 8 * k];
            let job = b'S' as std::ffi::c_char;
            zgesdd_(
                &job, &mi, &ni, ap, &mi, s.as_mut_ptr(), up, &mi, vp, &ki,
                query.as_mut_ptr() as *mut c_double_complex, &-1, rwork.as_mut_ptr(), iwork.as_mut_ptr(), &mut info,
            );
            let lwork = query[0].re as i32;
            let mut work = vec![ZERO; lwork.max(1) as usize];
            zgesdd_(
                &job, &mi, &ni, ap, &mi, s.as_mut_ptr(), up, &mi, vp, &ki,
                work.as_mut_ptr() as *mut c_double_complex, &lwork, rwork.as_mut_ptr(), iwork.as_mut_ptr(), &mut info,
            );
        } else {
            let mut rwork = vec![0.0f64; 5 * k];
            let job = b'S' as std::ffi::c_char;
            zgesvd_(
                &job, &job, &mi, &ni, ap, &mi, s.as_mut_ptr(), up, &mi, vp, &ki,
                query.as_mut_ptr() as *mut c_double_complex, &-1, rwork.as_mut_ptr(), &mut info,
            );
            let lwork = query[0].re as i32;
            let mut work = vec![ZERO; lwork.max(1) as usize];
            zgesvd_(
                &job, &job, &mi, &ni, ap, &mi, s.as_mut_ptr(), up, &mi, vp, &ki,
                work.as_mut_ptr() as *mut c_double_complex, &lwork, rwork.as_mut_ptr(), &mut info,
            );
        }
    }
    if info != 0 {
        return Err(Error::Linalg(format!("LAPACK SVD failed with info = {info}")));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("singular values".into()));
    }
    Ok((u, s, vt))
}

/// Eigenvalues (ascending) of a real symmetric matrix and, if requested, the
/// eigenvectors as columns. Uses LAPACK's divide-and-conquer driver.
pub fn symmetric_eigen_real(mut a: DMatrix<f64>, vectors: bool) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    use lapack_sys::dsyevd_;
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{}x{} is not a square matrix", a.nrows(), a.ncols())));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("eigensolver input".into()));
    }
    let ni = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    let jobz = (if vectors { b'V' } else { b'N' }) as std::ffi::c_char;
    let uplo = b'L' as std::ffi::c_char;
    let (mut wq, mut iq) = (0.0f64, 0i32);
    // SAFETY: `a` is an n x n column-major buffer and the workspaces are sized
    // from LAPACK's own query.
    unsafe {
        dsyevd_(&jobz, &uplo, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(), &mut wq, &-1, &mut iq, &-1, &mut info);
        let (lwork, liwork) = (wq as i32, iq);
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        let mut iwork = vec![0i32; liwork.max(1) as usize];
        dsyevd_(
            &jobz, &uplo, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("LAPACK eigensolver failed with info = {info}")));
    }
    Ok((w, vectors.then_some(a)))
}

/// Number of singular values to keep and the discarded squared weight
/// (relative to the total squared weight).
///
/// The smallest values are dropped while their accumulated weight stays at or
/// below `cutoff`; the rank is then capped at `chi_max`. At least one value is
/// always kept.
pub fn truncation_rank(s: &[f64], cutoff: f64, chi_max: usize) -> (usize, f64) {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if s.is_empty() || total == 0.0 {
        return (s.len().min(1), 0.0);
    }
    let floor = s[0] * SVD_ZERO_FLOOR;
    let mut keep = s.len();
    let mut dropped = 0.0;
    while keep > 1 {
        let w = s[keep - 1] * s[keep - 1] / total;
        if s[keep - 1] <= floor || dropped + w <= cutoff {
            dropped += w;
            keep -= 1;
        } else {
            break;
        }
    }
    while keep > chi_max.max(1) {
        dropped += s[keep - 1] * s[keep - 1] / total;
        keep -= 1;
    }
    (keep, dropped)
}
