//! Thin wrappers over the dense complex eigensolver plus the few derived
//! routines (Hermitian exponential, PSD square root) the rest of the crate
//! leans on.

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, SVD, UPLO};

use crate::error::{Error, Result};
use crate::fock::C64;

/// max |U diag(w) U† − M|.
fn reconstruction_defect(m: &Array2<C64>, w: &Array1<f64>, u: &Array2<C64>) -> f64 {
    let mut scaled = u.clone();
    for (mut col, lam) in scaled.columns_mut().into_iter().zip(w.iter()) {
        col.mapv_inplace(|z| z * *lam);
    }
    max_abs(&(&scaled.dot(&dagger(u)) - m))
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues ascending, columns
/// of the second return are the corresponding eigenvectors.
///
/// The backing solver's eigenvector orientation flips with the memory layout
/// of the input on some lapack-binding versions (a transpose-without-
/// conjugation in the layout conversion, invisible for real-symmetric
/// matrices). The basis returned here is verified by reconstruction and
/// conjugated if needed, so callers can always rely on M = U diag(w) U†.
pub(crate) fn eigh(m: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let n = m.nrows();
    let mut fm = Array2::<C64>::zeros((n, n).f());
    fm.assign(m);
    let (w, v) = fm
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("eigh: {e}")))?;
    let scale = max_abs(m).max(1.0);
    let tol = 1e-8 * scale;
    if reconstruction_defect(m, &w, &v) <= tol {
        return Ok((w, v));
    }
    let vc = v.mapv(|z| z.conj());
    let defect = reconstruction_defect(m, &w, &vc);
    if defect <= tol {
        return Ok((w, vc));
    }
    Err(Error::Linalg(format!(
        "eigh eigenvector orientation check failed (defect {defect:.3e})"
    )))
}

/// Eigenvalues only.
pub(crate) fn eigvalsh(m: &Array2<C64>) -> Result<Array1<f64>> {
    Ok(eigh(m)?.0)
}

/// Conjugate transpose.
pub(crate) fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Largest entrywise deviation from Hermiticity, max |M - M†|.
pub(crate) fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let md = dagger(m);
    (m - &md).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise modulus.
pub(crate) fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// exp(K) for anti-Hermitian K (K† = -K), computed exactly through the
/// eigendecomposition of the Hermitian matrix iK. The result is unitary to
/// solver precision regardless of the norm of K.
pub(crate) fn expm_antihermitian(k: &Array2<C64>) -> Result<Array2<C64>> {
    let i = C64::new(0.0, 1.0);
    let h = k.mapv(|z| i * z);
    let defect = hermiticity_defect(&h);
    if defect > 1e-9 {
        return Err(Error::Linalg(format!(
            "expm_antihermitian: generator is not anti-Hermitian (defect {defect:.3e})"
        )));
    }
    let (w, u) = eigh(&h)?;
    // exp(K) = exp(-iH) = U diag(e^{-i w}) U†
    let phases: Array1<C64> = w.mapv(|x| (-i * x).exp());
    let mut scaled = u.clone();
    for (mut col, p) in scaled.columns_mut().into_iter().zip(phases.iter()) {
        col.mapv_inplace(|z| z * p);
    }
    Ok(scaled.dot(&dagger(&u)))
}

/// Square root of a positive semidefinite Hermitian matrix. Slightly negative
/// eigenvalues from roundoff are clamped to zero.
pub(crate) fn sqrt_psd(m: &Array2<C64>) -> Result<Array2<C64>> {
    let (w, u) = eigh(m)?;
    let mut scaled = u.clone();
    for (mut col, lam) in scaled.columns_mut().into_iter().zip(w.iter()) {
        let s = lam.max(0.0).sqrt();
        col.mapv_inplace(|z| z * s);
    }
    Ok(scaled.dot(&dagger(&u)))
}

/// Trace norm ‖A‖₁ = Σ singular values. Singular values are invariant under
/// the transpose/conjugation ambiguities of the backing solver and carry
/// absolute O(ε) errors, which keeps Uhlmann fidelities accurate both at
/// exact equality and deep into rank-deficient tails — unlike the
/// eigenvalue route through √(√ρ σ √ρ), where null-space noise ε inflates
/// to √ε.
pub(crate) fn trace_norm(a: &Array2<C64>) -> Result<f64> {
    let (_, s, _) = a
        .svd(false, false)
        .map_err(|e| Error::Linalg(format!("svd: {e}")))?;
    Ok(s.sum())
}
