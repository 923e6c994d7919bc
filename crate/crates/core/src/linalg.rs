use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest absolute asymmetry `max |A_ij − A_ji|`.
pub(crate) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub(crate) fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let ev = SymmetricEigen::new(m.clone()).eigenvalues;
    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Check positive semidefiniteness with a tolerance relative to the spectral scale.
pub(crate) fn check_psd(m: &DMatrix<f64>, rel_tol: f64, what: &str) -> Result<()> {
    let (lo, hi) = eigen_range(m);
    if lo < -rel_tol * hi.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Consistency(format!(
            "{what} is not positive semidefinite: min eigenvalue {lo:e}, max {hi:e}"
        )));
    }
    Ok(())
}

/// Symmetric square-root factor `L` with `L Lᵀ = M` for a PSD matrix.
///
/// Eigenvalues below `−rel_tol·max` are an error; the remaining negative ones are zeroed.
pub(crate) fn psd_factor(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(m.clone());
    let hi = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut out = eig.eigenvectors.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -rel_tol * hi {
            return Err(Error::Consistency(format!(
                "noise covariance has eigenvalue {lam:e} below tolerance (max {hi:e})"
            )));
        }
        let root = lam.max(0.0).sqrt();
        for i in 0..n {
            out[(i, k)] *= root;
        }
    }
    Ok(out)
}
