//! Small dense linear-algebra helpers used by the filter and scheduler.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// `(x + x^T) / 2`.
pub fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

/// Eigenvalues (descending) and the row-eigenvector matrix `u` of a
/// symmetric matrix, such that `m = u^T diag(vals) u`.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let se = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[j]
            .partial_cmp(&se.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut u = DMatrix::zeros(n, n);
    for (row, &i) in order.iter().enumerate() {
        u.set_row(row, &se.eigenvectors.column(i).transpose());
    }
    (vals, u)
}

/// Largest and smallest eigenvalue of a symmetric matrix.
pub fn eig_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let (vals, _) = sym_eigen_desc(m);
    match (vals.first(), vals.last()) {
        (Some(&hi), Some(&lo)) => (hi, lo),
        _ => (0.0, 0.0),
    }
}

/// Spectral norm of an arbitrary matrix, via the Gram eigenvalues.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    spectral_norm_sq(m).sqrt()
}

/// Squared spectral norm; equals the largest eigenvalue of `m^T m`.
pub fn spectral_norm_sq(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let (hi, _) = eig_extremes(&gram);
    hi.max(0.0)
}

/// Relative symmetry-aware floor for covariance eigenvalues.
///
/// Symmetrizes, then clamps eigenvalues in `(-tol * scale, 0)` to zero, where
/// `scale` is the largest absolute eigenvalue. Anything below that band is a
/// genuine defect rather than roundoff and is reported as a numerical failure.
pub fn enforce_psd(x: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    const REL_TOL: f64 = 1e-10;
    let sym = symmetrize(x);
    let (vals, u) = sym_eigen_desc(&sym);
    let scale = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Ok(sym);
    }
    let floor = -REL_TOL * scale;
    let mut clamped = vals.clone();
    for v in clamped.iter_mut() {
        if *v < floor {
            return Err(Error::numerical(format!(
                "{context}: eigenvalue {v:.3e} below PSD floor {floor:.3e}"
            )));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    if clamped == vals {
        return Ok(sym);
    }
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(clamped));
    Ok(symmetrize(&(u.transpose() * diag * &u)))
}

/// Cholesky factorization of an SPD matrix, with a descriptive failure.
pub fn cholesky_spd(
    m: &DMatrix<f64>,
    context: &str,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    nalgebra::Cholesky::new(m.clone())
        .ok_or_else(|| Error::numerical(format!("{context}: Cholesky factorization failed")))
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn spd_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    Ok(cholesky_spd(m, context)?.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn eigen_reconstructs_descending() {
        let m = dmatrix![2.0, 1.0; 1.0, 3.0];
        let (vals, u) = sym_eigen_desc(&m);
        assert!(vals[0] >= vals[1]);
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals));
        let rec = u.transpose() * diag * &u;
        assert!((&rec - &m).norm() < 1e-12);
    }

    #[test]
    fn spectral_norm_matches_hand_value() {
        let m = dmatrix![3.0, 0.0; 0.0, -4.0];
        assert!((spectral_norm(&m) - 4.0).abs() < 1e-12);
        assert!((spectral_norm_sq(&m) - 16.0).abs() < 1e-10);
    }

    #[test]
    fn enforce_psd_clamps_roundoff_only() {
        let tiny = dmatrix![1.0, 0.0; 0.0, -1e-12];
        let fixed = enforce_psd(&tiny, "test").unwrap();
        let (_, lo) = eig_extremes(&fixed);
        assert!(lo >= 0.0);

        let bad = dmatrix![1.0, 0.0; 0.0, -1e-3];
        assert!(enforce_psd(&bad, "test").is_err());
    }
}
