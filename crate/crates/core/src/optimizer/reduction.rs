//! Estimation-error quadratic form in its dense, reduced scalar and block-matrix
//! forms. The reduced form is what the optimizer uses.

use num_complex::Complex64;

use crate::error::{IsacError, Result};
use crate::estimation::PilotMatrix;
use crate::numerics::{ComplexMatrix, ComplexVector};

fn diag(values: impl Iterator<Item = f64>, n: usize) -> ComplexMatrix {
    let d = ComplexVector::from_iterator(n, values.map(|v| Complex64::new(v, 0.0)));
    ComplexMatrix::from_diagonal(&d)
}

/// `Sigma^{1/2} R_Lambda Sigma^{1/2} + sigma_p^2 I` with the pilot powers on the
/// first `powers.len()` modes.
pub fn pencil(eigs: &[f64], powers: &[f64], sigma_p2: f64) -> ComplexMatrix {
    let n = eigs.len();
    diag(
        (0..n).map(|i| eigs[i].max(0.0) * powers.get(i).copied().unwrap_or(0.0) + sigma_p2),
        n,
    )
}

/// `w^H U Sigma^{1/2} (Sigma^{1/2} R_Lambda Sigma^{1/2} + sigma_p^2 I)^{-1} Sigma^{1/2} U^H w`
/// with a general inverse.
pub fn error_form_dense(
    basis: &ComplexMatrix,
    eigs: &[f64],
    powers: &[f64],
    sigma_p2: f64,
    w: &ComplexVector,
) -> Result<f64> {
    let n = eigs.len();
    if basis.nrows() != n || basis.ncols() != n || w.len() != n || powers.len() > n {
        return Err(IsacError::DimensionMismatch("basis, eigenvalues and beam disagree".into()));
    }
    let root = diag(eigs.iter().map(|v| v.max(0.0).sqrt()), n);
    let left = root * basis.adjoint() * w;
    let inv = pencil(eigs, powers, sigma_p2)
        .try_inverse()
        .ok_or(IsacError::SingularSystem)?;
    Ok((left.adjoint() * inv * &left)[(0, 0)].re)
}

/// `w^H R_h (X^H X R_h + sigma_p^2 I)^{-1} w` straight from a pilot matrix.
pub fn error_form_pilot(
    r_h: &ComplexMatrix,
    pilot: &PilotMatrix,
    sigma_p2: f64,
    w: &ComplexVector,
) -> Result<f64> {
    let n = r_h.nrows();
    let x = pilot.block();
    let m = x.adjoint() * x * r_h + ComplexMatrix::identity(n, n) * Complex64::new(sigma_p2, 0.0);
    let x = m.lu().solve(w).ok_or(IsacError::SingularSystem)?;
    Ok(w.dotc(&(r_h * x)).re)
}

/// `sum_i |b_i|^2 sigma_i / (Lambda_i sigma_i [i < m] + sigma_p^2)` with `b = U^H w`.
pub fn error_form_reduced(eigs: &[f64], powers: &[f64], sigma_p2: f64, b: &ComplexVector) -> f64 {
    eigs.iter()
        .enumerate()
        .map(|(i, &s)| {
            let s = s.max(0.0);
            let lam = powers.get(i).copied().unwrap_or(0.0);
            b[i].norm_sqr() * s / (lam * s + sigma_p2)
        })
        .sum()
}

/// `[[eta, w^H U Sigma^{1/2}], [Sigma^{1/2} U^H w, Sigma^{1/2} R_Lambda Sigma^{1/2} + sigma_p^2 I]]`.
pub fn lmi_block(
    basis: &ComplexMatrix,
    eigs: &[f64],
    powers: &[f64],
    sigma_p2: f64,
    w: &ComplexVector,
    eta: f64,
) -> ComplexMatrix {
    let n = eigs.len();
    let root = diag(eigs.iter().map(|v| v.max(0.0).sqrt()), n);
    let col = root * basis.adjoint() * w;
    let mut m = ComplexMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = Complex64::new(eta, 0.0);
    for i in 0..n {
        m[(i + 1, 0)] = col[i];
        m[(0, i + 1)] = col[i].conj();
    }
    m.view_mut((1, 1), (n, n)).copy_from(&pencil(eigs, powers, sigma_p2));
    m
}

/// Smallest eigenvalue of the block matrix; nonnegative iff `eta` bounds the error form.
pub fn lmi_margin(
    basis: &ComplexMatrix,
    eigs: &[f64],
    powers: &[f64],
    sigma_p2: f64,
    w: &ComplexVector,
    eta: f64,
) -> f64 {
    let block = lmi_block(basis, eigs, powers, sigma_p2, w, eta);
    let values = block.symmetric_eigenvalues();
    values.iter().copied().fold(f64::INFINITY, f64::min)
}
