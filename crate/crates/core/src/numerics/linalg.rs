use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{IsacError, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Eigenvalues below this fraction of the largest are exact zeros for rank decisions.
pub const RANK_REL_TOL: f64 = 1e-12;
const HERMITIAN_REL_TOL: f64 = 1e-10;
const NEGATIVE_REL_TOL: f64 = 1e-8;

/// Eigendecomposition `M = U diag(values) U^H` of a Hermitian PSD matrix,
/// eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub vectors: ComplexMatrix,
    pub values: DVector<f64>,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn rank(&self) -> usize {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return 0;
        }
        self.values.iter().filter(|&&v| v > RANK_REL_TOL * max).count()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_values(|v| v)
    }

    /// `U f(Sigma) U^H`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::new(f(self.values[j]), 0.0);
        }
        &scaled * self.vectors.adjoint()
    }

    /// Principal square root, with the clamped-zero eigenvalues mapped to zero.
    pub fn sqrt_matrix(&self) -> ComplexMatrix {
        self.map_values(|v| v.max(0.0).sqrt())
    }
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative Hermitian defect `||M - M^H||_F / ||M||_F`.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let norm = frobenius(m);
    if norm == 0.0 {
        return 0.0;
    }
    frobenius(&(m - m.adjoint())) / norm
}

pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(IsacError::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_REL_TOL {
        return Err(IsacError::NotHermitian(defect));
    }
    let norm = frobenius(m);
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(sym, 1e-15, 10_000)
        .ok_or_else(|| IsacError::NumericalFailure("eigen solver did not converge".into()))?;

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let n = m.nrows();
    let mut vectors = ComplexMatrix::zeros(n, n);
    let mut values = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let v = eig.eigenvalues[src];
        if v < -NEGATIVE_REL_TOL * norm {
            return Err(IsacError::NegativeEigenvalue(v));
        }
        values[dst] = v.max(0.0);
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEig { vectors, values })
}

/// Orthogonal projector onto the column space of `x`, built from the left
/// singular vectors whose singular values clear the pseudo-inverse cutoff.
pub fn column_space_basis(x: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = x.shape();
    if rows == 0 || cols == 0 {
        return ComplexMatrix::zeros(rows, 0);
    }
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = smax * rows.max(cols) as f64 * f64::EPSILON;
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax > 0.0 && s > cutoff)
        .map(|(i, _)| i)
        .collect();
    let mut basis = ComplexMatrix::zeros(rows, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    basis
}

pub fn projector(x: &ComplexMatrix) -> ComplexMatrix {
    let u = column_space_basis(x);
    &u * u.adjoint()
}

/// `log det(I + scale * A)` for Hermitian PSD `A` via Cholesky.
pub fn log_det_identity_plus(a: &ComplexMatrix, scale: f64) -> Result<f64> {
    let n = a.nrows();
    let m = ComplexMatrix::identity(n, n) + a * Complex64::new(scale, 0.0);
    let chol = m.cholesky().ok_or(IsacError::SingularSystem)?;
    Ok(chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| 2.0 * d.re.ln())
        .sum())
}

pub fn quad_form(a: &ComplexMatrix, w: &ComplexVector) -> f64 {
    (w.adjoint() * a * w)[(0, 0)].re
}

pub fn trace_re(a: &ComplexMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}
