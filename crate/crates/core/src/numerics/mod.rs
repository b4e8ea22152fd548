//! Special functions and the dense complex linear algebra shared by the other modules.

mod linalg;
mod special;

pub use linalg::{
    column_space_basis, frobenius, hermitian_defect, hermitian_eig, log_det_identity_plus,
    projector, quad_form, trace_re, ComplexMatrix, ComplexVector, HermitianEig, RANK_REL_TOL,
};
pub use special::{chi2_tail, invert_chi2_tail, marcum_q};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// One draw from `CN(0, variance)`.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

pub fn cscg_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> ComplexVector {
    ComplexVector::from_fn(len, |_, _| cscg(rng, variance))
}

pub fn cscg_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cscg(rng, variance))
}

/// `10^(db/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}
