//! GLRT target detection over one frame: statistic, exact false-alarm and
//! detection probabilities, threshold selection and projector diagnostics.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::estimation::PilotMatrix;
use crate::numerics::{
    chi2_tail, column_space_basis, frobenius, hermitian_eig, invert_chi2_tail, marcum_q,
    projector, ComplexMatrix, ComplexVector,
};

/// Frame transmitted towards the target: pilots followed by `x_t[j] w^T` data rows.
#[derive(Debug, Clone)]
pub struct DetectionSetup {
    pub pilot: PilotMatrix,
    pub beam: ComplexVector,
    pub data_symbols: ComplexVector,
    pub stacked: ComplexMatrix,
    pub threshold: f64,
}

impl DetectionSetup {
    pub fn new(
        pilot: PilotMatrix,
        beam: ComplexVector,
        data_symbols: ComplexVector,
        threshold: f64,
    ) -> Result<Self> {
        if pilot.n_tx() != beam.len() {
            return Err(IsacError::DimensionMismatch(format!(
                "pilot has {} columns, beam has {} entries",
                pilot.n_tx(),
                beam.len()
            )));
        }
        let stacked = stack_frame(&pilot, &beam, &data_symbols);
        Ok(Self {
            pilot,
            beam,
            data_symbols,
            stacked,
            threshold,
        })
    }

    pub fn t_coherence(&self) -> usize {
        self.stacked.nrows()
    }
}

/// `X = [X_c; x_t w^T]`.
pub fn stack_frame(pilot: &PilotMatrix, beam: &ComplexVector, data: &ComplexVector) -> ComplexMatrix {
    let l = pilot.len();
    let n = beam.len();
    let mut x = ComplexMatrix::zeros(l + data.len(), n);
    x.rows_mut(0, l).copy_from(pilot.block());
    for (j, s) in data.iter().enumerate() {
        for k in 0..n {
            x[(l + j, k)] = s * beam[k];
        }
    }
    x
}

/// Unit-modulus symbols with uniform phase.
pub fn random_data_symbols<R: Rng + ?Sized>(rng: &mut R, count: usize) -> ComplexVector {
    ComplexVector::from_fn(count, |_, _| {
        Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
    })
}

/// `(1/sigma^2) sum_i ||U_x^H y_i||^2` with `U_x` an orthonormal basis of `col(X)`.
pub fn glrt_statistic(y: &ComplexMatrix, x: &ComplexMatrix, sigma_r2: f64) -> f64 {
    let u = column_space_basis(x);
    glrt_with_basis(y, &u, sigma_r2)
}

/// Statistic for a precomputed orthonormal basis, for Monte Carlo loops.
pub fn glrt_with_basis(y: &ComplexMatrix, basis: &ComplexMatrix, sigma_r2: f64) -> f64 {
    let proj = basis.adjoint() * y;
    proj.iter().map(|z| z.norm_sqr()).sum::<f64>() / sigma_r2
}

/// `s^2 = ||X G||_F^2 / sigma^2`.
pub fn noncentrality(x: &ComplexMatrix, g: &ComplexMatrix, sigma_r2: f64) -> f64 {
    let xg = x * g;
    xg.iter().map(|z| z.norm_sqr()).sum::<f64>() / sigma_r2
}

pub fn false_alarm(dof: usize, threshold: f64) -> f64 {
    chi2_tail(dof, threshold)
}

pub fn detection_prob(dof: usize, s2: f64, threshold: f64) -> f64 {
    assert!(s2 >= 0.0, "noncentrality must be nonnegative");
    marcum_q(dof, (2.0 * s2).sqrt(), (2.0 * threshold).sqrt())
}

pub fn threshold_for_pfa(dof: usize, pfa_target: f64) -> Result<f64> {
    invert_chi2_tail(dof, pfa_target)
}

/// Degrees of freedom `N_r min(L+1, N_t)` of a compliant frame.
pub fn nominal_dof(n_rx: usize, len: usize, n_tx: usize) -> usize {
    n_rx * (len + 1).min(n_tx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorDiagnostics {
    pub rank: usize,
    pub idempotency_residual: f64,
    pub unit_eigenvalues: usize,
    pub zero_eigenvalues: usize,
    /// Largest distance of any eigenvalue from the nearer of 0 and 1.
    pub max_deviation: f64,
}

pub fn projector_diagnostics(x: &ComplexMatrix) -> Result<ProjectorDiagnostics> {
    let p = projector(x);
    let idempotency_residual = frobenius(&(&p * &p - &p));
    let eig = hermitian_eig(&p)?;
    let mut unit = 0;
    let mut zero = 0;
    let mut max_deviation: f64 = 0.0;
    for &v in eig.values.iter() {
        if v > 0.5 {
            unit += 1;
            max_deviation = max_deviation.max((v - 1.0).abs());
        } else {
            zero += 1;
            max_deviation = max_deviation.max(v.abs());
        }
    }
    Ok(ProjectorDiagnostics {
        rank: unit,
        idempotency_residual,
        unit_eigenvalues: unit,
        zero_eigenvalues: zero,
        max_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub pfa: f64,
    pub pd: f64,
    pub noncentrality: f64,
    pub dof: usize,
}

/// Analytic operating point for a fixed frame and target response.
pub fn evaluate(setup: &DetectionSetup, g: &ComplexMatrix, sigma_r2: f64) -> Result<DetectionReport> {
    let diag = projector_diagnostics(&setup.stacked)?;
    let dof = diag.rank * g.ncols();
    if dof == 0 {
        return Err(IsacError::NumericalFailure("frame has an empty column space".into()));
    }
    let s2 = noncentrality(&setup.stacked, g, sigma_r2);
    Ok(DetectionReport {
        pfa: false_alarm(dof, setup.threshold),
        pd: detection_prob(dof, s2, setup.threshold),
        noncentrality: s2,
        dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cscg_matrix, cscg_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng, len: usize, n: usize, t_c: usize) -> ComplexMatrix {
        let pilot = PilotMatrix::new(cscg_matrix(rng, len, n, 1.0));
        let w = cscg_vector(rng, n, 1.0);
        let data = random_data_symbols(rng, t_c - len);
        stack_frame(&pilot, &w, &data)
    }

    #[test]
    fn statistic_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_frame(&mut rng, 2, 4, 6);
        assert_eq!(glrt_statistic(&ComplexMatrix::zeros(6, 3), &x, 1.0), 0.0);
        let inside = &x * cscg_matrix(&mut rng, 4, 3, 1.0);
        let norm2: f64 = inside.iter().map(|z| z.norm_sqr()).sum();
        assert!((glrt_statistic(&inside, &x, 0.5) - norm2 / 0.5).abs() < 1e-9 * norm2);
    }

    #[test]
    fn statistic_matches_pseudoinverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_frame(&mut rng, 2, 5, 7);
        let y = cscg_matrix(&mut rng, 7, 2, 1.0);
        let xhx = x.adjoint() * &x;
        let pinv = xhx.pseudo_inverse(1e-10).unwrap();
        let p = &x * pinv * x.adjoint();
        let want: f64 = (0..2)
            .map(|i| {
                let yi = y.column(i).into_owned();
                (yi.adjoint() * &p * &yi)[(0, 0)].re
            })
            .sum::<f64>()
            / 0.8;
        assert!((glrt_statistic(&y, &x, 0.8) - want).abs() < 1e-8 * want);
    }

    #[test]
    fn noncentrality_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_frame(&mut rng, 1, 3, 4);
        assert_eq!(noncentrality(&x, &ComplexMatrix::zeros(3, 2), 1.0), 0.0);
        let q = ComplexMatrix::identity(4, 3) * Complex64::new(2.0, 0.0);
        let g = cscg_matrix(&mut rng, 3, 1, 1.0);
        let want = 4.0 * g.iter().map(|z| z.norm_sqr()).sum::<f64>() / 0.5;
        assert!((noncentrality(&q, &g, 0.5) - want).abs() < 1e-12 * want);
        let g = cscg_matrix(&mut rng, 3, 2, 1.0);
        let mut elementwise = 0.0;
        for i in 0..4 {
            for j in 0..2 {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..3 {
                    s += x[(i, k)] * g[(k, j)];
                }
                elementwise += s.norm_sqr();
            }
        }
        assert!((noncentrality(&x, &g, 1.0) - elementwise).abs() < 1e-10 * elementwise);
    }

    #[test]
    fn probabilities_closed_forms() {
        assert_eq!(false_alarm(5, 0.0), 1.0);
        assert!((false_alarm(1, 1e6f64.ln()) - 1e-6).abs() < 1e-18);
        assert_eq!(nominal_dof(4, 8, 20), 36);
        for k in [1, 4, 36] {
            let g = threshold_for_pfa(k, 1e-3).unwrap();
            assert!((detection_prob(k, 0.0, g) - false_alarm(k, g)).abs() < 1e-14);
            assert_eq!(detection_prob(k, 3.0, 0.0), 1.0);
            let mut prev = 0.0;
            for i in 0..100 {
                let pd = detection_prob(k, i as f64 * 0.5, g);
                assert!(pd > prev || pd == 1.0);
                prev = pd;
            }
        }
    }

    #[test]
    fn projector_rank_both_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (len, n) in [(1, 4), (3, 4), (4, 4), (6, 4), (2, 8)] {
            let t_c = 10;
            let x = random_frame(&mut rng, len, n, t_c);
            let d = projector_diagnostics(&x).unwrap();
            assert_eq!(d.rank, (len + 1).min(n));
            assert_eq!(d.zero_eigenvalues, t_c - d.rank);
            assert!(d.idempotency_residual < 1e-9);
            assert!(d.max_deviation < 1e-9);
        }
        let ortho = ComplexMatrix::identity(5, 2);
        let d = projector_diagnostics(&ortho).unwrap();
        assert_eq!(d.rank, 2);
        assert!(d.idempotency_residual < 1e-15);
    }

    #[test]
    fn evaluate_uses_projector_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pilot = PilotMatrix::new(cscg_matrix(&mut rng, 3, 6, 1.0));
        let w = cscg_vector(&mut rng, 6, 1.0);
        let data = random_data_symbols(&mut rng, 7);
        let gamma = threshold_for_pfa(8, 1e-2).unwrap();
        let setup = DetectionSetup::new(pilot, w, data, gamma).unwrap();
        let g = cscg_matrix(&mut rng, 6, 2, 0.3);
        let rep = evaluate(&setup, &g, 1.0).unwrap();
        assert_eq!(rep.dof, 8);
        assert!((rep.pfa - 1e-2).abs() < 1e-14);
        assert!(rep.pd >= rep.pfa);
    }
}
