//! Linear MMSE estimation of the user channel from the pilot block and the
//! resulting achievable-rate bound.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::CovarianceMatrix;
use crate::error::{IsacError, Result};
use crate::numerics::{frobenius, quad_form, ComplexMatrix, ComplexVector};

/// `L x N_t` pilot block `X_c`; row `l` is the pilot symbol sent at time `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    block: ComplexMatrix,
}

impl PilotMatrix {
    pub fn new(block: ComplexMatrix) -> Self {
        Self { block }
    }

    pub fn zeros(len: usize, n_tx: usize) -> Self {
        Self::new(ComplexMatrix::zeros(len, n_tx))
    }

    pub fn block(&self) -> &ComplexMatrix {
        &self.block
    }

    pub fn len(&self) -> usize {
        self.block.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.block.nrows() == 0
    }

    pub fn n_tx(&self) -> usize {
        self.block.ncols()
    }

    /// Pilot energy `||X_c||_F^2`.
    pub fn power(&self) -> f64 {
        self.block.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `X_c X_c^H`.
    pub fn gram(&self) -> ComplexMatrix {
        &self.block * self.block.adjoint()
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorReport {
    pub filter: ComplexMatrix,
    pub mse: f64,
    pub err_cov: CovarianceMatrix,
    pub est_cov: CovarianceMatrix,
}

pub fn mmse_filter(
    r_h: &CovarianceMatrix,
    pilot: &PilotMatrix,
    sigma_p2: f64,
) -> Result<EstimatorReport> {
    let n = r_h.dim();
    if pilot.n_tx() != n {
        return Err(IsacError::DimensionMismatch(format!(
            "pilot has {} columns, covariance is {n}x{n}",
            pilot.n_tx()
        )));
    }
    if sigma_p2 < 0.0 {
        return Err(IsacError::OutOfRange {
            name: "sigma_p2",
            value: sigma_p2,
            range: "[0, inf)",
        });
    }
    let r = r_h.matrix();
    let x = pilot.block();
    let l = pilot.len();
    let xr = x * r;
    let gram = &xr * x.adjoint() + ComplexMatrix::identity(l, l) * Complex64::new(sigma_p2, 0.0);
    let filter = if l == 0 {
        ComplexMatrix::zeros(n, 0)
    } else {
        let chol = gram.cholesky().ok_or(IsacError::SingularSystem)?;
        // F^H = G^{-1} X R because G and R are Hermitian
        chol.solve(&xr).adjoint()
    };
    let err = r - &filter * &xr;
    let err = (&err + err.adjoint()) * Complex64::new(0.5, 0.0);
    let err_cov = CovarianceMatrix::new(err)?;
    let est_cov = CovarianceMatrix::new(r - err_cov.matrix())?;
    let mse = err_cov.matrix().diagonal().iter().map(|z| z.re).sum();
    Ok(EstimatorReport {
        filter,
        mse,
        err_cov,
        est_cov,
    })
}

/// `h_hat = F y_p`.
pub fn estimate(report: &EstimatorReport, y_p: &ComplexVector) -> Result<ComplexVector> {
    if y_p.len() != report.filter.ncols() {
        return Err(IsacError::DimensionMismatch(format!(
            "observation has length {}, filter expects {}",
            y_p.len(),
            report.filter.ncols()
        )));
    }
    Ok(&report.filter * y_p)
}

/// Normalized MSE and its reciprocal utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nmse {
    pub h_nmse: f64,
    pub u_mse: f64,
}

pub fn nmse_utility(r_h: &CovarianceMatrix, pilot: &PilotMatrix, sigma_p2: f64) -> Result<Nmse> {
    let trace = r_h.trace();
    if trace <= 0.0 {
        return Err(IsacError::ZeroTrace);
    }
    let report = mmse_filter(r_h, pilot, sigma_p2)?;
    let h_nmse = (report.mse / trace).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(Nmse {
        h_nmse,
        u_mse: 1.0 / h_nmse,
    })
}

/// Lower bound on the average achievable rate with an imperfect channel estimate.
pub fn rate_bound(
    w: &ComplexVector,
    r_h: &ComplexMatrix,
    r_he: &ComplexMatrix,
    sigma_t2: f64,
    len: usize,
    t_c: usize,
) -> f64 {
    assert!(len <= t_c, "training cannot exceed the coherence time");
    if len == t_c {
        return 0.0;
    }
    let signal = quad_form(r_h, w) + sigma_t2;
    let residual = quad_form(r_he, w) + sigma_t2;
    let ratio = (signal / residual).max(1.0);
    (t_c - len) as f64 / t_c as f64 * ratio.log2()
}

/// Frobenius defect of `R_h = R_hhat + R_he`.
pub fn decomposition_defect(r_h: &CovarianceMatrix, report: &EstimatorReport) -> f64 {
    frobenius(&(r_h.matrix() - report.est_cov.matrix() - report.err_cov.matrix()))
}
