//! Channel statistics and realizations: exponentially correlated Rician user
//! channel and Swerling-I target gains.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::numerics::{
    cscg_matrix, cscg_vector, db_to_linear, dbm_to_watts, hermitian_eig, ComplexMatrix,
    ComplexVector, HermitianEig,
};

/// Scalar configuration of one ISAC frame. Logarithmic fields are kept as given;
/// the `*_w` / `*_linear` accessors perform the conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub n_tx: usize,
    pub n_rx: usize,
    pub t_coherence: usize,
    pub p_ave_dbm: f64,
    pub noise_dbm: f64,
    #[serde(with = "extended_real")]
    pub target_gain_dbm: f64,
    pub rate_min: f64,
    pub pfa_target: f64,
    pub distance_m: f64,
    pub pathloss_exp: f64,
    pub ref_gain_db: f64,
    pub ref_distance_m: f64,
    #[serde(with = "extended_real")]
    pub rician_db: f64,
    pub corr_coeff: f64,
    pub los_angle_deg: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n_tx: 20,
            n_rx: 4,
            t_coherence: 15,
            p_ave_dbm: 30.0,
            noise_dbm: -80.0,
            target_gain_dbm: -100.0,
            rate_min: 2.0,
            pfa_target: 1e-6,
            distance_m: 200.0,
            pathloss_exp: 3.2,
            ref_gain_db: -30.0,
            ref_distance_m: 1.0,
            rician_db: 0.0,
            corr_coeff: 0.6,
            los_angle_deg: 30.0,
            epsilon: 1e-4,
            seed: 2024,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, name: &'static str, value: f64, range: &'static str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(IsacError::OutOfRange { name, value, range })
            }
        }
        check(self.n_tx >= 1, "n_tx", self.n_tx as f64, ">= 1")?;
        check(self.n_rx >= 1, "n_rx", self.n_rx as f64, ">= 1")?;
        check(self.t_coherence >= 1, "t_coherence", self.t_coherence as f64, ">= 1")?;
        for (name, v) in [
            ("p_ave_dbm", self.p_ave_dbm),
            ("noise_dbm", self.noise_dbm),
            ("ref_gain_db", self.ref_gain_db),
            ("pathloss_exp", self.pathloss_exp),
            ("los_angle_deg", self.los_angle_deg),
        ] {
            check(v.is_finite(), name, v, "finite")?;
        }
        check(
            self.target_gain_dbm < f64::INFINITY,
            "target_gain_dbm",
            self.target_gain_dbm,
            "[-inf, inf)",
        )?;
        check(!self.rician_db.is_nan(), "rician_db", self.rician_db, "[-inf, inf]")?;
        check(
            self.rate_min >= 0.0 && self.rate_min.is_finite(),
            "rate_min",
            self.rate_min,
            "[0, inf)",
        )?;
        check(
            self.pfa_target > 0.0 && self.pfa_target < 1.0,
            "pfa_target",
            self.pfa_target,
            "(0, 1)",
        )?;
        check(
            self.distance_m > 0.0 && self.distance_m.is_finite(),
            "distance_m",
            self.distance_m,
            "(0, inf)",
        )?;
        check(
            self.ref_distance_m > 0.0 && self.ref_distance_m.is_finite(),
            "ref_distance_m",
            self.ref_distance_m,
            "(0, inf)",
        )?;
        check(
            (0.0..=1.0).contains(&self.corr_coeff),
            "corr_coeff",
            self.corr_coeff,
            "[0, 1]",
        )?;
        check(
            self.epsilon > 0.0 && self.epsilon < 1.0,
            "epsilon",
            self.epsilon,
            "(0, 1)",
        )?;
        Ok(())
    }

    pub fn p_ave_w(&self) -> f64 {
        dbm_to_watts(self.p_ave_dbm)
    }

    /// Shared noise variance of the pilot, data and radar receivers.
    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Target gain variance, on the same scale as `noise_w`.
    pub fn target_gain_w(&self) -> f64 {
        dbm_to_watts(self.target_gain_dbm)
    }

    /// Rician K-factor as a linear ratio; `-inf` dB gives 0 and `+inf` dB gives infinity.
    pub fn rician_linear(&self) -> f64 {
        db_to_linear(self.rician_db)
    }

    /// Large-scale gain `L_0 (d/d_0)^(-alpha)`.
    pub fn pathloss(&self) -> f64 {
        db_to_linear(self.ref_gain_db)
            * (self.distance_m / self.ref_distance_m).powf(-self.pathloss_exp)
    }
}

/// Serializes non-finite reals as the strings `"inf"` / `"-inf"`, which plain JSON cannot carry.
mod extended_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse::<f64>()
                    .map_err(|_| de::Error::custom(format!("expected a number or \"-inf\", got {t:?}"))),
            },
        }
    }
}

/// Hermitian PSD matrix together with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    matrix: ComplexMatrix,
    eig: HermitianEig,
}

impl CovarianceMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let eig = hermitian_eig(&matrix)?;
        let matrix = (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(Self { matrix, eig })
    }

    pub fn from_eig(eig: HermitianEig) -> Self {
        Self {
            matrix: eig.reconstruct(),
            eig,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn eig(&self) -> &HermitianEig {
        &self.eig
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.eig.rank()
    }

    pub fn trace(&self) -> f64 {
        self.eig.values.sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: &self.matrix * Complex64::new(factor, 0.0),
            eig: HermitianEig {
                vectors: self.eig.vectors.clone(),
                values: &self.eig.values * factor,
            },
        }
    }

    /// Draw `x ~ CN(0, self)` as `M^{1/2} z`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexVector {
        let z = cscg_vector(rng, self.dim(), 1.0);
        colour(&self.eig, &z)
    }
}

fn colour(eig: &HermitianEig, z: &ComplexVector) -> ComplexVector {
    // U diag(sqrt(values)) U^H z without forming the square root
    let mut c = eig.vectors.adjoint() * z;
    for (ci, &v) in c.iter_mut().zip(eig.values.iter()) {
        *ci *= v.max(0.0).sqrt();
    }
    &eig.vectors * c
}

/// `Phi(i,j) = r^{|i-j|}`.
pub fn exp_correlation(n: usize, r: f64) -> Result<CovarianceMatrix> {
    if !(0.0..=1.0).contains(&r) {
        return Err(IsacError::OutOfRange {
            name: "corr_coeff",
            value: r,
            range: "[0, 1]",
        });
    }
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        Complex64::new(r.powi((i as i64 - j as i64).unsigned_abs() as i32), 0.0)
    });
    CovarianceMatrix::new(m)
}

/// Half-wavelength uniform linear array response towards `angle_deg` from broadside.
pub fn steering(n: usize, angle_deg: f64) -> ComplexVector {
    let phase = PI * angle_deg.to_radians().sin();
    ComplexVector::from_fn(n, |k, _| Complex64::from_polar(1.0, phase * k as f64))
}

fn rician_weights(k: f64) -> (f64, f64) {
    if k.is_infinite() {
        (1.0, 0.0)
    } else {
        (k / (1.0 + k), 1.0 / (1.0 + k))
    }
}

pub fn rician_covariance(params: &SystemParams, los: &ComplexVector) -> Result<CovarianceMatrix> {
    if los.len() != params.n_tx {
        return Err(IsacError::DimensionMismatch(format!(
            "LoS vector has length {}, expected {}",
            los.len(),
            params.n_tx
        )));
    }
    let phi = exp_correlation(params.n_tx, params.corr_coeff)?;
    let (w_los, w_nlos) = rician_weights(params.rician_linear());
    let pl = params.pathloss();
    let m = (los * los.adjoint() * Complex64::new(w_los, 0.0)
        + phi.matrix() * Complex64::new(w_nlos, 0.0))
        * Complex64::new(pl, 0.0);
    CovarianceMatrix::new(m)
}

/// Everything needed to draw user channels: the LoS mean, the scattered part
/// and the resulting second-order statistic `R_h = E[h h^H]`.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub mean: ComplexVector,
    pub scatter: CovarianceMatrix,
    pub r_h: CovarianceMatrix,
}

impl ChannelModel {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let los = steering(params.n_tx, params.los_angle_deg);
        let (w_los, w_nlos) = rician_weights(params.rician_linear());
        let pl = params.pathloss();
        let mean = &los * Complex64::new((pl * w_los).sqrt(), 0.0);
        let scatter = exp_correlation(params.n_tx, params.corr_coeff)?.scaled(pl * w_nlos);
        let r_h = rician_covariance(params, &los)?;
        Ok(Self { mean, scatter, r_h })
    }
}

pub fn sample_user_channel<R: Rng + ?Sized>(model: &ChannelModel, rng: &mut R) -> ComplexVector {
    &model.mean + model.scatter.sample(rng)
}

/// `N_t x N_r` Swerling-I gains, i.i.d. `CN(0, delta_g^2)`.
pub fn sample_target_gains<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> ComplexMatrix {
    cscg_matrix(rng, params.n_tx, params.n_rx, params.target_gain_w())
}
