//! Pilot designs: MSE-optimal water-filling, MI-optimal equal power, the unified
//! eigenbasis structure that interpolates between them, and benchmark pilots.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::CovarianceMatrix;
use crate::error::{IsacError, Result};
use crate::estimation::PilotMatrix;
use crate::numerics::{cscg_matrix, hermitian_eig, log_det_identity_plus, ComplexMatrix};

/// Per-eigenmode pilot powers `Lambda_bar_ii`; amplitudes are their square roots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub powers: Vec<f64>,
    pub budget: f64,
    /// Water level, when the profile came from water-filling.
    pub multiplier: Option<f64>,
}

impl PowerProfile {
    pub fn flat(modes: usize, budget: f64) -> Self {
        let each = if modes == 0 { 0.0 } else { budget / modes as f64 };
        Self {
            powers: vec![each; modes],
            budget,
            multiplier: None,
        }
    }

    pub fn from_powers(powers: Vec<f64>) -> Self {
        let budget = powers.iter().sum();
        Self {
            powers,
            budget,
            multiplier: None,
        }
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.powers.iter().map(|p| p.max(0.0).sqrt()).collect()
    }
}

/// Number of eigenmodes a length-`len` pilot can excite.
pub fn active_modes(n_tx: usize, len: usize) -> usize {
    len.min(n_tx)
}

/// `max(0, mu - sigma_p2 / sigma_i)` over the given eigenvalues, with `mu` found by
/// bisection so that the powers add up to `budget`.
pub fn water_fill(eigenvalues: &[f64], sigma_p2: f64, budget: f64) -> Result<PowerProfile> {
    if !(budget > 0.0) {
        return Err(IsacError::OutOfRange {
            name: "budget",
            value: budget,
            range: "(0, inf)",
        });
    }
    let floor: Vec<f64> = eigenvalues
        .iter()
        .map(|&s| if s > 0.0 { sigma_p2 / s } else { f64::INFINITY })
        .collect();
    let lowest = floor.iter().cloned().fold(f64::INFINITY, f64::min);
    if !lowest.is_finite() {
        return Err(IsacError::DegenerateCovariance);
    }
    let fill = |mu: f64| -> f64 { floor.iter().map(|&f| (mu - f).max(0.0)).sum() };
    let mut lo = lowest;
    let mut hi = lowest + budget;
    while fill(hi) < budget {
        hi += budget;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fill(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if (fill(hi) - budget).abs() <= 1e-13 * budget {
            break;
        }
    }
    let mu = hi;
    let mut powers: Vec<f64> = floor.iter().map(|&f| (mu - f).max(0.0)).collect();
    // remove the bisection residue from the active entries
    let active = powers.iter().filter(|&&p| p > 0.0).count() as f64;
    let excess = (powers.iter().sum::<f64>() - budget) / active;
    for p in powers.iter_mut().filter(|p| **p > 0.0) {
        *p = (*p - excess).max(0.0);
    }
    Ok(PowerProfile {
        powers,
        budget,
        multiplier: Some(mu - excess),
    })
}

/// Largest violation of the water-filling KKT conditions for a profile on the
/// given eigenvalues: equal marginal MSE decrease on active modes, no larger
/// decrease available on inactive ones, and the budget met.
pub fn water_fill_kkt_residual(eigenvalues: &[f64], sigma_p2: f64, profile: &PowerProfile) -> f64 {
    let slope = |s: f64, p: f64| s * s * sigma_p2 / (s * p + sigma_p2).powi(2);
    let active: Vec<f64> = eigenvalues
        .iter()
        .zip(&profile.powers)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&s, &p)| slope(s, p))
        .collect();
    if active.is_empty() {
        return f64::INFINITY;
    }
    let nu = active.iter().sum::<f64>() / active.len() as f64;
    let mut resid: f64 = active.iter().map(|a| (a - nu).abs() / nu).fold(0.0, f64::max);
    for (&s, &p) in eigenvalues.iter().zip(&profile.powers) {
        if p <= 0.0 && s > 0.0 {
            resid = resid.max(((slope(s, 0.0) - nu) / nu).max(0.0));
        }
    }
    let budget_gap = (profile.total() - profile.budget).abs() / profile.budget;
    resid.max(budget_gap)
}

/// `X_c^H = U_h(:, 1:m) diag(sqrt(powers))`, zero-padded to `len` columns when `len > N_t`.
pub fn unified_pilot(u_h: &ComplexMatrix, profile: &PowerProfile, len: usize) -> Result<PilotMatrix> {
    let n = u_h.nrows();
    let m = active_modes(n, len);
    if profile.len() != m {
        return Err(IsacError::DimensionMismatch(format!(
            "profile has {} entries, expected min(L, N_t) = {m}",
            profile.len()
        )));
    }
    let mut xh = ComplexMatrix::zeros(n, len);
    for (j, a) in profile.amplitudes().into_iter().enumerate() {
        xh.set_column(j, &(u_h.column(j) * Complex64::new(a, 0.0)));
    }
    Ok(PilotMatrix::new(xh.adjoint()))
}

pub fn mse_optimal_pilot(
    r_h: &CovarianceMatrix,
    len: usize,
    sigma_p2: f64,
    budget: f64,
) -> Result<(PilotMatrix, PowerProfile)> {
    if len == 0 {
        return Err(IsacError::OutOfRange {
            name: "L",
            value: 0.0,
            range: ">= 1",
        });
    }
    if r_h.trace() <= 0.0 {
        return Err(IsacError::DegenerateCovariance);
    }
    let m = active_modes(r_h.dim(), len);
    let eig = r_h.eig();
    let profile = water_fill(&eig.values.as_slice()[..m], sigma_p2, budget)?;
    let pilot = unified_pilot(&eig.vectors, &profile, len)?;
    Ok((pilot, profile))
}

/// Orthogonal pilot rows with the energy split equally over `min(L, N_t)` directions.
pub fn mi_optimal_pilot(n_tx: usize, len: usize, budget: f64) -> PilotMatrix {
    let m = active_modes(n_tx, len);
    unified_pilot(
        &ComplexMatrix::identity(n_tx, n_tx),
        &PowerProfile::flat(m, budget),
        len,
    )
    .expect("flat profile has the right length")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    Dft,
    Gaussian,
    Epa,
}

/// Reference pilots. `Epa` needs the channel eigenbasis `u_h`; the others only use its size.
pub fn benchmark_pilot<R: Rng + ?Sized>(
    kind: BenchmarkKind,
    u_h: &ComplexMatrix,
    len: usize,
    budget: f64,
    rng: &mut R,
) -> PilotMatrix {
    let n = u_h.nrows();
    let per_entry = budget / (len * n) as f64;
    match kind {
        BenchmarkKind::Dft => {
            let a = per_entry.sqrt();
            PilotMatrix::new(ComplexMatrix::from_fn(len, n, |i, j| {
                Complex64::from_polar(a, -2.0 * PI * ((i * j) % n) as f64 / n as f64)
            }))
        }
        BenchmarkKind::Gaussian => PilotMatrix::new(cscg_matrix(rng, len, n, per_entry)),
        BenchmarkKind::Epa => {
            unified_pilot(u_h, &PowerProfile::flat(active_modes(n, len), budget), len)
                .expect("flat profile has the right length")
        }
    }
}

/// Pilot-stage MI `N_r log2 det(I + ratio X_c X_c^H)` through a Cholesky factor.
pub fn pilot_mi(pilot: &PilotMatrix, n_rx: usize, ratio: f64) -> Result<f64> {
    if pilot.is_empty() {
        return Ok(0.0);
    }
    Ok(n_rx as f64 * log_det_identity_plus(&pilot.gram(), ratio)? / LN_2)
}

/// Same quantity through the eigenvalues of the Gram matrix.
pub fn pilot_mi_eig(pilot: &PilotMatrix, n_rx: usize, ratio: f64) -> Result<f64> {
    if pilot.is_empty() {
        return Ok(0.0);
    }
    let eig = hermitian_eig(&pilot.gram())?;
    Ok(n_rx as f64 * eig.values.iter().map(|v| (ratio * v).ln_1p()).sum::<f64>() / LN_2)
}

/// Pilot-stage MI of a unified-structure pilot, straight from its powers.
pub fn profile_mi(powers: &[f64], n_rx: usize, ratio: f64) -> f64 {
    n_rx as f64 * powers.iter().map(|p| (ratio * p).ln_1p()).sum::<f64>() / LN_2
}

/// Data-stage MI of `t_c - L` symbols sent at power `p_t`.
pub fn data_mi(p_t: f64, len: usize, t_c: usize, n_rx: usize, ratio: f64) -> f64 {
    n_rx as f64 * (t_c - len) as f64 * (ratio * p_t).ln_1p() / LN_2
}

/// Expected MI between the radar returns and the target response over one frame.
pub fn expected_mi(
    pilot: &PilotMatrix,
    p_t: f64,
    t_c: usize,
    n_rx: usize,
    delta_g2: f64,
    sigma_r2: f64,
) -> Result<f64> {
    let ratio = delta_g2 / sigma_r2;
    Ok(pilot_mi(pilot, n_rx, ratio)? + data_mi(p_t, pilot.len(), t_c, n_rx, ratio))
}

/// Maximum pilot-stage MI per receive antenna for a given energy.
pub fn max_pilot_mi(n_tx: usize, len: usize, ratio: f64, budget: f64) -> f64 {
    let m = active_modes(n_tx, len) as f64;
    m * (1.0 + ratio * budget / m).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cscg_matrix, frobenius};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_cov(values: &[f64]) -> CovarianceMatrix {
        let d = DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)));
        CovarianceMatrix::new(ComplexMatrix::from_diagonal(&d)).unwrap()
    }

    #[test]
    fn rayleigh_profiles() {
        let r = diag_cov(&[2.0; 6]);
        for len in 1..=12 {
            let (_, prof) = mse_optimal_pilot(&r, len, 1.0, len as f64).unwrap();
            let want = if len < 6 { 1.0 } else { (len as f64 / 6.0).sqrt() };
            for a in prof.amplitudes() {
                assert!((a - want).abs() < 1e-12, "L={len}: {a} vs {want}");
            }
        }
    }

    #[test]
    fn two_mode_water_level() {
        let r = diag_cov(&[2.0, 1.0]);
        let (pilot, prof) = mse_optimal_pilot(&r, 2, 1.0, 2.0).unwrap();
        assert!((prof.multiplier.unwrap() - 1.75).abs() < 1e-12);
        assert!((prof.powers[0] - 1.25).abs() < 1e-12);
        assert!((prof.powers[1] - 0.75).abs() < 1e-12);
        let rep = crate::estimation::mmse_filter(&r, &pilot, 1.0).unwrap();
        assert!((rep.mse - (2.0 / 3.5 + 1.0 / 1.75)).abs() < 1e-12);

        // simplex grid oracle
        let j = |p: f64| 2.0 / (2.0 * p + 1.0) + 1.0 / ((2.0 - p) + 1.0);
        let best = (0..=10_000).map(|k| j(2.0 * k as f64 / 10_000.0)).fold(f64::INFINITY, f64::min);
        assert!(rep.mse <= best + 1e-12);
    }

    #[test]
    fn water_fill_kkt_and_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let mut s: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 10.0).collect();
            s.sort_by(|a, b| b.total_cmp(a));
            let budget = rng.random::<f64>() * 5.0 + 0.01;
            let prof = water_fill(&s, 0.7, budget).unwrap();
            assert!((prof.total() - budget).abs() <= 1e-10 * budget);
            assert!(prof.powers.iter().all(|&p| p >= 0.0));
            assert!(water_fill_kkt_residual(&s, 0.7, &prof) < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_modes_get_nothing() {
        let r = diag_cov(&[3.0, 1.0, 0.0, 0.0]);
        let (_, prof) = mse_optimal_pilot(&r, 3, 1.0, 50.0).unwrap();
        assert_eq!(prof.powers[2], 0.0);
        assert!(matches!(
            mse_optimal_pilot(&diag_cov(&[0.0, 0.0]), 1, 1.0, 1.0),
            Err(IsacError::DegenerateCovariance)
        ));
    }

    #[test]
    fn mi_optimal_grams() {
        let x = mi_optimal_pilot(5, 3, 3.0);
        assert!(frobenius(&(x.gram() - ComplexMatrix::identity(3, 3))) < 1e-14);
        let x = mi_optimal_pilot(3, 6, 6.0);
        let eig = hermitian_eig(&x.gram()).unwrap();
        for k in 0..3 {
            assert!((eig.values[k] - 2.0).abs() < 1e-12);
        }
        for k in 3..6 {
            assert!(eig.values[k].abs() < 1e-12);
        }
    }

    #[test]
    fn mi_two_by_two_is_two_bits() {
        let x = mi_optimal_pilot(2, 2, 2.0);
        let mi = pilot_mi(&x, 1, 1.0).unwrap();
        assert!((mi - 2.0).abs() < 1e-12);
        assert!((max_pilot_mi(2, 2, 1.0, 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unified_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = cscg_matrix(&mut rng, 4, 4, 1.0);
        let r = CovarianceMatrix::new(&a * a.adjoint()).unwrap();
        let u = &r.eig().vectors;
        let flat = unified_pilot(u, &PowerProfile::flat(3, 6.0), 3).unwrap();
        assert!(frobenius(&(flat.gram() - ComplexMatrix::identity(3, 3) * Complex64::new(2.0, 0.0))) < 1e-12);
        let zero = unified_pilot(u, &PowerProfile::flat(3, 0.0), 3).unwrap();
        assert_eq!(zero.power(), 0.0);
        assert!(unified_pilot(u, &PowerProfile::flat(2, 1.0), 3).is_err());

        let (direct, prof) = mse_optimal_pilot(&r, 3, 0.5, 4.0).unwrap();
        let rebuilt = unified_pilot(u, &prof, 3).unwrap();
        assert_eq!(direct, rebuilt);
        // X_c^H = U_h(1:L) Lambda
        let xh = direct.block().adjoint();
        for (j, amp) in prof.amplitudes().iter().enumerate() {
            let col = u.column(j) * Complex64::new(*amp, 0.0);
            assert!((xh.column(j) - col).norm() < 1e-10);
        }

        let wide = unified_pilot(u, &PowerProfile::flat(4, 4.0), 6).unwrap();
        assert_eq!(wide.len(), 6);
        assert!(wide.block().row(5).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn benchmarks() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = ComplexMatrix::identity(6, 6);
        let dft = benchmark_pilot(BenchmarkKind::Dft, &u, 4, 8.0, &mut rng);
        assert!((dft.power() - 8.0).abs() < 1e-12);
        let want = ComplexMatrix::identity(4, 4) * Complex64::new(2.0, 0.0);
        assert!(frobenius(&(dft.gram() - want)) < 1e-10);

        let epa = benchmark_pilot(BenchmarkKind::Epa, &u, 4, 8.0, &mut rng);
        assert_eq!(epa, unified_pilot(&u, &PowerProfile::flat(4, 8.0), 4).unwrap());

        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| benchmark_pilot(BenchmarkKind::Gaussian, &u, 4, 8.0, &mut rng).power())
            .sum::<f64>()
            / draws as f64;
        assert!((mean / 8.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn mi_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = PilotMatrix::new(cscg_matrix(&mut rng, 3, 5, 2.0));
            let a = pilot_mi(&x, 4, 0.3).unwrap();
            let b = pilot_mi_eig(&x, 4, 0.3).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(expected_mi(&PilotMatrix::zeros(2, 3), 0.0, 5, 2, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn expected_mi_default_scalars() {
        let p = crate::channel::SystemParams::default();
        let ratio = p.target_gain_w() / p.noise_w();
        let len = 8;
        let budget = len as f64 * p.p_ave_w();
        let x = mi_optimal_pilot(p.n_tx, len, budget);
        let mi = expected_mi(&x, p.p_ave_w(), p.t_coherence, p.n_rx, p.target_gain_w(), p.noise_w())
            .unwrap();
        let want = p.n_rx as f64
            * (max_pilot_mi(p.n_tx, len, ratio, budget)
                + (p.t_coherence - len) as f64 * (1.0 + ratio * p.p_ave_w()).log2());
        assert!((mi - want).abs() < 1e-9 * want);
    }

    #[test]
    fn profile_mi_concave_nondecreasing() {
        let h = 1e-3;
        for k in 0..50 {
            let p = k as f64 * 0.2;
            let f = |x: f64| profile_mi(&[x, 1.0], 4, 0.5);
            assert!(f(p + h) >= f(p));
            assert!(f(p + h) - 2.0 * f(p) + f((p - h).max(0.0)) <= 1e-12 || p < h);
        }
    }
}
