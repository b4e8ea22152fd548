use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binomial_sigma, trial_rng, TrialPlan};
use crate::channel::{CovarianceMatrix, SystemParams};
use crate::detection::{
    detection_prob, glrt_with_basis, noncentrality, random_data_symbols, stack_frame, threshold_for_pfa,
};
use crate::error::{IsacError, Result};
use crate::estimation::{estimate, mmse_filter, PilotMatrix};
use crate::numerics::{column_space_basis, cscg_matrix, cscg_vector, ComplexMatrix};
use crate::optimizer::{DesignSolution, Scenario};
use crate::pilot::{benchmark_pilot, mse_optimal_pilot, unified_pilot, BenchmarkKind, PowerProfile};

/// Streams for the Pd campaigns start far above the null-hypothesis streams.
const PD_STREAM_BASE: u64 = 1 << 40;
const FRAME_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionCheck {
    /// `"pfa"` or `"pd"`.
    pub quantity: String,
    pub pfa_target: f64,
    pub threshold: f64,
    pub noncentrality: f64,
    pub trials: usize,
    pub analytic: f64,
    pub empirical: f64,
    pub sigma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionValidation {
    pub label: String,
    pub dof: usize,
    pub checks: Vec<DetectionCheck>,
    pub pass: bool,
}

fn null_statistics(basis: &ComplexMatrix, t_c: usize, n_rx: usize, base: u64, offset: u64, n: usize, signal: Option<&ComplexMatrix>) -> Vec<f64> {
    (0..n as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(base, offset + t);
            let mut y = cscg_matrix(&mut rng, t_c, n_rx, 1.0);
            if let Some(s) = signal {
                y += s;
            }
            glrt_with_basis(&y, basis, 1.0)
        })
        .collect()
}

fn exceed(stats: &[f64], threshold: f64) -> f64 {
    stats.iter().filter(|&&t| t > threshold).count() as f64 / stats.len() as f64
}

fn check(quantity: &str, pfa: f64, threshold: f64, s2: f64, stats: &[f64], analytic: f64) -> DetectionCheck {
    let empirical = exceed(stats, threshold);
    let sigma = binomial_sigma(analytic, stats.len());
    DetectionCheck {
        quantity: quantity.into(),
        pfa_target: pfa,
        threshold,
        noncentrality: s2,
        trials: stats.len(),
        analytic,
        empirical,
        sigma,
        pass: (empirical - analytic).abs() <= 3.0 * sigma,
    }
}

/// Monte Carlo false-alarm and conditional detection rates of the GLRT for one
/// random frame with `len` pilot rows. Null trials use `plan.n_trials`; every
/// detection point uses a tenth of that.
pub fn validate_detection(
    params: &SystemParams,
    len: usize,
    plan: &TrialPlan,
    pfa_grid: &[f64],
    s2_grid: &[f64],
) -> Result<DetectionValidation> {
    params.validate()?;
    let t_c = params.t_coherence;
    if len == 0 || len >= t_c {
        return Err(IsacError::OutOfRange {
            name: "L",
            value: len as f64,
            range: "[1, T_c - 1]",
        });
    }
    if let Some(&bad) = pfa_grid.iter().find(|p| !(**p >= 1e-3 && **p <= 1e-1)) {
        return Err(IsacError::OutOfRange {
            name: "pfa",
            value: bad,
            range: "[1e-3, 1e-1]",
        });
    }
    let n = params.n_tx;
    let mut rng = plan.rng(FRAME_STREAM);
    let pilot = PilotMatrix::new(cscg_matrix(&mut rng, len, n, 1.0));
    let beam = cscg_vector(&mut rng, n, 1.0);
    let data = random_data_symbols(&mut rng, t_c - len);
    let x = stack_frame(&pilot, &beam, &data);
    let basis = column_space_basis(&x);
    let dof = basis.ncols() * params.n_rx;
    let thresholds = pfa_grid
        .iter()
        .map(|&p| threshold_for_pfa(dof, p))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let null = null_statistics(&basis, t_c, params.n_rx, plan.base_seed, 0, plan.n_trials, None);
    for (&p, &g) in pfa_grid.iter().zip(&thresholds) {
        checks.push(check("pfa", p, g, 0.0, &null, p));
    }
    let pd_trials = (plan.n_trials / 10).max(1);
    let g0 = cscg_matrix(&mut rng, n, params.n_rx, 1.0);
    let raw = noncentrality(&x, &g0, 1.0);
    for (j, &s2) in s2_grid.iter().enumerate() {
        let g = &g0 * Complex64::new((s2 / raw).sqrt(), 0.0);
        let signal = &x * g;
        let offset = PD_STREAM_BASE * (j as u64 + 1);
        let stats = null_statistics(&basis, t_c, params.n_rx, plan.base_seed, offset, pd_trials, Some(&signal));
        for (&p, &th) in pfa_grid.iter().zip(&thresholds) {
            checks.push(check("pd", p, th, s2, &stats, detection_prob(dof, s2, th)));
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(DetectionValidation {
        label: plan.label.clone(),
        dof,
        checks,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationCase {
    pub label: String,
    pub analytic: f64,
    pub empirical: f64,
    pub relative_error: f64,
    /// Standard error of the empirical mean, relative to the analytic value.
    pub standard_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationValidation {
    pub label: String,
    pub cases: Vec<EstimationCase>,
    /// Empirical MSEs rank the pilots the same way the analytic values do.
    pub ordering_consistent: bool,
    pub pass: bool,
}

/// Empirical `E||h - h_hat||^2` of the MMSE estimator against its analytic value,
/// with `h ~ CN(0, R_h)`. Passes within 2%.
pub fn estimation_trial(
    r_h: &CovarianceMatrix,
    pilot: &PilotMatrix,
    sigma_p2: f64,
    plan: &TrialPlan,
) -> Result<EstimationCase> {
    let report = mmse_filter(r_h, pilot, sigma_p2)?;
    let root = r_h.eig().sqrt_matrix();
    let n = r_h.dim();
    let l = pilot.len();
    let errors = (0..plan.n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = plan.rng(t);
            let h = &root * cscg_vector(&mut rng, n, 1.0);
            let y = pilot.block() * &h + cscg_vector(&mut rng, l, sigma_p2);
            let h_hat = estimate(&report, &y)?;
            Ok((h - h_hat).norm_squared())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = errors.len().max(1) as f64;
    let empirical = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - empirical).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let relative_error = (empirical - report.mse).abs() / report.mse;
    Ok(EstimationCase {
        label: plan.label.clone(),
        analytic: report.mse,
        empirical,
        relative_error,
        standard_error: (var / n).sqrt() / report.mse,
        pass: relative_error <= 0.02,
    })
}

/// Estimator check for zero, flat, water-filled and DFT pilots of length `len`
/// with energy `L P_ave`.
pub fn validate_estimation(sc: &Scenario, len: usize, plan: &TrialPlan) -> Result<EstimationValidation> {
    let n = sc.n_tx();
    let m = sc.modes(len);
    let total = len as f64 * sc.params.p_ave_w();
    let (wf, _) = mse_optimal_pilot(&sc.r_h, len, sc.noise, total)?;
    let flat = unified_pilot(sc.basis(), &PowerProfile::flat(m, total), len)?;
    let mut rng = plan.rng(FRAME_STREAM);
    let dft = benchmark_pilot(BenchmarkKind::Dft, sc.basis(), len, total, &mut rng);
    let pilots = [
        ("zero", PilotMatrix::zeros(len, n)),
        ("flat", flat),
        ("water-filled", wf),
        ("dft", dft),
    ];
    let mut cases = Vec::new();
    for (i, (label, pilot)) in pilots.iter().enumerate() {
        let sub = TrialPlan::new(plan.n_trials, plan.base_seed.wrapping_add(i as u64), *label);
        cases.push(estimation_trial(&sc.r_h, pilot, sc.noise, &sub)?);
    }
    let ordering_consistent = (0..cases.len()).all(|i| {
        (0..cases.len()).all(|j| {
            let a = cases[i].analytic < cases[j].analytic * 0.95;
            !a || cases[i].empirical < cases[j].empirical
        })
    });
    let pass = ordering_consistent && cases.iter().all(|c| c.pass);
    Ok(EstimationValidation {
        label: plan.label.clone(),
        cases,
        ordering_consistent,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRow {
    pub pfa: f64,
    pub threshold: f64,
    /// Pd when the target response has its mean energy.
    pub pd_mean_gain: f64,
    /// Pd averaged over Swerling-I target responses.
    pub pd_average: f64,
}

/// Detection table of a design's frame over a false-alarm grid.
pub fn detection_table(
    sc: &Scenario,
    design: &DesignSolution,
    pfa_grid: &[f64],
    plan: &TrialPlan,
) -> Result<Vec<DetectRow>> {
    let len = design.len;
    let pilot = unified_pilot(sc.basis(), &design.profile, len)?;
    let mut rng = plan.rng(FRAME_STREAM);
    let data = random_data_symbols(&mut rng, sc.t_c() - len);
    let x = stack_frame(&pilot, &design.beam, &data);
    let dof = design.dof;
    let s2_mean = sc.params.n_rx as f64 * sc.ratio * x.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let delta = sc.params.target_gain_w();
    let s2: Vec<f64> = (0..plan.n_trials.max(1) as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = plan.rng(t);
            let g = cscg_matrix(&mut rng, sc.n_tx(), sc.params.n_rx, delta);
            noncentrality(&x, &g, sc.noise)
        })
        .collect();
    pfa_grid
        .iter()
        .map(|&pfa| {
            let threshold = threshold_for_pfa(dof, pfa)?;
            let pd_average = s2.iter().map(|&v| detection_prob(dof, v, threshold)).sum::<f64>() / s2.len() as f64;
            Ok(DetectRow {
                pfa,
                threshold,
                pd_mean_gain: detection_prob(dof, s2_mean, threshold),
                pd_average,
            })
        })
        .collect()
}
