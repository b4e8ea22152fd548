//! Joint training length, pilot power and beamforming design. For each pilot
//! length a block coordinate ascent alternates beam and pilot-power updates,
//! and the best length is picked by enumeration.

pub mod barrier;
pub mod pilot_block;
pub mod reduction;
pub mod sca;

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, CovarianceMatrix, SystemParams};
use crate::detection::{detection_prob, nominal_dof, threshold_for_pfa};
use crate::error::{IsacError, Result};
use crate::estimation::{mmse_filter, rate_bound};
use crate::numerics::{ComplexMatrix, ComplexVector};
use crate::pilot::{active_modes, expected_mi, unified_pilot, PowerProfile};

pub use barrier::{barrier_solve, BarrierSettings, BarrierSolution, Constraint, ConvexSubproblem, Objective};
pub use pilot_block::pilot_power_subproblem;
pub use sca::{gain_lower_bound, power_lower_bound, sca_beamforming, BeamUpdate};

pub const MAX_SCA_ITERATIONS: usize = 50;
pub const MAX_BCD_ITERATIONS: usize = 200;
/// Slack allowed on the power budget and the rate floor when checking a design.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Relative objective gap below which the shorter pilot wins.
pub const TIE_TOL: f64 = 1e-12;

/// A design problem with all powers normalized by the common noise power.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: SystemParams,
    pub r_h: CovarianceMatrix,
    pub noise: f64,
    /// `delta_g^2 / sigma^2`.
    pub ratio: f64,
    /// Eigenvalues of `R_h / sigma^2`, descending.
    pub gains: Vec<f64>,
}

impl Scenario {
    pub fn from_params(params: &SystemParams) -> Result<Self> {
        let model = ChannelModel::new(params)?;
        Self::with_covariance(params, model.r_h)
    }

    pub fn with_covariance(params: &SystemParams, r_h: CovarianceMatrix) -> Result<Self> {
        params.validate()?;
        if r_h.dim() != params.n_tx {
            return Err(IsacError::DimensionMismatch(format!(
                "covariance is {}x{0}, N_t = {}",
                r_h.dim(),
                params.n_tx
            )));
        }
        if r_h.trace() <= 0.0 {
            return Err(IsacError::DegenerateCovariance);
        }
        let noise = params.noise_w();
        let gains = r_h.eig().values.iter().map(|v| v.max(0.0) / noise).collect();
        Ok(Self {
            params: params.clone(),
            r_h,
            noise,
            ratio: params.target_gain_w() / noise,
            gains,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.params.n_tx
    }

    pub fn t_c(&self) -> usize {
        self.params.t_coherence
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.r_h.eig().vectors
    }

    /// Frame energy `T_c P_ave`.
    pub fn budget(&self) -> f64 {
        self.t_c() as f64 * self.params.p_ave_w()
    }

    pub fn modes(&self, len: usize) -> usize {
        active_modes(self.n_tx(), len)
    }

    /// `2^(R_th T_c / (T_c - L))`.
    pub fn rate_factor(&self, len: usize) -> f64 {
        if self.params.rate_min == 0.0 {
            return 1.0;
        }
        let t = self.t_c() as f64;
        (self.params.rate_min * t / (t - len as f64)).exp2()
    }

    /// Pilot lengths worth searching; the full frame only carries no data.
    pub fn lengths(&self) -> Vec<usize> {
        let last = if self.params.rate_min == 0.0 { self.t_c() } else { self.t_c() - 1 };
        (1..=last).collect()
    }

    pub fn to_coords(&self, w: &ComplexVector) -> ComplexVector {
        self.basis().adjoint() * w
    }

    pub fn from_coords(&self, b: &ComplexVector) -> ComplexVector {
        self.basis() * b
    }

    /// Normalized error variance per mode after training with `powers`.
    pub fn error_gains(&self, powers: &[f64]) -> Vec<f64> {
        self.gains
            .iter()
            .enumerate()
            .map(|(i, &s)| match powers.get(i) {
                Some(&lam) => s / (1.0 + s * lam.max(0.0)),
                None => s,
            })
            .collect()
    }

    /// Achievable rate lower bound for a beam given in eigen-coordinates.
    pub fn rate(&self, len: usize, powers: &[f64], b: &ComplexVector) -> f64 {
        let t = self.t_c();
        if len >= t {
            return 0.0;
        }
        let e = self.error_gains(powers);
        let mut signal = 1.0;
        let mut residual = 1.0;
        for i in 0..self.n_tx() {
            let x = b[i].norm_sqr();
            signal += self.gains[i] * x;
            residual += e[i] * x;
        }
        (t - len) as f64 / t as f64 * (signal / residual).max(1.0).log2()
    }

    pub fn objective(&self, len: usize, powers: &[f64], p_t: f64) -> f64 {
        let n_r = self.params.n_rx as f64;
        let pilot: f64 = powers.iter().map(|p| (self.ratio * p.max(0.0)).ln_1p()).sum();
        let data = (self.t_c() - len) as f64 * (self.ratio * p_t.max(0.0)).ln_1p();
        n_r * (pilot + data) / LN_2
    }

    pub fn energy(&self, len: usize, powers: &[f64], b: &ComplexVector) -> f64 {
        powers.iter().sum::<f64>() + (self.t_c() - len) as f64 * b.norm_squared()
    }

    pub fn feasible(&self, len: usize, powers: &[f64], b: &ComplexVector) -> bool {
        let budget = self.budget();
        powers.iter().all(|&p| p >= 0.0)
            && self.energy(len, powers, b) <= budget + FEASIBILITY_TOL * budget.max(1.0)
            && self.rate(len, powers, b) >= self.params.rate_min - FEASIBILITY_TOL
    }

    /// Scales the beam so the frame energy is used exactly, when that keeps it feasible.
    pub fn fill_energy(&self, len: usize, powers: &[f64], b: &ComplexVector) -> ComplexVector {
        let data = (self.t_c() - len) as f64;
        let left = self.budget() - powers.iter().sum::<f64>();
        let norm = b.norm_squared();
        if data == 0.0 || left <= 0.0 || norm == 0.0 {
            return b.clone();
        }
        let scaled = b * Complex64::new((left / data / norm).sqrt(), 0.0);
        if self.feasible(len, powers, &scaled) {
            scaled
        } else {
            b.clone()
        }
    }

    /// Re-derives every constraint of a design through the dense estimator.
    pub fn check(&self, sol: &DesignSolution) -> Result<DesignCheck> {
        let len = sol.len;
        let pilot = unified_pilot(self.basis(), &sol.profile, len)?;
        let report = mmse_filter(&self.r_h, &pilot, self.noise)?;
        let rate = rate_bound(
            &sol.beam,
            self.r_h.matrix(),
            report.err_cov.matrix(),
            self.noise,
            len,
            self.t_c(),
        );
        let p_t = sol.beam.norm_squared();
        let energy = sol.profile.total() + (self.t_c() - len) as f64 * p_t;
        let objective = expected_mi(
            &pilot,
            p_t,
            self.t_c(),
            self.params.n_rx,
            self.params.target_gain_w(),
            self.noise,
        )?;
        let budget = self.budget();
        let energy_ok = energy <= budget + 1e-8;
        let rate_ok = rate >= self.params.rate_min - 1e-8;
        let p_t_ok = (p_t - sol.p_t).abs() <= 1e-9 * p_t.max(1.0);
        let nonneg = sol.profile.powers.iter().all(|&p| p >= 0.0);
        Ok(DesignCheck {
            energy,
            budget,
            rate,
            rate_min: self.params.rate_min,
            objective,
            passed: energy_ok && rate_ok && p_t_ok && nonneg,
        })
    }

    fn solution(
        &self,
        len: usize,
        powers: Vec<f64>,
        b: &ComplexVector,
        trace: Vec<f64>,
        iterations: usize,
        converged: bool,
    ) -> Result<DesignSolution> {
        let p_t = b.norm_squared();
        let objective = self.objective(len, &powers, p_t);
        let rate = self.rate(len, &powers, b);
        let feasible = self.feasible(len, &powers, b);
        let dof = nominal_dof(self.params.n_rx, len, self.n_tx());
        let threshold = threshold_for_pfa(dof, self.params.pfa_target)?;
        let energy = powers.iter().sum::<f64>() + (self.t_c() - len) as f64 * p_t;
        let s2 = self.params.n_rx as f64 * self.ratio * energy;
        let profile = PowerProfile {
            budget: powers.iter().sum(),
            powers,
            multiplier: None,
        };
        Ok(DesignSolution {
            len,
            profile,
            beam: self.from_coords(b),
            p_t,
            objective,
            rate,
            feasible,
            dof,
            threshold,
            pd_at_mean_gain: detection_prob(dof, s2, threshold),
            trace,
            iterations,
            converged,
        })
    }
}

/// Outcome of re-validating a design against the unreduced formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCheck {
    pub energy: f64,
    pub budget: f64,
    pub rate: f64,
    pub rate_min: f64,
    pub objective: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    #[serde(rename = "L")]
    pub len: usize,
    pub profile: PowerProfile,
    #[serde(with = "complex_vec")]
    pub beam: ComplexVector,
    pub p_t: f64,
    /// Expected MI in bits.
    pub objective: f64,
    /// bps/Hz.
    pub rate: f64,
    pub feasible: bool,
    pub dof: usize,
    pub threshold: f64,
    /// Detection probability when the target response has its mean energy.
    pub pd_at_mean_gain: f64,
    /// Objective after every accepted or rejected block update.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

mod complex_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{Complex64, ComplexVector};

    #[derive(Serialize, Deserialize)]
    struct Parts {
        re: Vec<f64>,
        im: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(v: &ComplexVector, s: S) -> Result<S::Ok, S::Error> {
        Parts {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexVector, D::Error> {
        let p = Parts::deserialize(d)?;
        if p.re.len() != p.im.len() {
            return Err(serde::de::Error::custom("re and im lengths differ"));
        }
        Ok(ComplexVector::from_iterator(
            p.re.len(),
            p.re.iter().zip(&p.im).map(|(&a, &b)| Complex64::new(a, b)),
        ))
    }
}

fn check_len(sc: &Scenario, len: usize) -> Result<()> {
    let t = sc.t_c();
    if len == 0 || len > t || (len == t && sc.params.rate_min > 0.0) {
        return Err(IsacError::OutOfRange {
            name: "L",
            value: len as f64,
            range: "[1, T_c - 1], or T_c without a rate floor",
        });
    }
    Ok(())
}

fn mode_vector(n: usize, mode: usize, power: f64) -> ComplexVector {
    let mut b = ComplexVector::zeros(n);
    b[mode] = Complex64::new(power.max(0.0).sqrt(), 0.0);
    b
}

/// Best single-mode beam at data power `p_t`, which maximizes the rate for that power.
fn best_mode_beam(sc: &Scenario, len: usize, powers: &[f64], p_t: f64) -> (ComplexVector, f64) {
    let mut best = (mode_vector(sc.n_tx(), 0, p_t), f64::NEG_INFINITY);
    for j in 0..sc.n_tx() {
        let b = mode_vector(sc.n_tx(), j, p_t);
        let r = sc.rate(len, powers, &b);
        if r > best.1 {
            best = (b, r);
        }
    }
    best
}

/// Highest-rate energy split found by scanning pilot fractions over flat and
/// single-mode pilot shapes, each with the whole remaining energy on the best mode.
fn best_split(sc: &Scenario, len: usize) -> (Vec<f64>, ComplexVector, f64) {
    let m = sc.modes(len);
    let budget = sc.budget();
    let data = (sc.t_c() - len) as f64;
    let rate_at = |powers: &[f64]| {
        let p_t = (budget - powers.iter().sum::<f64>()) / data;
        best_mode_beam(sc, len, powers, p_t)
    };
    let shapes = |f: f64| {
        let mut out = vec![vec![f * budget / m as f64; m]];
        for j in 0..m {
            let mut p = vec![0.0; m];
            p[j] = f * budget;
            out.push(p);
        }
        out
    };
    let mut best: Option<(usize, f64, f64)> = None;
    const STEPS: usize = 400;
    for k in 1..STEPS {
        let f = k as f64 / STEPS as f64;
        for (shape, p) in shapes(f).into_iter().enumerate() {
            let (_, r) = rate_at(&p);
            if best.is_none_or(|x| r > x.2) {
                best = Some((shape, f, r));
            }
        }
    }
    let (shape, f0, _) = best.expect("scan is nonempty");
    let eval = |f: f64| {
        let p = shapes(f).swap_remove(shape);
        let (b, r) = rate_at(&p);
        (p, b, r)
    };
    // golden-section refinement inside the neighbouring grid cells
    let step = 1.0 / STEPS as f64;
    let (mut lo, mut hi) = ((f0 - step).max(step * 1e-3), (f0 + step).min(1.0 - step * 1e-3));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let c = lo + g * (hi - lo);
        if eval(a).2 >= eval(c).2 {
            hi = c;
        } else {
            lo = a;
        }
    }
    let refined = eval(0.5 * (lo + hi));
    let grid = eval(f0);
    if refined.2 >= grid.2 {
        refined
    } else {
        grid
    }
}

/// Largest rate found at this pilot length with the whole frame energy.
pub fn peak_rate(sc: &Scenario, len: usize) -> f64 {
    if len == 0 || len >= sc.t_c() {
        return 0.0;
    }
    best_split(sc, len).2
}

/// A starting point that spends the whole frame energy and meets the rate floor.
/// Tries a flat half-budget pilot first, then scans pilot/data splits.
pub fn feasibility_restore(sc: &Scenario, len: usize) -> Result<(ComplexVector, PowerProfile)> {
    check_len(sc, len)?;
    let n = sc.n_tx();
    let m = sc.modes(len);
    let budget = sc.budget();
    let t = sc.t_c();
    if len == t {
        return Ok((ComplexVector::zeros(n), PowerProfile::flat(m, budget)));
    }
    let data = (t - len) as f64;
    let half = PowerProfile::flat(m, budget / 2.0);
    let b = mode_vector(n, 0, budget / 2.0 / data);
    if sc.rate(len, &half.powers, &b) >= sc.params.rate_min {
        return Ok((sc.from_coords(&b), half));
    }
    let (powers, b, r) = best_split(sc, len);
    if r >= sc.params.rate_min {
        return Ok((sc.from_coords(&b), PowerProfile::from_powers(powers)));
    }
    Err(IsacError::Infeasible(vec![(
        len,
        format!(
            "best restored rate {r:.6} bps/Hz below the floor {}",
            sc.params.rate_min
        ),
    )]))
}

/// Optimum without the rate floor: every pilot mode and data symbol gets the same
/// energy. Returned only when some beam at that power also meets the floor, in
/// which case it solves the constrained problem too.
fn relaxed_optimum(sc: &Scenario, len: usize) -> Option<(Vec<f64>, ComplexVector)> {
    let m = sc.modes(len);
    let data = (sc.t_c() - len) as f64;
    let each = sc.budget() / (m as f64 + data);
    let powers = vec![each; m];
    let (b, _) = best_mode_beam(sc, len, &powers, if data > 0.0 { each } else { 0.0 });
    sc.feasible(len, &powers, &b).then_some((powers, b))
}

fn accept(sc: &Scenario, len: usize, current: f64, powers: &[f64], b: &ComplexVector) -> Option<f64> {
    if !sc.feasible(len, powers, b) {
        return None;
    }
    let v = sc.objective(len, powers, b.norm_squared());
    (v >= current - 1e-12 * current.abs().max(1.0)).then_some(v)
}

/// Block coordinate ascent at a fixed pilot length.
pub fn bcd_fixed_len(sc: &Scenario, len: usize) -> Result<DesignSolution> {
    check_len(sc, len)?;
    let (mut powers, mut b) = match relaxed_optimum(sc, len) {
        Some(start) => start,
        None => {
            let (w0, prof0) = feasibility_restore(sc, len)?;
            let b0 = sc.to_coords(&w0);
            (prof0.powers.clone(), sc.fill_energy(len, &prof0.powers, &b0))
        }
    };
    let mut current = sc.objective(len, &powers, b.norm_squared());
    let mut trace = vec![current];
    if len == sc.t_c() {
        return sc.solution(len, powers, &b, trace, 0, true);
    }
    let eps = sc.params.epsilon;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..MAX_BCD_ITERATIONS {
        iterations += 1;
        let start = current;
        let profile = PowerProfile::from_powers(powers.clone());
        if let Ok(up) = sca_beamforming(sc, &profile, len, &sc.from_coords(&b)) {
            let nb = sc.to_coords(&up.beam);
            if let Some(v) = accept(sc, len, current, &powers, &nb) {
                b = nb;
                current = v;
            }
        }
        trace.push(current);
        if let Ok(prof) = pilot_power_subproblem(sc, &sc.from_coords(&b), len) {
            if let Some(v) = accept(sc, len, current, &prof.powers, &b) {
                powers = prof.powers;
                current = v;
            }
        }
        trace.push(current);
        if let Ok((np, nb)) = sca::joint_step(sc, len, &powers, &b) {
            if let Some(v) = accept(sc, len, current, &np, &nb) {
                powers = np;
                b = nb;
                current = v;
            }
        }
        trace.push(current);
        if (current - start) / start.abs().max(f64::MIN_POSITIVE) < eps {
            converged = true;
            break;
        }
    }
    sc.solution(len, powers, &b, trace, iterations, converged)
}

/// Per-length results in ascending `L`.
pub fn solve_table(sc: &Scenario) -> Vec<(usize, Result<DesignSolution>)> {
    sc.lengths()
        .into_par_iter()
        .map(|len| (len, bcd_fixed_len(sc, len)))
        .collect()
}

/// Best design over all pilot lengths; ties go to the shorter pilot.
pub fn solve(sc: &Scenario) -> Result<DesignSolution> {
    pick_best(solve_table(sc))
}

pub fn pick_best(table: Vec<(usize, Result<DesignSolution>)>) -> Result<DesignSolution> {
    let mut best: Option<DesignSolution> = None;
    let mut failures = Vec::new();
    let mut hard = None;
    for (len, r) in table {
        match r {
            Ok(sol) if sol.feasible => {
                if best.as_ref().is_none_or(|b| sol.objective > b.objective + TIE_TOL * b.objective.abs()) {
                    best = Some(sol);
                }
            }
            Ok(_) => failures.push((len, "no feasible design".to_string())),
            Err(IsacError::Infeasible(list)) => failures.extend(list),
            Err(e) => {
                failures.push((len, e.to_string()));
                hard.get_or_insert(e);
            }
        }
    }
    match (best, hard) {
        (Some(sol), _) => Ok(sol),
        (None, Some(e)) => Err(e),
        (None, None) => Err(IsacError::Infeasible(failures)),
    }
}
