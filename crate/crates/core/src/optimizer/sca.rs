//! Successive convex approximation for the beamforming block, and a joint
//! beam/pilot-power step built from the same linearizations.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::barrier::{barrier_solve, BarrierSettings, Constraint, ConvexSubproblem, Objective, SmoothFn};
use super::{check_len, Scenario, MAX_SCA_ITERATIONS};
use crate::error::{IsacError, Result};
use crate::numerics::{quad_form, ComplexMatrix, ComplexVector};
use crate::pilot::PowerProfile;

/// `-||w_r||^2 + 2 Re(w_r^H w)`, tight at `w = w_r`.
pub fn power_lower_bound(w_r: &ComplexVector, w: &ComplexVector) -> f64 {
    -w_r.norm_squared() + 2.0 * w_r.dotc(w).re
}

/// `-w_r^H R w_r + 2 Re(w_r^H R w)`, tight at `w = w_r`.
pub fn gain_lower_bound(r: &ComplexMatrix, w_r: &ComplexVector, w: &ComplexVector) -> f64 {
    -quad_form(r, w_r) + 2.0 * w_r.dotc(&(r * w)).re
}

#[derive(Debug, Clone)]
pub struct BeamUpdate {
    pub beam: ComplexVector,
    pub p_t: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn split(b: &ComplexVector) -> (DVector<f64>, DVector<f64>) {
    (b.map(|z| z.re), b.map(|z| z.im))
}

fn join(x: &DVector<f64>, n: usize) -> ComplexVector {
    ComplexVector::from_fn(n, |i, _| Complex64::new(x[i], x[n + i]))
}

/// `P_t <= g_lb(b)` written as `P_t + ||b_r||^2 - 2 b_r . b <= 0`.
fn power_cut(n: usize, dim: usize, pt: usize, b_r: &ComplexVector) -> Constraint {
    let (re, im) = split(b_r);
    let mut a = DVector::zeros(dim);
    a[pt] = 1.0;
    for i in 0..n {
        a[i] = -2.0 * re[i];
        a[n + i] = -2.0 * im[i];
    }
    Constraint::Linear {
        a,
        b: -b_r.norm_squared(),
    }
}

/// `gamma (sum e_i |b_i|^2 + 1) - 1 <= f_lb(b)` for fixed error gains.
fn rate_cut_fixed(sc: &Scenario, len: usize, powers: &[f64], dim: usize, b_r: &ComplexVector) -> Constraint {
    let n = sc.n_tx();
    let gamma = sc.rate_factor(len);
    let e = sc.error_gains(powers);
    let mut p = DMatrix::zeros(dim, dim);
    let mut q = DVector::zeros(dim);
    let mut anchor = 0.0;
    for i in 0..n {
        p[(i, i)] = gamma * e[i];
        p[(n + i, n + i)] = gamma * e[i];
        q[i] = -2.0 * sc.gains[i] * b_r[i].re;
        q[n + i] = -2.0 * sc.gains[i] * b_r[i].im;
        anchor += sc.gains[i] * b_r[i].norm_sqr();
    }
    Constraint::Quadratic {
        p,
        q,
        r: gamma - 1.0 + anchor,
    }
}

fn energy_cap(data: f64, n: usize, dim: usize, pilot_idx: Option<(usize, usize)>, cap: f64) -> Constraint {
    let mut p = DMatrix::zeros(dim, dim);
    for i in 0..2 * n {
        p[(i, i)] = data;
    }
    let mut q = DVector::zeros(dim);
    if let Some((start, m)) = pilot_idx {
        for k in 0..m {
            q[start + k] = 1.0;
        }
    }
    Constraint::Quadratic { p, q, r: -cap }
}

/// `-N_r (sum_i log2(1 + d lam_i) + data log2(1 + d P_t))` over the given indices.
fn mi_objective(n_r: f64, ratio: f64, data: f64, lam: Vec<usize>, pt: usize, dim: usize) -> SmoothFn {
    let scale = n_r / LN_2;
    Box::new(move |x: &DVector<f64>| {
        let mut v = 0.0;
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        let mut term = |idx: usize, weight: f64| -> Option<()> {
            let u = 1.0 + ratio * x[idx];
            if !(u > 0.0) {
                return None;
            }
            v -= scale * weight * u.ln();
            g[idx] -= scale * weight * ratio / u;
            h[(idx, idx)] += scale * weight * ratio * ratio / (u * u);
            Some(())
        };
        for &k in &lam {
            term(k, 1.0)?;
        }
        term(pt, data)?;
        Some((v, g, h))
    })
}

fn settings() -> BarrierSettings {
    BarrierSettings::default()
}

/// Beamforming block at fixed pilot powers, one convex surrogate per iteration.
pub fn sca_beamforming(
    sc: &Scenario,
    profile: &PowerProfile,
    len: usize,
    w_init: &ComplexVector,
) -> Result<BeamUpdate> {
    check_len(sc, len)?;
    if len == sc.t_c() {
        return Err(IsacError::OutOfRange {
            name: "L",
            value: len as f64,
            range: "[1, T_c - 1] for a data stage",
        });
    }
    let n = sc.n_tx();
    let powers = &profile.powers;
    if powers.len() != sc.modes(len) || w_init.len() != n {
        return Err(IsacError::DimensionMismatch("profile or beam length".into()));
    }
    let mut b = sc.to_coords(w_init);
    if !sc.feasible(len, powers, &b) {
        return Err(IsacError::InfeasibleSubproblem(
            "initial beam violates the rate or power constraint".into(),
        ));
    }
    let data = (sc.t_c() - len) as f64;
    let cap = sc.budget() - powers.iter().sum::<f64>();
    let dim = 2 * n + 1;
    let pt = 2 * n;
    let mut current = sc.objective(len, powers, b.norm_squared());
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_SCA_ITERATIONS {
        iterations += 1;
        let mut constraints = vec![
            power_cut(n, dim, pt, &b),
            energy_cap(data, n, dim, None, cap),
            Constraint::lower_bound(pt, dim, 0.0),
        ];
        if sc.params.rate_min > 0.0 {
            constraints.push(rate_cut_fixed(sc, len, powers, dim, &b));
        }
        let (re, im) = split(&b);
        let mut start = DVector::zeros(dim);
        start.rows_mut(0, n).copy_from(&re);
        start.rows_mut(n, n).copy_from(&im);
        start[pt] = 0.5 * b.norm_squared();
        let prob = ConvexSubproblem {
            dim,
            objective: Objective::Smooth(mi_objective(
                sc.params.n_rx as f64,
                sc.ratio,
                data,
                vec![],
                pt,
                dim,
            )),
            constraints,
            start,
            settings: settings(),
        };
        let sol = match barrier_solve(&prob) {
            Ok(s) => s,
            Err(_) => break,
        };
        let cand = sc.fill_energy(len, powers, &join(&sol.x, n));
        if !sc.feasible(len, powers, &cand) {
            break;
        }
        let v = sc.objective(len, powers, cand.norm_squared());
        if v < current - 1e-12 * current.abs().max(1.0) {
            break;
        }
        let gain = (v - current) / current.abs().max(f64::MIN_POSITIVE);
        b = cand;
        current = v;
        if gain < sc.params.epsilon {
            converged = true;
            break;
        }
    }
    let beam = sc.from_coords(&b);
    Ok(BeamUpdate {
        p_t: beam.norm_squared(),
        beam,
        iterations,
        converged,
    })
}

/// Rate surrogate with the pilot powers as variables:
/// `gamma (sum |b_i|^2 / (1/s_i + lam_i) + sum_{i >= m} s_i |b_i|^2 + 1) - 1 - f_lb(b) <= 0`.
fn rate_cut_joint(sc: &Scenario, len: usize, dim: usize, b_r: &ComplexVector) -> SmoothFn {
    let n = sc.n_tx();
    let m = sc.modes(len);
    let gamma = sc.rate_factor(len);
    let gains = sc.gains.clone();
    let (re_r, im_r) = split(b_r);
    let anchor: f64 = (0..n).map(|i| gains[i] * b_r[i].norm_sqr()).sum();
    Box::new(move |x: &DVector<f64>| {
        let mut v = gamma - 1.0 + anchor;
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..n {
            let (u, w) = (x[i], x[n + i]);
            let s = gains[i];
            v -= 2.0 * s * (re_r[i] * u + im_r[i] * w);
            g[i] -= 2.0 * s * re_r[i];
            g[n + i] -= 2.0 * s * im_r[i];
            if s <= 0.0 {
                continue;
            }
            if i < m {
                let k = 2 * n + i;
                let den = 1.0 / s + x[k];
                if !(den > 0.0) {
                    return None;
                }
                let q = u * u + w * w;
                v += gamma * q / den;
                g[i] += gamma * 2.0 * u / den;
                g[n + i] += gamma * 2.0 * w / den;
                g[k] -= gamma * q / (den * den);
                h[(i, i)] += gamma * 2.0 / den;
                h[(n + i, n + i)] += gamma * 2.0 / den;
                let cu = -gamma * 2.0 * u / (den * den);
                let cw = -gamma * 2.0 * w / (den * den);
                h[(i, k)] += cu;
                h[(k, i)] += cu;
                h[(n + i, k)] += cw;
                h[(k, n + i)] += cw;
                h[(k, k)] += gamma * 2.0 * q / (den * den * den);
            } else {
                v += gamma * s * (u * u + w * w);
                g[i] += gamma * 2.0 * s * u;
                g[n + i] += gamma * 2.0 * s * w;
                h[(i, i)] += gamma * 2.0 * s;
                h[(n + i, n + i)] += gamma * 2.0 * s;
            }
        }
        Some((v, g, h))
    })
}

/// One surrogate solve over beam and pilot powers together. Alternating blocks
/// cannot move energy between the pilot and data stages once the budget binds;
/// this step can.
pub fn joint_step(
    sc: &Scenario,
    len: usize,
    powers: &[f64],
    b: &ComplexVector,
) -> Result<(Vec<f64>, ComplexVector)> {
    let n = sc.n_tx();
    let m = sc.modes(len);
    let data = (sc.t_c() - len) as f64;
    if sc.params.rate_min == 0.0 {
        let each = sc.budget() / (m as f64 + data);
        let mut nb = ComplexVector::zeros(n);
        nb[0] = Complex64::new(each.sqrt(), 0.0);
        return Ok((vec![each; m], nb));
    }
    let dim = 2 * n + m + 1;
    let pt = dim - 1;
    let lam: Vec<usize> = (2 * n..2 * n + m).collect();
    let mut constraints = vec![
        power_cut(n, dim, pt, b),
        energy_cap(data, n, dim, Some((2 * n, m)), sc.budget()),
        Constraint::Smooth(rate_cut_joint(sc, len, dim, b)),
        Constraint::lower_bound(pt, dim, 0.0),
    ];
    for &k in &lam {
        constraints.push(Constraint::lower_bound(k, dim, 0.0));
    }
    let (re, im) = split(b);
    let mut start = DVector::zeros(dim);
    start.rows_mut(0, n).copy_from(&re);
    start.rows_mut(n, n).copy_from(&im);
    for (k, &p) in powers.iter().enumerate() {
        start[2 * n + k] = p;
    }
    start[pt] = 0.5 * b.norm_squared();
    let prob = ConvexSubproblem {
        dim,
        objective: Objective::Smooth(mi_objective(
            sc.params.n_rx as f64,
            sc.ratio,
            data,
            lam.clone(),
            pt,
            dim,
        )),
        constraints,
        start,
        settings: settings(),
    };
    let sol = barrier_solve(&prob)?;
    let np: Vec<f64> = lam.iter().map(|&k| sol.x[k].max(0.0)).collect();
    let nb = sc.fill_energy(len, &np, &join(&sol.x, n));
    Ok((np, nb))
}
