use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{trial_rng, RegionPoint};
use crate::error::{IsacError, Result};
use crate::estimation::{nmse_utility, PilotMatrix};
use crate::optimizer::{barrier_solve, bcd_fixed_len, peak_rate, solve, BarrierSettings, Constraint,
    ConvexSubproblem, Objective, Scenario};
use crate::pilot::{benchmark_pilot, pilot_mi, profile_mi, unified_pilot, water_fill, BenchmarkKind, PowerProfile};

/// Pilot energy available to an MSE-MI sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerMode {
    /// `L P_ave`: energy grows with the pilot length.
    Unlimited,
    /// `T_c P_ave`: the whole frame's energy regardless of `L`.
    Limited,
}

impl PowerMode {
    pub fn total(self, sc: &Scenario, len: usize) -> f64 {
        let p = sc.params.p_ave_w();
        match self {
            PowerMode::Unlimited => len as f64 * p,
            PowerMode::Limited => sc.t_c() as f64 * p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotKind {
    /// Eigenbasis pilot with optimized unequal powers.
    Upa,
    Epa,
    Dft,
    Gaussian,
}

fn region_point(sc: &Scenario, len: usize, tau: f64, profile: PowerProfile) -> Result<RegionPoint> {
    let pilot = unified_pilot(sc.basis(), &profile, len)?;
    Ok(RegionPoint {
        sweep_param: tau,
        axis_x: profile_mi(&profile.powers, sc.params.n_rx, sc.ratio),
        axis_y: nmse_utility(&sc.r_h, &pilot, sc.noise)?.u_mse,
        len,
        p_t: 0.0,
        feasible: true,
        profile: Some(profile),
        design: None,
    })
}

/// Minimum-MSE powers over the eigenbasis subject to pilot MI `>= tau` and energy `total`.
pub fn mse_mi_point(sc: &Scenario, len: usize, total: f64, tau: f64) -> Result<PowerProfile> {
    let m = sc.modes(len);
    let n_r = sc.params.n_rx;
    let values = sc.r_h.eig().values.as_slice();
    let wf = water_fill(&values[..m], sc.noise, total)?;
    if profile_mi(&wf.powers, n_r, sc.ratio) >= tau {
        return Ok(wf);
    }
    let top = m as f64 * (1.0 + sc.ratio * total / m as f64).log2() * n_r as f64;
    // the flat split is the only profile at the maximum, and the set above `tau` is too thin to center in near it
    if tau >= top * (1.0 - 1e-11) {
        if tau > top * (1.0 + 1e-12) {
            return Err(IsacError::InfeasibleSubproblem(format!("MI target {tau} above the maximum {top}")));
        }
        return Ok(PowerProfile::flat(m, total));
    }
    let gains: Vec<f64> = sc.gains[..m].to_vec();
    let norm: f64 = sc.gains.iter().sum();
    let objective = Objective::Smooth(Box::new(move |x: &DVector<f64>| {
        let mut v = 0.0;
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            let s = gains[i];
            let d = 1.0 + s * x[i];
            if !(d > 0.0) {
                return None;
            }
            v += s / d / norm;
            g[i] = -s * s / (d * d) / norm;
            h[(i, i)] = 2.0 * s * s * s / (d * d * d) / norm;
        }
        Some((v, g, h))
    }));
    let ratio = sc.ratio;
    let scale = n_r as f64 / LN_2;
    let mi = Constraint::Smooth(Box::new(move |x: &DVector<f64>| {
        let mut v = tau;
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            let u = 1.0 + ratio * x[i];
            if !(u > 0.0) {
                return None;
            }
            v -= scale * u.ln();
            g[i] = -scale * ratio / u;
            h[(i, i)] = scale * ratio * ratio / (u * u);
        }
        Some((v, g, h))
    }));
    let mut constraints = vec![
        Constraint::Linear {
            a: DVector::from_element(m, 1.0),
            b: total,
        },
        mi,
    ];
    for i in 0..m {
        constraints.push(Constraint::lower_bound(i, m, 0.0));
    }
    let prob = ConvexSubproblem {
        dim: m,
        objective,
        constraints,
        start: DVector::from_element(m, total * (1.0 - 1e-9) / m as f64),
        settings: BarrierSettings::default(),
    };
    let sol = barrier_solve(&prob)?;
    let mut powers: Vec<f64> = sol.x.iter().map(|p| p.max(0.0)).collect();
    let sum: f64 = powers.iter().sum();
    powers.iter_mut().for_each(|p| *p *= total / sum);
    Ok(PowerProfile {
        powers,
        budget: total,
        multiplier: None,
    })
}

/// Epsilon-constraint sweep of the MSE-MI boundary at one pilot length, from the
/// MSE-optimal endpoint (`tau = 0`) to the MI-optimal endpoint.
pub fn mse_mi_boundary(sc: &Scenario, mode: PowerMode, len: usize, n_points: usize) -> Result<Vec<RegionPoint>> {
    if n_points < 2 {
        return Err(IsacError::OutOfRange {
            name: "n_points",
            value: n_points as f64,
            range: ">= 2",
        });
    }
    if len == 0 {
        return Err(IsacError::OutOfRange {
            name: "L",
            value: 0.0,
            range: ">= 1",
        });
    }
    let total = mode.total(sc, len);
    let m = sc.modes(len);
    let top = sc.params.n_rx as f64 * m as f64 * (1.0 + sc.ratio * total / m as f64).log2();
    (0..n_points)
        .into_par_iter()
        .map(|k| {
            let tau = top * k as f64 / (n_points - 1) as f64;
            let profile = if k == n_points - 1 {
                PowerProfile::flat(m, total)
            } else {
                mse_mi_point(sc, len, total, tau)?
            };
            region_point(sc, len, tau, profile)
        })
        .collect()
}

/// `n_points` rate floors from zero up to the highest rate any pilot length reaches.
pub fn rate_grid(sc: &Scenario, n_points: usize) -> Vec<f64> {
    let peak = (1..sc.t_c())
        .map(|len| peak_rate(sc, len))
        .fold(0.0, f64::max);
    (0..n_points)
        .map(|k| peak * k as f64 / (n_points.max(2) - 1) as f64)
        .collect()
}

fn with_floor(sc: &Scenario, rate_min: f64) -> Scenario {
    let mut s = sc.clone();
    s.params.rate_min = rate_min;
    s
}

fn rate_point(rate_min: f64, len: usize, r: Result<crate::optimizer::DesignSolution>) -> Result<RegionPoint> {
    match r {
        Ok(sol) if sol.feasible => Ok(RegionPoint {
            sweep_param: rate_min,
            axis_x: sol.objective,
            axis_y: sol.rate,
            len: sol.len,
            p_t: sol.p_t,
            feasible: true,
            profile: None,
            design: Some(Box::new(sol)),
        }),
        Ok(_) | Err(IsacError::Infeasible(_)) => Ok(RegionPoint {
            sweep_param: rate_min,
            axis_x: f64::NAN,
            axis_y: f64::NAN,
            len,
            p_t: f64::NAN,
            feasible: false,
            profile: None,
            design: None,
        }),
        Err(e) => Err(e),
    }
}

/// Best MI per rate floor over all pilot lengths.
pub fn rate_mi_boundary(sc: &Scenario, r_grid: &[f64]) -> Result<Vec<RegionPoint>> {
    r_grid
        .par_iter()
        .map(|&r| rate_point(r, 0, solve(&with_floor(sc, r))))
        .collect()
}

/// Best MI per rate floor at one pilot length.
pub fn rate_mi_boundary_at(sc: &Scenario, len: usize, r_grid: &[f64]) -> Result<Vec<RegionPoint>> {
    r_grid
        .par_iter()
        .map(|&r| rate_point(r, len, bcd_fixed_len(&with_floor(sc, r), len)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: PilotKind,
    /// Pilot-stage MI (bits); a mean over draws for random pilots.
    pub mi: f64,
    pub u_mse: f64,
    /// The kind's operating point repeated at every sweep level it reaches.
    pub points: Vec<RegionPoint>,
    /// Sweep levels this kind reaches.
    pub levels: usize,
    /// Levels where the optimized pilot's `U_mse` is at least this kind's.
    pub upa_dominates: usize,
    /// `U_mse` of the optimized pilot at exactly this kind's MI.
    pub upa_at_kind_mi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    #[serde(rename = "L")]
    pub len: usize,
    pub total_energy: f64,
    pub upa: Vec<RegionPoint>,
    pub kinds: Vec<KindSummary>,
}

fn pilot_metrics(sc: &Scenario, pilot: &PilotMatrix) -> Result<(f64, f64)> {
    Ok((
        pilot_mi(pilot, sc.params.n_rx, sc.ratio)?,
        nmse_utility(&sc.r_h, pilot, sc.noise)?.u_mse,
    ))
}

/// Optimized unequal-power pilots against reference pilots at the same energy
/// `L P_ave`. Random pilots are averaged over `draws` streams of `seed`.
pub fn benchmark_comparison(
    sc: &Scenario,
    kinds: &[PilotKind],
    len: usize,
    n_points: usize,
    draws: usize,
    seed: u64,
) -> Result<BenchmarkTable> {
    let mode = PowerMode::Unlimited;
    let total = mode.total(sc, len);
    let upa = mse_mi_boundary(sc, mode, len, n_points)?;
    let mut out = Vec::new();
    for &kind in kinds {
        let (mi, u_mse) = match kind {
            PilotKind::Upa => continue,
            PilotKind::Epa | PilotKind::Dft => {
                let bk = if kind == PilotKind::Epa { BenchmarkKind::Epa } else { BenchmarkKind::Dft };
                let mut rng = trial_rng(seed, 0);
                pilot_metrics(sc, &benchmark_pilot(bk, sc.basis(), len, total, &mut rng))?
            }
            PilotKind::Gaussian => {
                let draws = draws.max(1);
                let acc = (0..draws)
                    .into_par_iter()
                    .map(|t| {
                        let mut rng = trial_rng(seed, t as u64);
                        let p = benchmark_pilot(BenchmarkKind::Gaussian, sc.basis(), len, total, &mut rng);
                        pilot_metrics(sc, &p)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let n = draws as f64;
                (
                    acc.iter().map(|a| a.0).sum::<f64>() / n,
                    acc.iter().map(|a| a.1).sum::<f64>() / n,
                )
            }
        };
        let mut points = Vec::new();
        let mut dominated = 0;
        for p in &upa {
            if p.sweep_param <= mi * (1.0 + 1e-12) {
                points.push(RegionPoint {
                    sweep_param: p.sweep_param,
                    axis_x: mi,
                    axis_y: u_mse,
                    len,
                    p_t: 0.0,
                    feasible: true,
                    profile: None,
                    design: None,
                });
                if p.axis_y >= u_mse * (1.0 - 1e-9) {
                    dominated += 1;
                }
            }
        }
        let at = mse_mi_point(sc, len, total, mi.min(upa.last().map_or(mi, |p| p.sweep_param)))?;
        let upa_at_kind_mi = region_point(sc, len, mi, at)?.axis_y;
        out.push(KindSummary {
            kind,
            mi,
            u_mse,
            levels: points.len(),
            points,
            upa_dominates: dominated,
            upa_at_kind_mi,
        });
    }
    Ok(BenchmarkTable {
        len,
        total_energy: total,
        upa,
        kinds: out,
    })
}
