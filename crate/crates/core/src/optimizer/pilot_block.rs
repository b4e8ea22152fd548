//! Pilot-power block: maximize the pilot-stage MI for a fixed beam subject to the
//! remaining energy and the reduced estimation-error constraint.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use super::barrier::{barrier_solve, BarrierSettings, Constraint, ConvexSubproblem, Objective};
use super::{check_len, Scenario};
use crate::error::{IsacError, Result};
use crate::numerics::ComplexVector;
use crate::pilot::PowerProfile;

/// Largest normalized error form the beam can tolerate and still meet the rate floor,
/// net of the modes the pilot does not excite.
pub fn error_allowance(sc: &Scenario, len: usize, b: &ComplexVector) -> f64 {
    let m = sc.modes(len);
    let signal: f64 = (0..sc.n_tx()).map(|i| sc.gains[i] * b[i].norm_sqr()).sum();
    let unexcited: f64 = (m..sc.n_tx()).map(|i| sc.gains[i] * b[i].norm_sqr()).sum();
    (signal + 1.0) / sc.rate_factor(len) - 1.0 - unexcited
}

pub fn pilot_power_subproblem(sc: &Scenario, w: &ComplexVector, len: usize) -> Result<PowerProfile> {
    check_len(sc, len)?;
    if w.len() != sc.n_tx() {
        return Err(IsacError::DimensionMismatch("beam length".into()));
    }
    let m = sc.modes(len);
    let b = sc.to_coords(w);
    let left = sc.budget() - (sc.t_c() - len) as f64 * w.norm_squared();
    if !(left > 0.0) {
        return Err(IsacError::InfeasibleSubproblem("no energy left for the pilot".into()));
    }
    let finish = |mut powers: Vec<f64>| {
        powers.iter_mut().for_each(|p| *p = p.max(0.0));
        let total: f64 = powers.iter().sum();
        // the objective grows in every power and the error shrinks, so the budget binds
        if total > 0.0 {
            powers.iter_mut().for_each(|p| *p *= left / total);
        }
        PowerProfile {
            powers,
            budget: left,
            multiplier: None,
        }
    };
    if sc.params.rate_min == 0.0 {
        return Ok(PowerProfile::flat(m, left));
    }
    let eta = error_allowance(sc, len, &b);
    if !(eta > 0.0) {
        return Err(IsacError::InfeasibleSubproblem(format!(
            "beam leaves no room for estimation error (allowance {eta:.3e})"
        )));
    }
    let terms: Vec<(usize, f64, f64)> = (0..m)
        .filter(|&i| sc.gains[i] > 0.0 && b[i].norm_sqr() > 0.0)
        .map(|i| (i, b[i].norm_sqr(), 1.0 / sc.gains[i]))
        .collect();
    if terms.is_empty() {
        return Ok(PowerProfile::flat(m, left));
    }
    let ratio = sc.ratio;
    let scale = sc.params.n_rx as f64 / LN_2;
    let objective = Objective::Smooth(Box::new(move |x: &DVector<f64>| {
        let mut v = 0.0;
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
            b: left,
        },
        Constraint::Fractional { terms, offset: -eta },
    ];
    for i in 0..m {
        constraints.push(Constraint::lower_bound(i, m, 0.0));
    }
    let prob = ConvexSubproblem {
        dim: m,
        objective,
        constraints,
        start: DVector::from_element(m, 0.999 * left / m as f64),
        settings: BarrierSettings::default(),
    };
    let sol = barrier_solve(&prob)?;
    Ok(finish(sol.x.iter().copied().collect()))
}
