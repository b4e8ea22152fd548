//! Browser bindings: a detector ROC, a water-filling profile and an MSE-MI boundary.
//! Curves come back as flat `[x0, y0, x1, y1, ...]` arrays.

use isac_core::channel::SystemParams;
use isac_core::detection::{detection_prob, false_alarm};
use isac_core::experiments::{mse_mi_boundary, PowerMode};
use isac_core::optimizer::Scenario;
use isac_core::pilot::water_fill;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `(Pfa, Pd)` pairs over `n` thresholds for `dof` complex degrees of freedom
/// and noncentrality `s2`.
pub fn roc_points(dof: usize, s2: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let end = 4.0 * (dof as f64 + s2) + 40.0;
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        let g = end * k as f64 / (n - 1) as f64;
        out.push(false_alarm(dof, g));
        out.push(detection_prob(dof, s2, g));
    }
    out
}

#[wasm_bindgen]
pub fn roc_curve(dof: usize, s2: f64, n: usize) -> Result<Vec<f64>, JsError> {
    if dof == 0 || !(s2 >= 0.0) || !s2.is_finite() {
        return Err(js_err("need dof >= 1 and a finite s2 >= 0"));
    }
    Ok(roc_points(dof, s2, n))
}

/// Water-filled powers of the given channel eigenvalues (any order).
#[wasm_bindgen]
pub fn water_filling(eigenvalues: &[f64], sigma_p2: f64, budget: f64) -> Result<Vec<f64>, JsError> {
    let mut sorted = eigenvalues.to_vec();
    if sorted.iter().any(|v| !(*v >= 0.0)) {
        return Err(js_err("eigenvalues must be nonnegative"));
    }
    sorted.sort_by(|a, b| b.total_cmp(a));
    let p = water_fill(&sorted, sigma_p2, budget).map_err(js_err)?;
    let mut out = vec![0.0; eigenvalues.len()];
    // hand each power back to the eigenvalue it belongs to
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
    for (rank, &i) in order.iter().enumerate() {
        out[i] = p.powers[rank];
    }
    Ok(out)
}

pub fn boundary_points(
    n_tx: usize,
    len: usize,
    corr_coeff: f64,
    target_gain_dbm: f64,
    limited: bool,
    n_points: usize,
) -> Result<Vec<f64>, String> {
    let params = SystemParams {
        n_tx,
        corr_coeff,
        target_gain_dbm,
        t_coherence: (len + 1).max(SystemParams::default().t_coherence),
        ..SystemParams::default()
    };
    let sc = Scenario::from_params(&params).map_err(|e| e.to_string())?;
    let mode = if limited { PowerMode::Limited } else { PowerMode::Unlimited };
    let pts = mse_mi_boundary(&sc, mode, len, n_points).map_err(|e| e.to_string())?;
    Ok(pts.iter().flat_map(|p| [p.axis_x, p.axis_y]).collect())
}

/// `(MI bits, U_mse)` pairs along the boundary, MSE-optimal end first.
#[wasm_bindgen]
pub fn mse_mi_curve(
    n_tx: usize,
    len: usize,
    corr_coeff: f64,
    target_gain_dbm: f64,
    limited: bool,
    n_points: usize,
) -> Result<Vec<f64>, JsError> {
    boundary_points(n_tx, len, corr_coeff, target_gain_dbm, limited, n_points).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roc_runs_from_certain_alarm_to_silence() {
        let r = roc_points(4, 5.0, 50);
        assert_eq!(r.len(), 100);
        assert_eq!((r[0], r[1]), (1.0, 1.0));
        assert!(r[98] < 1e-9);
        // Pd dominates Pfa along the curve
        assert!(r.chunks(2).all(|p| p[1] >= p[0] - 1e-15));
    }

    #[test]
    fn water_filling_keeps_input_order() {
        let w = water_filling(&[0.5, 4.0, 2.0], 1.0, 3.0).unwrap();
        let sorted = water_fill(&[4.0, 2.0, 0.5], 1.0, 3.0).unwrap().powers;
        assert_eq!(w, vec![sorted[2], sorted[0], sorted[1]]);
    }

    #[test]
    fn boundary_has_requested_points() {
        let b = boundary_points(6, 3, 0.6, -90.0, false, 7).unwrap();
        assert_eq!(b.len(), 14);
        assert!(b[0] <= b[12] && b[1] >= b[13]);
        assert!(boundary_points(6, 0, 0.6, -90.0, false, 7).is_err());
    }
}
