//! Tail probabilities of the (non)central chi-squared family.
//!
//! Everything here is evaluated through log-domain recurrences so that large
//! orders and large arguments neither overflow nor lose the small tail.

use crate::error::{IsacError, Result};

/// `ln(exp(a) + exp(b))` without overflow.
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log of the Poisson(mean) mass at `k`, advanced by recurrence from `prev` at `k - 1`.
#[inline]
fn next_log_poisson(prev: f64, k: usize, ln_mean: f64) -> f64 {
    prev + ln_mean - (k as f64).ln()
}

/// `e^{-gamma} sum_{k<K} gamma^k / k!`, the upper tail of a unit-scale Gamma(K)
/// variable, i.e. the false-alarm probability of a detector whose statistic is a
/// sum of `K` unit-variance complex Gaussian energies.
pub fn chi2_tail(dof: usize, gamma: f64) -> f64 {
    assert!(dof >= 1, "chi2_tail needs at least one degree of freedom");
    assert!(gamma >= 0.0, "chi2_tail needs a nonnegative threshold");
    if gamma == 0.0 {
        return 1.0;
    }
    if gamma < dof as f64 {
        // the tail is above one half, so take the complement of the smaller side
        return (1.0 - log_poisson_upper(dof, gamma).exp()).clamp(0.0, 1.0);
    }
    log_chi2_tail(dof, gamma).exp().min(1.0)
}

fn log_chi2_tail(dof: usize, x: f64) -> f64 {
    let ln_x = x.ln();
    let mut term = -x;
    let mut acc = term;
    for k in 1..dof {
        term = next_log_poisson(term, k, ln_x);
        acc = log_add(acc, term);
    }
    acc.min(0.0)
}

/// Log of `P[Poisson(x) >= n]`, the lower regularized incomplete gamma `P(n, x)`.
fn log_poisson_upper(n: usize, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let ln_x = x.ln();
    // log of the mass at n
    let mut term = -x + n as f64 * ln_x - ln_factorial(n);
    let mut acc = term;
    let stop = (x + 12.0 * x.sqrt() + 40.0).max(n as f64);
    let mut j = n;
    loop {
        j += 1;
        term = next_log_poisson(term, j, ln_x);
        acc = log_add(acc, term);
        if j as f64 > stop && term < acc - 40.0 {
            break;
        }
    }
    acc.min(0.0)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Generalized Marcum Q function `Q_m(a, b)`.
///
/// Uses the Poisson mixture `Q_m(a,b) = sum_k Pois(k; a^2/2) Q(m+k, b^2/2)`, with
/// the gamma tails advanced by forward recurrence. The complementary mixture of
/// lower tails is summed as well and whichever side is below one half is used, so
/// values close to one keep their full relative precision in `1 - Q`.
pub fn marcum_q(order: usize, a: f64, b: f64) -> f64 {
    assert!(order >= 1, "Marcum Q order must be positive");
    assert!(a >= 0.0 && b >= 0.0, "Marcum Q arguments must be nonnegative");
    if b == 0.0 {
        return 1.0;
    }
    let lambda = 0.5 * a * a;
    let x = 0.5 * b * b;
    if lambda == 0.0 {
        return chi2_tail(order, x);
    }
    let ln_lambda = lambda.ln();
    let ln_x = x.ln();
    let k_max = (lambda + 12.0 * lambda.sqrt() + 40.0).ceil() as usize;

    // Poisson mixing weights, log domain.
    let mut log_w = Vec::with_capacity(k_max + 1);
    let mut lw = -lambda;
    log_w.push(lw);
    for k in 1..=k_max {
        lw = next_log_poisson(lw, k, ln_lambda);
        log_w.push(lw);
    }

    // Upper side: Q(m+k, x) grows with k, add the mass at m+k-1 each step.
    let mut log_q = log_chi2_tail(order, x);
    let mut mass = -x + (order - 1) as f64 * ln_x - ln_factorial(order - 1);
    let mut upper = f64::NEG_INFINITY;
    for (k, &w) in log_w.iter().enumerate() {
        if k > 0 {
            let n = order + k - 1;
            mass = next_log_poisson(mass, n, ln_x);
            log_q = log_add(log_q, mass).min(0.0);
        }
        upper = log_add(upper, w + log_q);
    }
    let upper = upper.exp();
    if upper <= 0.5 {
        return upper.clamp(0.0, 1.0);
    }

    // Lower side: P(m+k, x) shrinks with k, so build it downward from the top.
    let top = order + k_max;
    let mut log_p = log_poisson_upper(top, x);
    let mut mass = -x + top as f64 * ln_x - ln_factorial(top);
    let mut lower = log_w[k_max] + log_p;
    for k in (0..k_max).rev() {
        let n = order + k;
        // mass at n from mass at n+1
        mass = mass - ln_x + ((n + 1) as f64).ln();
        log_p = log_add(log_p, mass).min(0.0);
        lower = log_add(lower, log_w[k] + log_p);
    }
    (1.0 - lower.exp()).clamp(0.0, 1.0)
}

/// Threshold `gamma` with `chi2_tail(dof, gamma) == target`, by bisection after a
/// geometric search for the upper bracket.
pub fn invert_chi2_tail(dof: usize, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(IsacError::OutOfRange {
            name: "target probability",
            value: target,
            range: "(0, 1)",
        });
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while chi2_tail(dof, hi) > target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(IsacError::BracketFailure);
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_tail(dof, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint closer in value
    let e_lo = (chi2_tail(dof, lo) - target).abs();
    let e_hi = (chi2_tail(dof, hi) - target).abs();
    Ok(if e_lo < e_hi { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_tail_closed_forms() {
        for k in [1, 3, 17, 64] {
            assert_eq!(chi2_tail(k, 0.0), 1.0);
        }
        let g = (1e6_f64).ln();
        assert!((chi2_tail(1, g) - 1e-6).abs() < 1e-18);
        assert!((chi2_tail(2, 1.0) - 2.0 / std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn chi2_tail_no_overflow_for_large_arguments() {
        let v = chi2_tail(400, 900.0);
        assert!(v.is_finite() && v > 0.0 && v < 1e-40);
        let v = chi2_tail(400, 100.0);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi2_tail_strictly_decreasing() {
        for k in [1, 2, 8, 36] {
            let mut prev = 1.0;
            for i in 1..500 {
                let v = chi2_tail(k, i as f64 * 0.2);
                // saturation at 1 is the only allowed tie
                assert!(v < prev || v == 0.0 || v == 1.0, "K={k} at step {i}");
                prev = v;
            }
        }
    }

    #[test]
    fn invert_closed_forms() {
        let g = invert_chi2_tail(1, 1e-6).unwrap();
        assert!((g - (1e6_f64).ln()).abs() < 1e-12);
        let g = invert_chi2_tail(1, 0.5).unwrap();
        assert!((g - 2f64.ln()).abs() < 1e-14);
        let g = invert_chi2_tail(8, 1e-3).unwrap();
        assert!((chi2_tail(8, g) - 1e-3).abs() <= 1e-12 * 1e-3);
    }

    #[test]
    fn invert_rejects_degenerate_targets() {
        assert!(invert_chi2_tail(3, 0.0).is_err());
        assert!(invert_chi2_tail(3, 1.0).is_err());
    }

    #[test]
    fn invert_round_trip_all_orders() {
        for k in 1..=64 {
            for &p in &[1e-9, 1e-6, 1e-3, 0.1, 0.5, 0.9] {
                let g = invert_chi2_tail(k, p).unwrap();
                let back = chi2_tail(k, g);
                assert!(((back - p) / p).abs() < 1e-10, "K={k} p={p} back={back}");
            }
        }
    }

    #[test]
    fn marcum_edge_cases() {
        assert_eq!(marcum_q(3, 2.0, 0.0), 1.0);
        for b in [0.1_f64, 0.7, 2.0, 5.0] {
            let want = (-0.5 * b * b).exp();
            assert!((marcum_q(1, 0.0, b) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn marcum_zero_noncentrality_matches_false_alarm() {
        for k in [1, 4, 36] {
            for g in [0.5_f64, 3.0, 40.0] {
                let q = marcum_q(k, 0.0, (2.0 * g).sqrt());
                assert!((q - chi2_tail(k, g)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn marcum_tails_deep() {
        // both extremes of the detection range stay resolvable
        let small = marcum_q(4, 1.0, 12.0);
        assert!(small > 0.0 && small < 1e-9);
        let near_one = marcum_q(1, 8.0, 1.5);
        assert!(near_one < 1.0 && near_one > 1.0 - 1e-9);
    }

    #[test]
    fn marcum_monotone() {
        for m in [1, 2, 8] {
            let mut prev = 1.0;
            for i in 0..200 {
                let q = marcum_q(m, 2.0, i as f64 * 0.05);
                assert!(q <= prev + 1e-15);
                prev = q;
            }
            let mut prev = 0.0;
            for i in 0..200 {
                let q = marcum_q(m, i as f64 * 0.05, 3.0);
                assert!(q >= prev - 1e-15);
                prev = q;
            }
            assert!(marcum_q(m + 1, 2.0, 3.0) >= marcum_q(m, 2.0, 3.0));
        }
    }
}
