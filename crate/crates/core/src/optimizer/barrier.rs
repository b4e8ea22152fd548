//! Small dense log-barrier interior-point solver for smooth convex programs
//! `min f0(x) s.t. f_i(x) <= 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{IsacError, Result};

/// Value, gradient and Hessian at a point, or `None` outside the function's domain.
pub type SmoothFn = Box<dyn Fn(&DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> + Send + Sync>;

pub enum Objective {
    /// `c^T x`.
    Linear(DVector<f64>),
    Smooth(SmoothFn),
}

/// One convex inequality `f(x) <= 0`.
pub enum Constraint {
    /// `a^T x - b`.
    Linear { a: DVector<f64>, b: f64 },
    /// `x^T P x + q^T x + r` with `P` symmetric PSD.
    Quadratic {
        p: DMatrix<f64>,
        q: DVector<f64>,
        r: f64,
    },
    /// `sum_k c_k / (d_k + x[idx_k]) + offset` with `c_k >= 0`.
    Fractional {
        terms: Vec<(usize, f64, f64)>,
        offset: f64,
    },
    Smooth(SmoothFn),
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: Option<DMatrix<f64>>,
}

impl Constraint {
    pub fn upper_bound(index: usize, dim: usize, bound: f64) -> Self {
        let mut a = DVector::zeros(dim);
        a[index] = 1.0;
        Constraint::Linear { a, b: bound }
    }

    pub fn lower_bound(index: usize, dim: usize, bound: f64) -> Self {
        let mut a = DVector::zeros(dim);
        a[index] = -1.0;
        Constraint::Linear { a, b: -bound }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Constraint::Linear { a, b } => a.dot(x) - b,
            Constraint::Quadratic { p, q, r } => (p * x).dot(x) + q.dot(x) + r,
            Constraint::Fractional { terms, offset } => {
                let mut v = *offset;
                for &(k, c, d) in terms {
                    let den = d + x[k];
                    if den <= 0.0 {
                        return f64::INFINITY;
                    }
                    v += c / den;
                }
                v
            }
            Constraint::Smooth(f) => f(x).map(|(v, _, _)| v).unwrap_or(f64::INFINITY),
        }
    }

    fn eval(&self, x: &DVector<f64>) -> Option<Eval> {
        let n = x.len();
        match self {
            Constraint::Linear { a, b } => Some(Eval {
                value: a.dot(x) - b,
                grad: a.clone(),
                hess: None,
            }),
            Constraint::Quadratic { p, q, r } => {
                let px = p * x;
                Some(Eval {
                    value: px.dot(x) + q.dot(x) + r,
                    grad: px * 2.0 + q,
                    hess: Some(p * 2.0),
                })
            }
            Constraint::Fractional { terms, offset } => {
                let mut value = *offset;
                let mut grad = DVector::zeros(n);
                let mut hess = DMatrix::zeros(n, n);
                for &(k, c, d) in terms {
                    let den = d + x[k];
                    if den <= 0.0 {
                        return None;
                    }
                    value += c / den;
                    grad[k] -= c / (den * den);
                    hess[(k, k)] += 2.0 * c / (den * den * den);
                }
                Some(Eval {
                    value,
                    grad,
                    hess: Some(hess),
                })
            }
            Constraint::Smooth(f) => f(x).map(|(value, grad, hess)| Eval {
                value,
                grad,
                hess: Some(hess),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierSettings {
    pub t0: f64,
    pub mu: f64,
    pub gap_tol: f64,
    pub max_newton: usize,
    pub center_tol: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            gap_tol: 1e-9,
            max_newton: 500,
            center_tol: 1e-12,
        }
    }
}

pub struct ConvexSubproblem {
    pub dim: usize,
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
    /// Initial point; need not be strictly feasible.
    pub start: DVector<f64>,
    pub settings: BarrierSettings,
}

#[derive(Debug, Clone)]
pub struct BarrierSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub duality_gap: f64,
    /// `||grad f0 + sum lambda_i grad f_i||_inf` at the returned point.
    pub kkt_residual: f64,
    pub multipliers: Vec<f64>,
    pub newton_steps: usize,
}

trait Oracle {
    fn dim(&self) -> usize;
    fn n_cons(&self) -> usize;
    fn objective(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, Option<DMatrix<f64>>)>;
    fn constraint(&self, i: usize, x: &DVector<f64>) -> Option<Eval>;
    fn constraint_value(&self, i: usize, x: &DVector<f64>) -> f64;
    /// Allows phase I to stop as soon as a strictly feasible point is reached.
    fn done_early(&self, _x: &DVector<f64>) -> bool {
        false
    }
}

fn objective_eval(
    obj: &Objective,
    x: &DVector<f64>,
) -> Option<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
    match obj {
        Objective::Linear(c) => Some((c.dot(x), c.clone(), None)),
        Objective::Smooth(f) => f(x).map(|(v, g, h)| (v, g, Some(h))),
    }
}

impl Oracle for ConvexSubproblem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn n_cons(&self) -> usize {
        self.constraints.len()
    }
    fn objective(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
        objective_eval(&self.objective, x)
    }
    fn constraint(&self, i: usize, x: &DVector<f64>) -> Option<Eval> {
        self.constraints[i].eval(x)
    }
    fn constraint_value(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.constraints[i].value(x)
    }
}

/// `min s s.t. f_i(x) <= s, s >= floor`, over `(x, s)`.
struct PhaseOne<'a> {
    inner: &'a ConvexSubproblem,
    floor: f64,
}

impl Oracle for PhaseOne<'_> {
    fn dim(&self) -> usize {
        self.inner.dim + 1
    }
    fn n_cons(&self) -> usize {
        self.inner.constraints.len() + 1
    }
    fn objective(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
        let n = self.inner.dim;
        let mut g = DVector::zeros(n + 1);
        g[n] = 1.0;
        Some((x[n], g, None))
    }
    fn constraint(&self, i: usize, x: &DVector<f64>) -> Option<Eval> {
        let n = self.inner.dim;
        if i == self.inner.constraints.len() {
            let mut grad = DVector::zeros(n + 1);
            grad[n] = -1.0;
            return Some(Eval {
                value: self.floor - x[n],
                grad,
                hess: None,
            });
        }
        let xs = x.rows(0, n).into_owned();
        let e = self.inner.constraints[i].eval(&xs)?;
        let mut grad = DVector::zeros(n + 1);
        grad.rows_mut(0, n).copy_from(&e.grad);
        grad[n] = -1.0;
        let hess = e.hess.map(|h| {
            let mut big = DMatrix::zeros(n + 1, n + 1);
            big.view_mut((0, 0), (n, n)).copy_from(&h);
            big
        });
        Some(Eval {
            value: e.value - x[n],
            grad,
            hess,
        })
    }
    fn constraint_value(&self, i: usize, x: &DVector<f64>) -> f64 {
        let n = self.inner.dim;
        if i == self.inner.constraints.len() {
            return self.floor - x[n];
        }
        self.inner.constraints[i].value(&x.rows(0, n).into_owned()) - x[n]
    }
    fn done_early(&self, x: &DVector<f64>) -> bool {
        let xs = x.rows(0, self.inner.dim).into_owned();
        self.inner.constraints.iter().all(|c| c.value(&xs) < 0.0)
    }
}

struct PathResult {
    x: DVector<f64>,
    t: f64,
    steps: usize,
    early: bool,
}

fn barrier_value(o: &dyn Oracle, x: &DVector<f64>, t: f64) -> f64 {
    let Some((f0, _, _)) = o.objective(x) else {
        return f64::INFINITY;
    };
    let mut psi = t * f0;
    for i in 0..o.n_cons() {
        let v = o.constraint_value(i, x);
        if !(v < 0.0) {
            return f64::INFINITY;
        }
        psi -= (-v).ln();
    }
    if psi.is_finite() {
        psi
    } else {
        f64::INFINITY
    }
}

fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    let scale = h.diagonal().iter().map(|v| v.abs()).fold(1e-300, f64::max);
    let mut reg = 1e-14 * scale;
    for _ in 0..12 {
        let shifted = h + DMatrix::identity(h.nrows(), h.ncols()) * reg;
        if let Some(ch) = shifted.cholesky() {
            return Some(ch.solve(rhs));
        }
        reg *= 10.0;
    }
    None
}

fn follow_path(
    o: &dyn Oracle,
    mut x: DVector<f64>,
    settings: &BarrierSettings,
    steps_used: usize,
) -> Result<PathResult> {
    let n = o.dim();
    let m = o.n_cons();
    let mut t = settings.t0;
    let mut steps = steps_used;
    loop {
        // centering
        loop {
            if o.done_early(&x) {
                return Ok(PathResult {
                    x,
                    t,
                    steps,
                    early: true,
                });
            }
            let (_, g0, h0) = o
                .objective(&x)
                .ok_or_else(|| IsacError::NumericalFailure("objective left its domain".into()))?;
            let mut grad = g0 * t;
            let mut hess = match h0 {
                Some(h) => h * t,
                None => DMatrix::zeros(n, n),
            };
            for i in 0..m {
                let e = o
                    .constraint(i, &x)
                    .ok_or_else(|| IsacError::NumericalFailure("constraint left its domain".into()))?;
                let neg = -e.value;
                if !(neg > 0.0) {
                    return Err(IsacError::NumericalFailure("iterate lost strict feasibility".into()));
                }
                grad.axpy(1.0 / neg, &e.grad, 1.0);
                hess.ger(1.0 / (neg * neg), &e.grad, &e.grad, 1.0);
                if let Some(h) = e.hess {
                    hess += h / neg;
                }
            }
            let dx = solve_spd(&hess, &(-&grad))
                .ok_or_else(|| IsacError::NumericalFailure("barrier Hessian is not positive definite".into()))?;
            let decrement = -grad.dot(&dx);
            if !(decrement.is_finite()) {
                return Err(IsacError::NumericalFailure("Newton decrement is not finite".into()));
            }
            if decrement * 0.5 <= settings.center_tol {
                break;
            }
            let psi = barrier_value(o, &x, t);
            let mut s = 1.0;
            let mut accepted = None;
            let mut stalled = false;
            while s > 1e-14 {
                let trial = &x + &dx * s;
                let v = barrier_value(o, &trial, t);
                let slack = 1e-13 * psi.abs().max(1.0);
                let target = psi - 0.25 * s * decrement;
                if v.is_finite() && v <= target + slack {
                    stalled = v > target || trial == x;
                    accepted = Some(trial);
                    break;
                }
                s *= 0.5;
            }
            steps += 1;
            if steps > settings.max_newton {
                return Err(IsacError::MaxIterations(settings.max_newton));
            }
            match accepted {
                Some(next) => {
                    x = next;
                    if stalled {
                        break;
                    }
                }
                // no further progress representable at this t
                None => break,
            }
        }
        if m as f64 / t <= settings.gap_tol || m == 0 {
            return Ok(PathResult {
                x,
                t,
                steps,
                early: false,
            });
        }
        t *= settings.mu;
    }
}

fn max_violation(p: &ConvexSubproblem, x: &DVector<f64>) -> f64 {
    p.constraints
        .iter()
        .map(|c| c.value(x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Least-squares multipliers on the constraints the barrier estimates as active.
/// Slacks near a bound lose relative accuracy, so this recovers a cleaner certificate.
fn refine_multipliers(
    g0: &DVector<f64>,
    grads: &[DVector<f64>],
    barrier: &[f64],
) -> Option<Vec<f64>> {
    let top = barrier.iter().cloned().fold(0.0, f64::max);
    let active: Vec<usize> = (0..barrier.len())
        .filter(|&i| barrier[i] > 1e-6 * top.max(1e-12))
        .collect();
    if active.is_empty() {
        return None;
    }
    let n = g0.len();
    let a = DMatrix::from_fn(n, active.len(), |r, c| grads[active[c]][r]);
    let sol = a.svd(true, true).solve(&(-g0), 1e-12).ok()?;
    let mut out = vec![0.0; barrier.len()];
    for (k, &i) in active.iter().enumerate() {
        out[i] = sol[k].max(0.0);
    }
    Some(out)
}

/// Finds a strictly feasible point, then follows the central path until the
/// duality gap `m / t` is below `settings.gap_tol`.
pub fn barrier_solve(p: &ConvexSubproblem) -> Result<BarrierSolution> {
    if p.start.len() != p.dim {
        return Err(IsacError::DimensionMismatch(format!(
            "start has {} entries, problem has {}",
            p.start.len(),
            p.dim
        )));
    }
    let mut x = p.start.clone();
    let mut steps = 0;
    let worst = max_violation(p, &x);
    if worst.is_nan() || worst == f64::INFINITY {
        return Err(IsacError::InfeasibleSubproblem(
            "start lies outside a constraint's domain".into(),
        ));
    }
    if worst >= 0.0 {
        let s0 = worst + 1.0;
        let phase = PhaseOne {
            inner: p,
            floor: -(1.0 + s0.abs()),
        };
        let mut z = DVector::zeros(p.dim + 1);
        z.rows_mut(0, p.dim).copy_from(&x);
        z[p.dim] = s0;
        let settings = BarrierSettings {
            gap_tol: 1e-10,
            ..p.settings
        };
        let res = follow_path(&phase, z, &settings, 0)?;
        let xs = res.x.rows(0, p.dim).into_owned();
        if !res.early || max_violation(p, &xs) >= 0.0 {
            return Err(IsacError::InfeasibleSubproblem(format!(
                "no strictly feasible point (best violation {:.3e})",
                max_violation(p, &xs)
            )));
        }
        x = xs;
        steps = res.steps;
    }
    let res = follow_path(p, x, &p.settings, steps)?;
    let x = res.x;
    let (objective, g0, _) = objective_eval(&p.objective, &x)
        .ok_or_else(|| IsacError::NumericalFailure("objective left its domain".into()))?;
    let mut grads = Vec::with_capacity(p.constraints.len());
    let mut multipliers = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let e = c
            .eval(&x)
            .ok_or_else(|| IsacError::NumericalFailure("constraint left its domain".into()))?;
        multipliers.push(1.0 / (-res.t * e.value));
        grads.push(e.grad);
    }
    let residual = |lam: &[f64]| {
        let mut r = g0.clone();
        for (l, g) in lam.iter().zip(&grads) {
            r.axpy(*l, g, 1.0);
        }
        r.amax()
    };
    let mut kkt_residual = residual(&multipliers);
    if let Some(refined) = refine_multipliers(&g0, &grads, &multipliers) {
        let r = residual(&refined);
        if r < kkt_residual {
            kkt_residual = r;
            multipliers = refined;
        }
    }
    Ok(BarrierSolution {
        x,
        objective,
        duality_gap: p.constraints.len() as f64 / res.t,
        kkt_residual,
        multipliers,
        newton_steps: res.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quadratic(p: DMatrix<f64>, q: DVector<f64>) -> SmoothFn {
        Box::new(move |x: &DVector<f64>| {
            let px = &p * x;
            Some((0.5 * px.dot(x) + q.dot(x), px + &q, p.clone()))
        })
    }

    #[test]
    fn unconstrained_quadratic_in_few_steps() {
        let p = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let q = DVector::from_vec(vec![1.0, -1.0]);
        let want = -p.clone().try_inverse().unwrap() * &q;
        let prob = ConvexSubproblem {
            dim: 2,
            objective: Objective::Smooth(quadratic(p, q)),
            constraints: vec![],
            start: DVector::from_vec(vec![5.0, 5.0]),
            settings: BarrierSettings::default(),
        };
        let sol = barrier_solve(&prob).unwrap();
        assert!((sol.x - want).amax() < 1e-12);
        assert!(sol.newton_steps <= 3);
    }

    #[test]
    fn log_objective_with_box() {
        // max ln(1 + x) on [0, 2] sits on the upper bound
        let obj: SmoothFn = Box::new(|x: &DVector<f64>| {
            let v = 1.0 + x[0];
            if v <= 0.0 {
                return None;
            }
            Some((
                -v.ln(),
                DVector::from_element(1, -1.0 / v),
                DMatrix::from_element(1, 1, 1.0 / (v * v)),
            ))
        });
        let prob = ConvexSubproblem {
            dim: 1,
            objective: Objective::Smooth(obj),
            constraints: vec![
                Constraint::lower_bound(0, 1, 0.0),
                Constraint::upper_bound(0, 1, 2.0),
            ],
            start: DVector::from_element(1, 1.0),
            settings: BarrierSettings::default(),
        };
        let sol = barrier_solve(&prob).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-8);

        // interior optimum of (x - 0.5)^2 on the same box
        let prob = ConvexSubproblem {
            dim: 1,
            objective: Objective::Smooth(quadratic(
                DMatrix::from_element(1, 1, 2.0),
                DVector::from_element(1, -1.0),
            )),
            constraints: vec![
                Constraint::lower_bound(0, 1, 0.0),
                Constraint::upper_bound(0, 1, 2.0),
            ],
            start: DVector::from_element(1, 1.5),
            settings: BarrierSettings::default(),
        };
        let sol = barrier_solve(&prob).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-8);
        assert!(sol.kkt_residual < 1e-7);
    }

    #[test]
    fn phase_one_from_infeasible_start() {
        // min x0 + x1 over the unit disc centred at (3, 3)
        let prob = ConvexSubproblem {
            dim: 2,
            objective: Objective::Linear(DVector::from_vec(vec![1.0, 1.0])),
            constraints: vec![Constraint::Quadratic {
                p: DMatrix::identity(2, 2),
                q: DVector::from_vec(vec![-6.0, -6.0]),
                r: 17.0,
            }],
            start: DVector::zeros(2),
            settings: BarrierSettings::default(),
        };
        let sol = barrier_solve(&prob).unwrap();
        let want = 3.0 - 0.5f64.sqrt();
        assert!((sol.x[0] - want).abs() < 1e-8 && (sol.x[1] - want).abs() < 1e-8);
    }

    #[test]
    fn empty_interior_is_reported() {
        let prob = ConvexSubproblem {
            dim: 1,
            objective: Objective::Linear(DVector::from_element(1, 1.0)),
            constraints: vec![
                Constraint::lower_bound(0, 1, 1.0),
                Constraint::upper_bound(0, 1, 0.0),
            ],
            start: DVector::zeros(1),
            settings: BarrierSettings::default(),
        };
        assert!(matches!(
            barrier_solve(&prob),
            Err(IsacError::InfeasibleSubproblem(_))
        ));
    }

    #[test]
    fn fractional_constraint() {
        // min -x0 - 2 x1 s.t. x0 + x1 <= 4, 1/(1+x0) + 4/(1+x1) <= 2, x >= 0
        let prob = ConvexSubproblem {
            dim: 2,
            objective: Objective::Linear(DVector::from_vec(vec![-1.0, -2.0])),
            constraints: vec![
                Constraint::Linear {
                    a: DVector::from_vec(vec![1.0, 1.0]),
                    b: 4.0,
                },
                Constraint::Fractional {
                    terms: vec![(0, 1.0, 1.0), (1, 4.0, 1.0)],
                    offset: -2.0,
                },
                Constraint::lower_bound(0, 2, 0.0),
                Constraint::lower_bound(1, 2, 0.0),
            ],
            start: DVector::from_vec(vec![2.0, 2.0]),
            settings: BarrierSettings::default(),
        };
        let sol = barrier_solve(&prob).unwrap();
        // full budget on x1 keeps the fractional bound slack: 1 + 4/5 < 2
        assert!(sol.x[0].abs() < 1e-7 && (sol.x[1] - 4.0).abs() < 1e-7);
        assert!(sol.kkt_residual < 1e-7, "{} after {} steps", sol.kkt_residual, sol.newton_steps);
    }

    /// Projected gradient on a ball-and-box QCQP as the independent oracle.
    #[test]
    fn random_qcqp_matches_first_order_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let n = rng.random_range(2..=5);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
            let p = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
            let q = DVector::from_fn(n, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let radius2 = 0.5;
            let prob = ConvexSubproblem {
                dim: n,
                objective: Objective::Smooth(quadratic(p.clone(), q.clone())),
                constraints: vec![Constraint::Quadratic {
                    p: DMatrix::identity(n, n),
                    q: DVector::zeros(n),
                    r: -radius2,
                }],
                start: DVector::zeros(n),
                settings: BarrierSettings::default(),
            };
            let sol = barrier_solve(&prob).unwrap();
            let f = |x: &DVector<f64>| 0.5 * (&p * x).dot(x) + q.dot(x);

            let lip = p.clone().symmetric_eigen().eigenvalues.amax();
            let mut x = DVector::zeros(n);
            for _ in 0..1_000_000 {
                x -= (&p * &x + &q) / lip;
                let norm = x.norm();
                if norm * norm > radius2 {
                    x *= radius2.sqrt() / norm;
                }
            }
            assert!((f(&sol.x) - f(&x)).abs() < 1e-6, "{} vs {}", f(&sol.x), f(&x));
        }
    }
}
