//! Damped Newton ascent for smooth concave functions on an open convex domain.
//!
//! The domain is probed through [`ConcaveObjective::value`] returning `None`; the
//! backtracking line search halves the step until the trial point is inside and the
//! Armijo condition holds, so every accepted step increases the objective. One
//! coordinate may carry a nonnegativity bound (the capacity multiplier).

use nalgebra::{DMatrix, DVector};

pub trait ConcaveObjective {
    fn dim(&self) -> usize;

    /// `None` outside the domain.
    fn value(&self, x: &DVector<f64>) -> Option<f64>;

    /// Value, gradient and Hessian; `None` outside the domain.
    fn derivatives(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)>;

    /// Coordinate constrained to stay `≥ 0`.
    fn nonneg_index(&self) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    pub max_iter: usize,
    /// Stop when the Newton decrement `gᵀd` falls below `tol·(1 + |f|)`.
    pub tol: f64,
    /// Largest allowed `‖d‖∞` of a single step.
    pub max_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-14,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    /// No acceptable step could be found or progress vanished.
    Stalled,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct AscentOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Objective value at the start and after every accepted step.
    pub history: Vec<f64>,
    pub termination: Termination,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;
const STALL_WINDOW: usize = 5;

pub fn newton_ascent<O: ConcaveObjective + ?Sized>(
    obj: &O,
    x0: DVector<f64>,
    opts: &AscentOptions,
) -> Option<AscentOutcome> {
    let dim = obj.dim();
    let bound = obj.nonneg_index();
    let mut x = x0;
    let mut f = obj.value(&x)?;
    let mut history = vec![f];
    let mut small_steps = 0;

    for iter in 0..opts.max_iter {
        let (fx, g, h) = obj.derivatives(&x)?;
        f = fx;

        // Hold the bounded coordinate at zero while the gradient pushes outward.
        let fixed = bound.filter(|&k| x[k] <= 0.0 && g[k] <= 0.0);
        let free: Vec<usize> = (0..dim).filter(|&i| Some(i) != fixed).collect();
        if free.is_empty() {
            return Some(done(x, f, iter, history, Termination::Converged));
        }

        let g_free = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let neg_h = DMatrix::from_fn(free.len(), free.len(), |a, b| -h[(free[a], free[b])]);
        let d_free = match regularized_solve(&neg_h, &g_free) {
            Some(d) => d,
            None => return Some(done(x, f, iter, history, Termination::Stalled)),
        };
        let mut d = DVector::zeros(dim);
        for (a, &i) in free.iter().enumerate() {
            d[i] = d_free[a];
        }
        let dmax = d.amax();
        if dmax > opts.max_step {
            d *= opts.max_step / dmax;
        }

        let decrement = g.dot(&d);
        if decrement <= opts.tol * (1.0 + f.abs()) {
            return Some(done(x, f, iter, history, Termination::Converged));
        }

        let mut t_max = 1.0;
        if let Some(k) = bound {
            if d[k] < 0.0 {
                t_max = f64::min(1.0, -x[k] / d[k]);
            }
        }

        let mut t = t_max;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial = &x + &d * t;
            if let Some(k) = bound {
                if t == t_max && t_max < 1.0 {
                    trial[k] = 0.0;
                }
                trial[k] = trial[k].max(0.0);
            }
            if let Some(ft) = obj.value(&trial) {
                if ft >= f + ARMIJO * t * decrement {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            t *= 0.5;
        }

        match accepted {
            Some((xn, fnew)) => {
                if fnew - f <= 1e-15 * (1.0 + f.abs()) {
                    small_steps += 1;
                } else {
                    small_steps = 0;
                }
                x = xn;
                f = fnew;
                history.push(f);
                if small_steps >= STALL_WINDOW {
                    return Some(done(x, f, iter + 1, history, Termination::Stalled));
                }
            }
            None => return Some(done(x, f, iter, history, Termination::Stalled)),
        }
    }
    Some(done(x, f, opts.max_iter, history, Termination::MaxIter))
}

fn done(
    x: DVector<f64>,
    value: f64,
    iterations: usize,
    history: Vec<f64>,
    termination: Termination,
) -> AscentOutcome {
    AscentOutcome {
        x,
        value,
        iterations,
        history,
        termination,
    }
}

/// Solves `(A + λI) d = g` for the smallest `λ ≥ 0` in a geometric ladder that makes
/// the matrix numerically positive definite.
fn regularized_solve(a: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut lambda = 0.0;
    for _ in 0..40 {
        let mut m = a.clone();
        for i in 0..n {
            m[(i, i)] += lambda;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(g);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        lambda = if lambda == 0.0 { 1e-14 * scale } else { lambda * 10.0 };
    }
    None
}
