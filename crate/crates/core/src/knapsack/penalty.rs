//! Penalty-form canonical dual.
//!
//! Relaxing `z ∈ {0,1}ⁿ` by `½β‖z∘z − z‖²` and dualizing the canonical measure
//! gives, on `S_a⁺ = {G(σ) ≻ 0, τ ≥ 0}` with `G = Q + 2Diag(σ)` and
//! `ψ = c − τv + σ`,
//!
//! ```text
//! P_β(σ, τ) = −½ψᵀG⁻¹ψ − ½β⁻¹‖σ‖² − τV_c,
//! ```
//!
//! concave, and recovering the primal as `z = G⁻¹ψ`. Dropping the `β⁻¹` term gives
//! the limit dual, a valid lower bound on every feasible binary objective; reports
//! quote that bound as their dual value.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::ascent::{newton_ascent, AscentOptions, ConcaveObjective, Termination};
use super::cubic::lkp_cardano_sigma;
use super::instance::{BinarySelection, KnapsackInstance};
use super::linear::lkp_dual_value;
use super::report::{spd_cholesky, theta, DualPoint, PenaltyConfig, SolveReport, SolveStatus};
use crate::error::{Error, Result};

/// `λ_min(G)` below this fraction of the problem scale counts as the dual boundary.
const BOUNDARY_TOL: f64 = 1e-7;

/// Value and exact gradient of `P_β` at `ζ`; the gradient is ordered `(σ, τ)`.
///
/// `∂/∂σ_i = w_i² − w_i − σ_i/β` and `∂/∂τ = vᵀw − V_c` with `w = G⁻¹ψ`.
pub fn qkp_dual_eval_beta(
    inst: &KnapsackInstance,
    zeta: &DualPoint,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    check_dims(inst, zeta)?;
    let obj = PenaltyDual::new(inst, beta);
    let x = obj.pack(zeta);
    let eval = obj
        .eval(&x)
        .ok_or_else(|| Error::DualBoundary("G(sigma) is not positive definite".into()))?;
    Ok((eval.penalty_value, eval.gradient().iter().copied().collect()))
}

/// Limit dual `−½ψᵀG⁻¹ψ − τV_c` (no `β⁻¹` term).
pub fn qkp_dual_value_limit(inst: &KnapsackInstance, zeta: &DualPoint) -> Result<f64> {
    check_dims(inst, zeta)?;
    let obj = PenaltyDual::new(inst, f64::INFINITY);
    let x = obj.pack(zeta);
    obj.eval(&x)
        .map(|e| e.limit_value)
        .ok_or_else(|| Error::DualBoundary("G(sigma) is not positive definite".into()))
}

/// Separable form of `P_β` for `Q = 0`:
/// `−½Σ(½σ_i⁻¹(σ_i + c_i − τv_i)² + β⁻¹σ_i²) − τV_c`.
pub fn lkp_penalty_dual_value(inst: &KnapsackInstance, zeta: &DualPoint, beta: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..inst.n() {
        let sigma = zeta.sigma[i];
        let psi = sigma + inst.profits()[i] - zeta.tau * inst.volumes()[i];
        s += 0.5 * psi * psi / sigma + sigma * sigma / beta;
    }
    -0.5 * s - zeta.tau * inst.capacity()
}

/// `τ = (Σv_i(1 + c_i/σ_i) − 2V_c) / Σ(v_i²/σ_i)`, the root of `Σ v_i z_i = V_c`
/// with `z_i = (σ_i + c_i − τv_i) / (2σ_i)`.
///
/// The result may be nonpositive, meaning the capacity does not bind.
pub fn lkp_tau_update(sigma: &[f64], inst: &KnapsackInstance) -> Result<f64> {
    if sigma.len() != inst.n() {
        return Err(Error::InvalidParameter(format!(
            "sigma has {} entries, expected {}",
            sigma.len(),
            inst.n()
        )));
    }
    if let Some(i) = sigma.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::DualBoundary(format!(
            "sigma[{i}] = {} must be strictly positive",
            sigma[i]
        )));
    }
    let mut num = -2.0 * inst.capacity();
    let mut den = 0.0;
    for ((s, c), v) in sigma.iter().zip(inst.profits()).zip(inst.volumes()) {
        num += v * (1.0 + c / s);
        den += v * v / s;
    }
    Ok(num / den)
}

/// Linear knapsack by alternating the cubic σ-update and the closed-form τ-update.
///
/// Each weight of the schedule is run to a fixed point in τ; the continuous
/// `z = ½σ⁻¹∘(σ + c − τv)` is rounded once every component is within `round_tol`
/// of {0, 1}, then certified against the Lagrangian dual at the final τ.
pub fn lkp_solve_beta(
    inst: &KnapsackInstance,
    cfg: &PenaltyConfig,
    tau0: f64,
) -> Result<SolveReport> {
    inst.require_linear_positive()?;
    cfg.validate()?;
    if !(tau0.is_finite() && tau0 > 0.0) {
        return Err(Error::InvalidParameter(format!("tau0 = {tau0} must be positive")));
    }
    let n = inst.n();
    let tie_tol = cfg.tie_tol_for(inst);

    if inst.capacity() >= inst.total_volume() + inst.volume_tol() {
        let mut rep = super::linear::lkp_recover(inst, 0.0, tie_tol);
        rep.residuals.insert("iterations".into(), 0.0);
        return Ok(rep);
    }

    let mut tau = tau0;
    let mut sigma = vec![0.0; n];
    let mut iterations = 0usize;
    let mut last_beta = cfg.beta_schedule[0];
    let mut z_cont = vec![0.0; n];

    for &beta in &cfg.beta_schedule {
        last_beta = beta;
        match alternate(inst, beta, tau, cfg.tol_residual, cfg.max_iter)? {
            Alternation::Converged { tau: t, sigma: s, steps } => {
                iterations += steps;
                tau = t;
                sigma = s;
            }
            Alternation::Boundary { tau: t, sigma: s, index, steps } => {
                iterations += steps;
                return Ok(boundary_report(inst, t, &s, iterations, tie_tol, index));
            }
        }
        for i in 0..n {
            let th = inst.profits()[i] - tau * inst.volumes()[i];
            z_cont[i] = 0.5 * (sigma[i] + th) / sigma[i];
        }
    }

    let theta = theta(inst, tau);
    let tied: Vec<usize> = (0..n).filter(|&i| theta[i].abs() <= tie_tol).collect();
    let z = BinarySelection::from_bools(z_cont.iter().map(|z| *z > 0.5));
    let binary = z_cont
        .iter()
        .all(|z| z.abs() <= cfg.round_tol || (z - 1.0).abs() <= cfg.round_tol);

    let primal = inst.objective(&z);
    let dual = lkp_dual_value(inst, tau);
    let gap = primal - dual;
    let min_abs_theta = theta.iter().fold(f64::INFINITY, |m, t| m.min(t.abs()));

    let status = if !tied.is_empty() {
        SolveStatus::Degenerate
    } else if binary
        && inst.is_feasible(&z)
        && gap <= cfg.tol_gap * (1.0 + primal.abs())
        && min_abs_theta > gap
    {
        SolveStatus::Unique
    } else {
        SolveStatus::DualBoundaryFailure
    };

    let mut residuals = BTreeMap::new();
    residuals.insert("iterations".into(), iterations as f64);
    residuals.insert("beta".into(), last_beta);
    residuals.insert("min_abs_theta".into(), min_abs_theta);
    residuals.insert(
        "max_rounding_error".into(),
        z_cont
            .iter()
            .map(|z| z.abs().min((z - 1.0).abs()))
            .fold(0.0, f64::max),
    );
    // The cubic update is stationarity of the separable dual with weight β/4.
    let zeta = DualPoint::new(sigma.clone(), tau);
    residuals.insert(
        "penalty_dual_value".into(),
        lkp_penalty_dual_value(inst, &zeta, 0.25 * last_beta),
    );
    residuals.insert("selected_volume".into(), inst.volume_of(&z));

    Ok(SolveReport {
        z,
        dual: zeta,
        primal_value: primal,
        dual_value: dual,
        gap,
        status,
        residuals,
        theta,
        tied,
        phi: None,
    })
}

enum Alternation {
    Converged {
        tau: f64,
        sigma: Vec<f64>,
        steps: usize,
    },
    Boundary {
        tau: f64,
        sigma: Vec<f64>,
        index: usize,
        steps: usize,
    },
}

/// One σ-update at `tau` followed by the τ-update; `Err(i)` when `θ_i = 0`.
fn alternation_step(
    inst: &KnapsackInstance,
    beta: f64,
    tau: f64,
) -> Result<std::result::Result<(Vec<f64>, f64), (usize, Vec<f64>)>> {
    let mut sigma = vec![0.0; inst.n()];
    for i in 0..inst.n() {
        let th = inst.volumes()[i] * tau - inst.profits()[i];
        match lkp_cardano_sigma(th, beta) {
            Ok(s) => sigma[i] = s,
            Err(Error::DegenerateTheta) => return Ok(Err((i, sigma))),
            Err(e) => return Err(e),
        }
    }
    let next = lkp_tau_update(&sigma, inst)?;
    Ok(Ok((sigma, next)))
}

/// Fixed point of `τ ↦ τ_update(σ(τ))` on `τ ≥ 0`.
///
/// The sign of `h(τ) = τ_update(σ(τ)) − τ` is the sign of the volume excess
/// `Σv_i z_i(τ) − V_c`, which decreases in `τ`. Plain alternation steps are taken
/// while they contract; since the contraction factor tends to one as `β` grows,
/// the iteration falls back to Illinois regula falsi on the bracket the signs of
/// `h` maintain.
fn alternate(
    inst: &KnapsackInstance,
    beta: f64,
    tau0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Alternation> {
    let ratio_max = inst
        .profits()
        .iter()
        .zip(inst.volumes())
        .map(|(c, v)| c / v)
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0_f64, 2.0 * ratio_max + 1.0);
    let (mut h_lo, mut h_hi) = (f64::NAN, f64::NAN);
    let mut side = 0i8;
    let mut x = tau0.clamp(lo, hi);
    let mut prev_h = f64::INFINITY;

    for steps in 1..=max_iter {
        let (sigma, next) = match alternation_step(inst, beta, x)? {
            Ok(v) => v,
            Err((index, sigma)) => {
                return Ok(Alternation::Boundary {
                    tau: x,
                    sigma,
                    index,
                    steps,
                })
            }
        };
        let h = next - x;
        let scale = tol * (1.0 + x.abs());
        if h.abs() <= scale || (x == 0.0 && h <= 0.0) {
            return Ok(Alternation::Converged {
                tau: x,
                sigma,
                steps,
            });
        }
        if h > 0.0 {
            lo = x;
            h_lo = h;
            if side == 1 {
                h_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            h_hi = h;
            if side == -1 {
                h_lo *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= scale {
            return Ok(Alternation::Converged {
                tau: x,
                sigma,
                steps,
            });
        }
        let plain = next.max(0.0);
        x = if plain > lo && plain < hi && h.abs() <= 0.5 * prev_h {
            plain
        } else if h_lo.is_finite() && h_hi.is_finite() {
            let t = lo - h_lo * (hi - lo) / (h_hi - h_lo);
            if t > lo && t < hi {
                t
            } else {
                0.5 * (lo + hi)
            }
        } else {
            0.5 * (lo + hi)
        };
        prev_h = h.abs();
    }
    Err(Error::NonConvergence {
        what: "sigma/tau alternation",
        iterations: max_iter,
    })
}

fn boundary_report(
    inst: &KnapsackInstance,
    tau: f64,
    sigma: &[f64],
    iterations: usize,
    tie_tol: f64,
    index: usize,
) -> SolveReport {
    let mut rep = super::linear::lkp_recover(inst, tau, tie_tol);
    rep.status = SolveStatus::DualBoundaryFailure;
    if !rep.tied.contains(&index) {
        rep.tied.push(index);
        rep.tied.sort_unstable();
    }
    rep.dual = DualPoint::new(sigma.to_vec(), tau);
    rep.residuals.insert("iterations".into(), iterations as f64);
    rep.residuals.insert("boundary_index".into(), index as f64);
    rep
}

/// Ascent records of a penalty-form solve, one entry per weight of the schedule.
#[derive(Debug, Clone, Default)]
pub struct PenaltyTrace {
    pub betas: Vec<f64>,
    /// Values of `P_β` at each accepted multiplier.
    pub histories: Vec<Vec<f64>>,
    /// Every inner σ-ascent, in the order performed.
    pub inner_histories: Vec<Vec<f64>>,
}

pub fn qkp_solve_beta(inst: &KnapsackInstance, cfg: &PenaltyConfig) -> Result<SolveReport> {
    qkp_solve_beta_traced(inst, cfg).map(|(rep, _)| rep)
}

/// Maximizes `P_β` over `S_a⁺`, escalating β along the schedule until `z = G⁻¹ψ`
/// rounds to a certified binary optimum.
///
/// `G` does not depend on `τ`, so for fixed `τ` the σ-subproblem is a smooth
/// concave maximization over a fixed open set, solved by damped Newton ascent with
/// backtracking that rejects steps leaving `S_a⁺`. Its value is concave in `τ` with
/// derivative `vᵀw − V_c`, whose root is bracketed and found by regula falsi; a
/// trial multiplier is accepted only when it improves `P_β`.
///
/// A binary feasible `z` with gap `g` is the unique optimum when
/// `½λ_min(G)(1 − max|w_i − z_i|)² > g`: every other binary point lies at least
/// that far above the dual bound.
pub fn qkp_solve_beta_traced(
    inst: &KnapsackInstance,
    cfg: &PenaltyConfig,
) -> Result<(SolveReport, PenaltyTrace)> {
    cfg.validate()?;
    let n = inst.n();
    let q = inst.interaction_or_zero();
    let scale = inst.max_abs_profit().max(1.0);
    let lam_q = SymmetricEigen::new(q.clone()).eigenvalues.min();
    let q_norm = q.norm();

    let sigma0 = DVector::from_element(n, 0.5 * (-lam_q).max(0.0) + scale);
    let mut sigma = sigma0.clone();
    let mut tau = inst.profits().iter().map(|c| c.abs()).sum::<f64>() / inst.total_volume();
    let mut trace = PenaltyTrace::default();
    let mut last = None;

    for &beta in &cfg.beta_schedule {
        let obj = PenaltyDual::new(inst, beta);
        trace.betas.push(beta);
        let point = match maximize(&obj, cfg, sigma.clone(), tau, &mut trace)? {
            Maximized::Certified(rep) => return Ok((*rep, trace)),
            Maximized::Point(p) => p,
        };
        sigma = point.sigma.clone();
        tau = point.tau;

        let x = obj.pack_parts(&sigma, tau);
        let eval = obj.eval(&x).expect("accepted iterate is feasible");
        let lam_g = SymmetricEigen::new(eval.g.clone()).eigenvalues.min();
        let at_boundary = lam_g <= BOUNDARY_TOL * (scale + q_norm);
        if point.termination == Termination::MaxIter && !at_boundary {
            return Err(Error::NonConvergence {
                what: "penalty dual ascent",
                iterations: cfg.max_iter,
            });
        }
        last = Some((x, beta, point.termination));
        if at_boundary {
            // Larger weights may still certify from the interior; restart there.
            sigma = sigma0.clone();
        }
    }

    let (x, beta, termination) = last.expect("schedule is nonempty");
    let obj = PenaltyDual::new(inst, beta);
    let eval = obj.eval(&x).expect("accepted iterate is feasible");
    let lam_g = SymmetricEigen::new(eval.g.clone()).eigenvalues.min();
    let mut rep = report_from(inst, cfg, &obj, &x, lam_g, beta);
    rep.status = SolveStatus::DualBoundaryFailure;
    rep.residuals.insert(
        "stalled".into(),
        f64::from(u8::from(termination != Termination::Converged)),
    );
    Ok((rep, trace))
}

struct BetaPoint {
    sigma: DVector<f64>,
    tau: f64,
    value: f64,
    slope: f64,
    termination: Termination,
}

/// Inner σ-ascent at fixed `tau`, warm-started from `sigma0`.
fn inner(
    obj: &PenaltyDual<'_>,
    cfg: &PenaltyConfig,
    sigma0: DVector<f64>,
    tau: f64,
    trace: &mut PenaltyTrace,
) -> Result<BetaPoint> {
    let slice = SigmaSlice { dual: obj, tau };
    let opts = AscentOptions {
        max_iter: cfg.max_iter,
        ..AscentOptions::default()
    };
    let out = newton_ascent(&slice, sigma0, &opts)
        .ok_or_else(|| Error::DualBoundary("start point outside S_a+".into()))?;
    trace.inner_histories.push(out.history);
    let eval = obj
        .eval(&obj.pack_parts(&out.x, tau))
        .expect("accepted iterate is feasible");
    Ok(BetaPoint {
        slope: eval.grad[obj.inst.n()],
        value: eval.penalty_value,
        sigma: out.x,
        tau,
        termination: out.termination,
    })
}

enum Maximized {
    Certified(Box<SolveReport>),
    Point(BetaPoint),
}

/// Maximizes `P_β` for one weight and returns the best point evaluated, stopping
/// early at the first point that certifies a unique binary optimum.
fn maximize(
    obj: &PenaltyDual<'_>,
    cfg: &PenaltyConfig,
    sigma0: DVector<f64>,
    tau_hint: f64,
    trace: &mut PenaltyTrace,
) -> Result<Maximized> {
    let beta = 1.0 / obj.inv_beta;
    let check = |p: &BetaPoint| {
        certify(obj.inst, cfg, obj, &obj.pack_parts(&p.sigma, p.tau), beta)
            .map(|rep| Maximized::Certified(Box::new(rep)))
    };
    let mut history = Vec::new();
    let mut evals = 0usize;

    evals += 1;
    let at_zero = inner(obj, cfg, sigma0, 0.0, trace)?;
    let mut warm = at_zero.sigma.clone();
    history.push(at_zero.value);
    if let Some(done) = check(&at_zero) {
        trace.histories.push(history);
        return Ok(done);
    }
    if at_zero.slope <= 0.0 {
        trace.histories.push(history);
        return Ok(Maximized::Point(at_zero));
    }
    let mut best = at_zero;
    let (mut lo, mut s_lo) = (0.0, best.slope);
    let mut hi = tau_hint.max(f64::MIN_POSITIVE);
    let mut s_hi;
    loop {
        evals += 1;
        let p = inner(obj, cfg, warm.clone(), hi, trace)?;
        warm = p.sigma.clone();
        if let Some(done) = check(&p) {
            if p.value > best.value {
                history.push(p.value);
            }
            trace.histories.push(history);
            return Ok(done);
        }
        s_hi = p.slope;
        let improves = p.value > best.value;
        if improves {
            history.push(p.value);
        }
        if p.slope > 0.0 {
            lo = hi;
            s_lo = p.slope;
            hi = 2.0 * hi + 1.0;
        }
        let done = p.slope <= 0.0;
        if improves {
            best = p;
        }
        if done {
            break;
        }
        if evals > cfg.max_iter {
            return Err(Error::NonConvergence {
                what: "penalty dual multiplier bracket",
                iterations: evals,
            });
        }
    }

    let mut side = 0i8;
    while evals <= cfg.max_iter {
        let width = hi - lo;
        if width <= cfg.tol_residual * (1.0 + hi) || s_lo - s_hi <= 0.0 {
            break;
        }
        let mut t = lo + s_lo * width / (s_lo - s_hi);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        evals += 1;
        let p = inner(obj, cfg, warm.clone(), t, trace)?;
        warm = p.sigma.clone();
        if let Some(done) = check(&p) {
            if p.value > best.value {
                history.push(p.value);
            }
            trace.histories.push(history);
            return Ok(done);
        }
        let slope = p.slope;
        if p.value > best.value {
            history.push(p.value);
            best = p;
        }
        if slope.abs() <= cfg.tol_residual * (1.0 + obj.inst.total_volume()) {
            break;
        }
        if slope > 0.0 {
            lo = t;
            s_lo = slope;
            if side == 1 {
                s_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = t;
            s_hi = slope;
            if side == -1 {
                s_lo *= 0.5;
            }
            side = -1;
        }
    }
    if evals > cfg.max_iter {
        best.termination = Termination::MaxIter;
    }
    trace.histories.push(history);
    Ok(Maximized::Point(best))
}

/// Unique-optimum certificate at an arbitrary point of `S_a⁺`; the limit dual is a
/// valid bound everywhere, so the check does not need the ascent to have converged.
fn certify(
    inst: &KnapsackInstance,
    cfg: &PenaltyConfig,
    obj: &PenaltyDual<'_>,
    x: &DVector<f64>,
    beta: f64,
) -> Option<SolveReport> {
    let eval = obj.eval(x)?;
    let rounding = max_rounding(&eval.w);
    if rounding > cfg.round_tol {
        return None;
    }
    let lam_g = SymmetricEigen::new(eval.g.clone()).eigenvalues.min();
    let mut rep = report_from(inst, cfg, obj, x, lam_g, beta);
    if !inst.is_feasible(&rep.z) {
        return None;
    }
    let separation = 0.5 * lam_g * (1.0 - rounding).powi(2);
    let certified =
        rep.gap <= cfg.tol_gap * (1.0 + rep.primal_value.abs()) && separation > rep.gap;
    certified.then(|| {
        rep.status = SolveStatus::Unique;
        rep.residuals.insert("separation".into(), separation);
        rep
    })
}

fn max_rounding(w: &DVector<f64>) -> f64 {
    w.iter()
        .map(|wi| wi.abs().min((wi - 1.0).abs()))
        .fold(0.0, f64::max)
}

fn report_from(
    inst: &KnapsackInstance,
    cfg: &PenaltyConfig,
    obj: &PenaltyDual<'_>,
    x: &DVector<f64>,
    lam_g: f64,
    beta: f64,
) -> SolveReport {
    let n = inst.n();
    let eval = obj.eval(x).expect("accepted iterate is feasible");
    let w = &eval.w;
    let rounding = max_rounding(w);
    let mut z = BinarySelection::from_bools(w.iter().map(|wi| *wi > 0.5));
    // Keep the reported selection feasible: drop the least-committed items first.
    if !inst.is_feasible(&z) {
        let mut chosen: Vec<usize> = (0..n).filter(|&i| z.get(i)).collect();
        chosen.sort_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap().then(a.cmp(&b)));
        for i in chosen {
            if inst.is_feasible(&z) {
                break;
            }
            z.set(i, false);
        }
    }
    let tau = x[n];
    let sigma: Vec<f64> = x.iter().take(n).copied().collect();
    let primal = inst.objective(&z);
    let dual = eval.limit_value;
    let undecided: Vec<usize> = (0..n)
        .filter(|&i| w[i].abs().min((w[i] - 1.0).abs()) > cfg.round_tol)
        .collect();

    let mut residuals = BTreeMap::new();
    residuals.insert("beta".into(), beta);
    residuals.insert("penalty_dual_value".into(), eval.penalty_value);
    residuals.insert("lambda_min_g".into(), lam_g);
    residuals.insert("max_rounding_error".into(), rounding);
    residuals.insert("selected_volume".into(), inst.volume_of(&z));
    residuals.insert(
        "gradient_inf_norm".into(),
        eval.gradient().iter().fold(0.0, |m, g| m.max(g.abs())),
    );

    SolveReport {
        z,
        dual: DualPoint::new(sigma, tau),
        primal_value: primal,
        dual_value: dual,
        gap: primal - dual,
        status: SolveStatus::DualBoundaryFailure,
        residuals,
        theta: theta(inst, tau),
        tied: undecided,
        phi: None,
    }
}

fn check_dims(inst: &KnapsackInstance, zeta: &DualPoint) -> Result<()> {
    if zeta.sigma.len() != inst.n() {
        return Err(Error::InvalidParameter(format!(
            "sigma has {} entries, expected {}",
            zeta.sigma.len(),
            inst.n()
        )));
    }
    if !(zeta.tau >= 0.0) {
        return Err(Error::DualBoundary(format!("tau = {} is negative", zeta.tau)));
    }
    Ok(())
}

/// `P_β` as a function of the packed vector `(σ, τ)`.
struct PenaltyDual<'a> {
    inst: &'a KnapsackInstance,
    q: DMatrix<f64>,
    inv_beta: f64,
}

struct PenaltyEval {
    pub penalty_value: f64,
    pub limit_value: f64,
    pub w: DVector<f64>,
    pub g: DMatrix<f64>,
    grad: DVector<f64>,
    g_inv: DMatrix<f64>,
}

impl PenaltyEval {
    fn gradient(&self) -> &DVector<f64> {
        &self.grad
    }
}

impl<'a> PenaltyDual<'a> {
    fn new(inst: &'a KnapsackInstance, beta: f64) -> Self {
        Self {
            inst,
            q: inst.interaction_or_zero(),
            inv_beta: 1.0 / beta,
        }
    }

    fn pack(&self, zeta: &DualPoint) -> DVector<f64> {
        self.pack_parts(&DVector::from_column_slice(&zeta.sigma), zeta.tau)
    }

    fn pack_parts(&self, sigma: &DVector<f64>, tau: f64) -> DVector<f64> {
        let n = self.inst.n();
        DVector::from_fn(n + 1, |i, _| if i < n { sigma[i] } else { tau })
    }

    fn eval(&self, x: &DVector<f64>) -> Option<PenaltyEval> {
        let n = self.inst.n();
        let tau = x[n];
        if !(tau >= 0.0) || x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut g = self.q.clone();
        for i in 0..n {
            g[(i, i)] += 2.0 * x[i];
        }
        let chol = spd_cholesky(g.clone())?;
        let psi = DVector::from_fn(n, |i, _| {
            self.inst.profits()[i] - tau * self.inst.volumes()[i] + x[i]
        });
        let w = chol.solve(&psi);
        let sig_sq: f64 = (0..n).map(|i| x[i] * x[i]).sum();
        let limit_value = -0.5 * psi.dot(&w) - tau * self.inst.capacity();
        let penalty_value = limit_value - 0.5 * self.inv_beta * sig_sq;

        let mut grad = DVector::zeros(n + 1);
        for i in 0..n {
            grad[i] = w[i] * w[i] - w[i] - self.inv_beta * x[i];
        }
        let v = DVector::from_column_slice(self.inst.volumes());
        grad[n] = v.dot(&w) - self.inst.capacity();
        let g_inv = chol.inverse();
        Some(PenaltyEval {
            penalty_value,
            limit_value,
            w,
            g,
            grad,
            g_inv,
        })
    }
}

/// `P_β(·, τ)` for a fixed multiplier.
struct SigmaSlice<'a, 'b> {
    dual: &'b PenaltyDual<'a>,
    tau: f64,
}

impl ConcaveObjective for SigmaSlice<'_, '_> {
    fn dim(&self) -> usize {
        self.dual.inst.n()
    }

    fn value(&self, sigma: &DVector<f64>) -> Option<f64> {
        self.dual
            .eval(&self.dual.pack_parts(sigma, self.tau))
            .map(|e| e.penalty_value)
    }

    /// With `M = G⁻¹` and `u = e − 2w`: `∂²/∂σ_i∂σ_j = −u_i u_j M_ij − δ_ij/β`.
    fn derivatives(&self, sigma: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.dim();
        let e = self.dual.eval(&self.dual.pack_parts(sigma, self.tau))?;
        let u = e.w.map(|wi| 1.0 - 2.0 * wi);
        let mut h = DMatrix::from_fn(n, n, |i, j| -u[i] * u[j] * e.g_inv[(i, j)]);
        for i in 0..n {
            h[(i, i)] -= self.dual.inv_beta;
        }
        Some((e.penalty_value, e.grad.rows(0, n).into_owned(), h))
    }
}
