//! Shifted-form canonical dual.
//!
//! On binary points `zᵀQz = zᵀQ_αz − 2αᵀz` with `Q_α = Q + 2Diag(α) = 4LᵀHL ⪰ 0`.
//! Writing `z = ½(e + y)` with `y ∈ {±1}ⁿ` and bounding `½(Ly)ᵀH(Ly)` below by its
//! Fenchel minorant gives the concave nonsmooth dual
//!
//! ```text
//! P_α(σ, τ) = −½Σ|φ_i| − ½σᵀH⁻¹σ − τV_b + d,   φ = c − τv − 2Lᵀσ − ½Qe,
//! ```
//!
//! over `σ ∈ ℝʳ, τ ≥ 0`. It is a valid lower bound on every feasible binary
//! objective, and the primal is read off as `z_i = ½(sign φ_i + 1)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ascent::{newton_ascent, AscentOptions, ConcaveObjective, Termination};
use super::instance::{BinarySelection, KnapsackInstance};
use super::report::{theta, DualPoint, SolveReport, SolveStatus};
use crate::error::{Error, Result};

/// `Q_α = UΛUᵀ` truncated to `L = U_rᵀ`, `H = Λ_r/4`, plus the dual constants.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaFactorization {
    pub alpha: Vec<f64>,
    /// `r × n`.
    pub l: DMatrix<f64>,
    /// `r × r`, positive definite (diagonal by construction).
    pub h: DMatrix<f64>,
    pub rank: usize,
    /// `V_c − ½Σv_i`.
    pub v_b: f64,
    /// `⅛Σ_i(2α_i + Σ_j Q_ij) − ½Σ_i(c_i + α_i)`.
    pub d: f64,
    h_inv: DMatrix<f64>,
    /// `c − ½Qe`.
    offset: DVector<f64>,
}

impl AlphaFactorization {
    /// `Q + 2Diag(α)`.
    pub fn shifted_matrix(&self, inst: &KnapsackInstance) -> DMatrix<f64> {
        let mut qa = inst.interaction_or_zero();
        for (i, a) in self.alpha.iter().enumerate() {
            qa[(i, i)] += 2.0 * a;
        }
        qa
    }

    /// `‖Q_α − 4LᵀHL‖_F`.
    pub fn reconstruction_error(&self, inst: &KnapsackInstance) -> f64 {
        let rebuilt = self.l.transpose() * &self.h * &self.l * 4.0;
        (self.shifted_matrix(inst) - rebuilt).norm()
    }

    /// `φ(σ, τ)`.
    pub fn phi(&self, inst: &KnapsackInstance, zeta: &DualPoint) -> Vec<f64> {
        let sigma = DVector::from_column_slice(&zeta.sigma);
        let lt_sigma = self.l.tr_mul(&sigma);
        (0..inst.n())
            .map(|i| self.offset[i] - zeta.tau * inst.volumes()[i] - 2.0 * lt_sigma[i])
            .collect()
    }
}

/// Relative threshold on `λ/λ_max` for keeping an eigenpair.
pub const RANK_TOL: f64 = 1e-10;

/// Relative shift `μ/‖Q‖_F` that makes `Q_α` strictly positive on the kept subspace.
pub const MU_SHIFT: f64 = 1e-8;

/// Factorizes `Q + 2Diag(α)`.
///
/// Without an explicit `α` the uniform shift `α_i = max(0, ½(μ − λ_min(Q)))` with
/// `μ = 1e-8‖Q‖_F` is used.
pub fn alpha_factorize(inst: &KnapsackInstance, alpha: Option<&[f64]>) -> Result<AlphaFactorization> {
    let fact = factorize(inst, alpha)?;
    let explicit_zero = alpha.map_or(true, |a| a.iter().all(|x| *x == 0.0));
    if fact.rank == 0 && explicit_zero {
        return Err(Error::RankZero);
    }
    Ok(fact)
}

fn factorize(inst: &KnapsackInstance, alpha: Option<&[f64]>) -> Result<AlphaFactorization> {
    let n = inst.n();
    let q = inst.interaction_or_zero();
    let alpha: Vec<f64> = match alpha {
        Some(a) => {
            if a.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "alpha has {} entries, expected {n}",
                    a.len()
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("alpha must be finite".into()));
            }
            a.to_vec()
        }
        None => {
            let lam_min = SymmetricEigen::new(q.clone()).eigenvalues.min();
            let mu = MU_SHIFT * q.norm();
            vec![(0.5 * (mu - lam_min)).max(0.0); n]
        }
    };

    let mut qa = q.clone();
    for i in 0..n {
        qa[(i, i)] += 2.0 * alpha[i];
    }
    let eig = SymmetricEigen::new(qa);
    let lam_max = eig.eigenvalues.max();
    let mut kept: Vec<usize> = if lam_max > 0.0 {
        (0..n)
            .filter(|&k| eig.eigenvalues[k] > RANK_TOL * lam_max)
            .collect()
    } else {
        Vec::new()
    };
    // Largest eigenvalues first for a reproducible layout.
    kept.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let r = kept.len();
    let mut l = DMatrix::zeros(r, n);
    let mut h = DMatrix::zeros(r, r);
    let mut h_inv = DMatrix::zeros(r, r);
    for (row, &k) in kept.iter().enumerate() {
        let u = eig.eigenvectors.column(k);
        // Fix the sign so the first nonzero entry is positive.
        let sign = u
            .iter()
            .find(|x| x.abs() > 1e-12)
            .map_or(1.0, |x| x.signum());
        for j in 0..n {
            l[(row, j)] = sign * u[j];
        }
        h[(row, row)] = 0.25 * eig.eigenvalues[k];
        h_inv[(row, row)] = 1.0 / h[(row, row)];
    }

    let row_sums: f64 = q.iter().sum();
    let sum_alpha: f64 = alpha.iter().sum();
    let sum_c: f64 = inst.profits().iter().sum();
    let d = 0.125 * (2.0 * sum_alpha + row_sums) - 0.5 * (sum_c + sum_alpha);
    let v_b = inst.capacity() - 0.5 * inst.total_volume();
    let qe = &q * DVector::from_element(n, 1.0);
    let offset = DVector::from_fn(n, |i, _| inst.profits()[i] - 0.5 * qe[i]);

    Ok(AlphaFactorization {
        alpha,
        l,
        h,
        rank: r,
        v_b,
        d,
        h_inv,
        offset,
    })
}

/// Value and one subgradient of `P_α`, ordered `(σ, τ)`.
///
/// `sign(0)` contributes zero; the indices with `φ_i = 0` are returned as kinks.
pub fn qkp_alpha_dual_eval(
    inst: &KnapsackInstance,
    fact: &AlphaFactorization,
    zeta: &DualPoint,
) -> Result<(f64, Vec<f64>, Vec<usize>)> {
    if zeta.sigma.len() != fact.rank {
        return Err(Error::InvalidParameter(format!(
            "sigma has {} entries, expected rank {}",
            zeta.sigma.len(),
            fact.rank
        )));
    }
    let phi = fact.phi(inst, zeta);
    let sigma = DVector::from_column_slice(&zeta.sigma);
    let h_inv_sigma = &fact.h_inv * &sigma;
    let value = alpha_value(fact, &phi, &sigma, zeta.tau);

    let sign = DVector::from_fn(inst.n(), |i, _| sign0(phi[i]));
    let mut grad: Vec<f64> = (&fact.l * &sign - h_inv_sigma).iter().copied().collect();
    let s_v: f64 = (0..inst.n()).map(|i| sign[i] * inst.volumes()[i]).sum();
    grad.push(0.5 * s_v - fact.v_b);
    let kinks = (0..inst.n()).filter(|&i| phi[i] == 0.0).collect();
    Ok((value, grad, kinks))
}

fn alpha_value(fact: &AlphaFactorization, phi: &[f64], sigma: &DVector<f64>, tau: f64) -> f64 {
    let abs_sum: f64 = phi.iter().map(|p| p.abs()).sum();
    let quad = sigma.dot(&(&fact.h_inv * sigma));
    -0.5 * abs_sum - 0.5 * quad - tau * fact.v_b + fact.d
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaConfig {
    /// Smoothing widths as multiples of `max|c_i|`, decreasing.
    pub eps_schedule: Vec<f64>,
    pub tol_gap: f64,
    pub max_iter: usize,
    /// `None` means `1e-9·max|c_i|`.
    pub tie_tol: Option<f64>,
    /// Explicit diagonal shift; `None` picks the uniform minimal one.
    pub alpha: Option<Vec<f64>>,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            eps_schedule: vec![1e-2, 1e-4, 1e-6],
            tol_gap: 1e-6,
            max_iter: 500,
            tie_tol: None,
            alpha: None,
        }
    }
}

impl AlphaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_schedule.is_empty()
            || self.eps_schedule.iter().any(|e| !(e.is_finite() && *e > 0.0))
            || self.eps_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::InvalidParameter(
                "eps schedule must be positive and strictly decreasing".into(),
            ));
        }
        if !(self.tol_gap.is_finite() && self.tol_gap > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "tol_gap and max_iter must be positive".into(),
            ));
        }
        if matches!(self.tie_tol, Some(t) if !(t.is_finite() && t >= 0.0)) {
            return Err(Error::InvalidParameter("tie_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Ascent histories of the smoothed duals, one per smoothing width.
#[derive(Debug, Clone, Default)]
pub struct AlphaTrace {
    pub eps: Vec<f64>,
    pub histories: Vec<Vec<f64>>,
}

pub fn qkp_solve_alpha(inst: &KnapsackInstance, cfg: &AlphaConfig) -> Result<SolveReport> {
    qkp_solve_alpha_traced(inst, cfg).map(|(rep, _)| rep)
}

/// Maximizes `P_α` by continuation on `√(φ² + ε²)`, then solves the optimality
/// system exactly on the set of vanishing `φ_i`.
///
/// A feasible sign-recovered `z` with gap `g < min|φ_i|` is the unique optimum:
/// flipping any item costs at least `|φ_i|` against the dual bound.
pub fn qkp_solve_alpha_traced(
    inst: &KnapsackInstance,
    cfg: &AlphaConfig,
) -> Result<(SolveReport, AlphaTrace)> {
    cfg.validate()?;
    let fact = match factorize(inst, cfg.alpha.as_deref()) {
        Ok(f) => f,
        Err(e) => return Err(e),
    };
    let n = inst.n();
    let r = fact.rank;
    let scale = inst.max_abs_profit().max(f64::MIN_POSITIVE);
    let tie_tol = cfg.tie_tol.unwrap_or(1e-9 * inst.max_abs_profit());

    let mut x = DVector::zeros(r + 1);
    x[r] = inst.profits().iter().map(|c| c.abs()).sum::<f64>() / inst.total_volume();
    let opts = AscentOptions {
        max_iter: cfg.max_iter,
        ..AscentOptions::default()
    };
    let mut trace = AlphaTrace::default();
    let mut eps = 0.0;
    for &rel in &cfg.eps_schedule {
        eps = rel * scale;
        let obj = Smoothed {
            inst,
            fact: &fact,
            eps,
        };
        let out = newton_ascent(&obj, x.clone(), &opts).expect("smoothed dual is finite");
        trace.eps.push(eps);
        trace.histories.push(out.history.clone());
        if out.termination == Termination::MaxIter {
            return Err(Error::NonConvergence {
                what: "smoothed shifted dual ascent",
                iterations: out.iterations,
            });
        }
        x = out.x;
    }
    let smoothed = unpack(&x, r);
    let smoothed_value = alpha_value(
        &fact,
        &fact.phi(inst, &smoothed),
        &DVector::from_column_slice(&smoothed.sigma),
        smoothed.tau,
    );

    let polished = [10.0, 1e2, 1e3, 1e4]
        .iter()
        .find_map(|&kappa| polish(inst, &fact, &smoothed, kappa * eps, smoothed_value));

    let mut rep = match polished {
        Some((zeta, active)) => finish(inst, &fact, cfg, zeta, active, tie_tol),
        None => {
            let phi = fact.phi(inst, &smoothed);
            let active = (0..n).filter(|&i| phi[i].abs() <= 1e3 * eps).collect();
            let mut rep = finish(inst, &fact, cfg, smoothed, active, tie_tol);
            rep.residuals.insert("polished".into(), 0.0);
            rep
        }
    };
    rep.residuals.insert("eps".into(), eps);
    rep.residuals.insert("rank".into(), r as f64);
    rep.residuals.insert("smoothed_dual_value".into(), smoothed_value);
    Ok((rep, trace))
}

fn unpack(x: &DVector<f64>, r: usize) -> DualPoint {
    DualPoint::new(x.rows(0, r).iter().copied().collect(), x[r].max(0.0))
}

/// Exact maximizer of `P_α` under the hypothesis that `φ_i = 0` exactly on
/// `T = {|φ_i| ≤ width}` and keeps its sign elsewhere.
fn polish(
    inst: &KnapsackInstance,
    fact: &AlphaFactorization,
    start: &DualPoint,
    width: f64,
    floor_value: f64,
) -> Option<(DualPoint, Vec<usize>)> {
    let n = inst.n();
    let r = fact.rank;
    let phi0 = fact.phi(inst, start);
    let active: Vec<usize> = (0..n).filter(|&i| phi0[i].abs() <= width).collect();
    let signs: Vec<f64> = phi0.iter().map(|p| sign0(*p)).collect();
    let inactive: Vec<usize> = (0..n).filter(|i| !active.contains(i)).collect();
    let v = inst.volumes();

    let tau_modes: &[bool] = if start.tau <= width / v.iter().cloned().fold(f64::MIN_POSITIVE, f64::max)
    {
        &[false, true]
    } else {
        &[true, false]
    };

    for &tau_free in tau_modes {
        let nt = active.len();
        let nv = r + usize::from(tau_free) + nt;
        let ne = nv;
        let mut m = DMatrix::zeros(ne, nv);
        let mut rhs = DVector::zeros(ne);
        let g0 = r + usize::from(tau_free);

        // σ-stationarity: H⁻¹σ − Σ_T g_i L_i = Σ_N s_i L_i.
        for a in 0..r {
            for b in 0..r {
                m[(a, b)] = fact.h_inv[(a, b)];
            }
            for (k, &i) in active.iter().enumerate() {
                m[(a, g0 + k)] = -fact.l[(a, i)];
            }
            rhs[a] = inactive.iter().map(|&i| signs[i] * fact.l[(a, i)]).sum();
        }
        let mut row = r;
        if tau_free {
            // τ-stationarity: −½Σ_T g_i v_i = V_b − ½Σ_N s_i v_i.
            for (k, &i) in active.iter().enumerate() {
                m[(row, g0 + k)] = -0.5 * v[i];
            }
            rhs[row] = fact.v_b - 0.5 * inactive.iter().map(|&i| signs[i] * v[i]).sum::<f64>();
            row += 1;
        }
        // Kinks: 2L_iᵀσ + v_i τ = c_i − ½(Qe)_i.
        for &i in &active {
            for a in 0..r {
                m[(row, a)] = 2.0 * fact.l[(a, i)];
            }
            if tau_free {
                m[(row, r)] = v[i];
            }
            rhs[row] = fact.offset[i];
            row += 1;
        }

        let sol = if nv == 0 {
            DVector::zeros(0)
        } else {
            match m.clone().svd(true, true).solve(&rhs, 1e-13 * m.amax().max(1.0)) {
                Ok(s) => s,
                Err(_) => continue,
            }
        };
        let resid = (&m * &sol - &rhs).amax();
        if !(resid <= 1e-9 * (1.0 + rhs.amax())) {
            continue;
        }
        let sigma: Vec<f64> = sol.rows(0, r).iter().copied().collect();
        // With nothing active the system does not see τ: keep the smoothed one.
        let tau = match (tau_free, nt) {
            (false, _) => 0.0,
            (true, 0) => start.tau,
            (true, _) => sol[r],
        };
        if tau < 0.0 {
            continue;
        }
        let g: Vec<f64> = sol.rows(g0, nt).iter().copied().collect();
        if g.iter().any(|gi| gi.abs() > 1.0 + 1e-9) {
            continue;
        }
        let zeta = DualPoint::new(sigma, tau);
        let phi = fact.phi(inst, &zeta);
        let signs_hold = inactive.iter().all(|&i| phi[i] * signs[i] > 0.0);
        if !signs_hold {
            continue;
        }
        let s_v: f64 = inactive.iter().map(|&i| signs[i] * v[i]).sum::<f64>()
            + active.iter().zip(&g).map(|(&i, gi)| gi * v[i]).sum::<f64>();
        let slope = 0.5 * s_v - fact.v_b;
        let slope_tol = 1e-9 * (1.0 + v.iter().sum::<f64>());
        if tau_free && nt == 0 && slope.abs() > slope_tol && !(slope < 0.0 && tau == 0.0) {
            // A nonzero slope with no kink means the smoothed τ is not optimal.
            continue;
        }
        if !tau_free && slope > slope_tol {
            continue;
        }
        let value = alpha_value(fact, &phi, &DVector::from_column_slice(&zeta.sigma), tau);
        if value < floor_value - 1e-9 * (1.0 + floor_value.abs()) {
            continue;
        }
        return Some((zeta, active.clone()));
    }
    None
}

fn finish(
    inst: &KnapsackInstance,
    fact: &AlphaFactorization,
    cfg: &AlphaConfig,
    zeta: DualPoint,
    active: Vec<usize>,
    tie_tol: f64,
) -> SolveReport {
    let n = inst.n();
    let phi = fact.phi(inst, &zeta);
    let sigma = DVector::from_column_slice(&zeta.sigma);
    let dual = alpha_value(fact, &phi, &sigma, zeta.tau);

    let mut tied: Vec<usize> = (0..n)
        .filter(|&i| phi[i].abs() <= tie_tol || active.contains(&i))
        .collect();
    tied.sort_unstable();
    let base = BinarySelection::from_bools((0..n).map(|i| phi[i] > 0.0 && !tied.contains(&i)));
    let z = complete_ties(inst, &base, &tied);
    let primal = inst.objective(&z);
    let gap = primal - dual;
    let min_abs_phi = phi.iter().fold(f64::INFINITY, |m, p| m.min(p.abs()));

    let status = if !tied.is_empty() {
        SolveStatus::Degenerate
    } else if inst.is_feasible(&z)
        && gap <= cfg.tol_gap * (1.0 + primal.abs())
        && min_abs_phi > gap
    {
        SolveStatus::Unique
    } else {
        SolveStatus::DualBoundaryFailure
    };

    let mut residuals = BTreeMap::new();
    residuals.insert("min_abs_phi".into(), min_abs_phi);
    residuals.insert("selected_volume".into(), inst.volume_of(&z));
    residuals.insert("polished".into(), 1.0);
    residuals.insert(
        "reconstruction_error".into(),
        fact.reconstruction_error(inst),
    );

    SolveReport {
        z,
        theta: theta(inst, zeta.tau),
        dual: zeta,
        primal_value: primal,
        dual_value: dual,
        gap,
        status,
        residuals,
        tied,
        phi: Some(phi),
    }
}

/// Best feasible completion of the tied items (exhaustive up to 16 ties, greedy in
/// index order beyond that).
fn complete_ties(inst: &KnapsackInstance, base: &BinarySelection, tied: &[usize]) -> BinarySelection {
    if tied.is_empty() {
        return base.clone();
    }
    if tied.len() <= 16 {
        let mut best: Option<(f64, BinarySelection)> = None;
        for mask in 0u32..(1 << tied.len()) {
            let mut z = base.clone();
            for (k, &i) in tied.iter().enumerate() {
                z.set(i, mask >> k & 1 == 1);
            }
            if !inst.is_feasible(&z) {
                continue;
            }
            let p = inst.objective(&z);
            if best.as_ref().map_or(true, |(b, _)| p < *b) {
                best = Some((p, z));
            }
        }
        if let Some((_, z)) = best {
            return z;
        }
    }
    let mut z = base.clone();
    for &i in tied {
        z.set(i, true);
        if !inst.is_feasible(&z) {
            z.set(i, false);
        }
    }
    z
}

/// `P_α` with `|φ_i|` replaced by `√(φ_i² + ε²)`.
struct Smoothed<'a> {
    inst: &'a KnapsackInstance,
    fact: &'a AlphaFactorization,
    eps: f64,
}

impl Smoothed<'_> {
    fn phi(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = self.fact.rank;
        let lt_sigma = self.fact.l.tr_mul(&x.rows(0, r).into_owned());
        DVector::from_fn(self.inst.n(), |i, _| {
            self.fact.offset[i] - x[r] * self.inst.volumes()[i] - 2.0 * lt_sigma[i]
        })
    }
}

impl ConcaveObjective for Smoothed<'_> {
    fn dim(&self) -> usize {
        self.fact.rank + 1
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let r = self.fact.rank;
        if !(x[r] >= 0.0) || x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let phi = self.phi(x);
        let sigma = x.rows(0, r);
        let quad = sigma.dot(&(&self.fact.h_inv * sigma));
        let e2 = self.eps * self.eps;
        let smooth: f64 = phi.iter().map(|p| (p * p + e2).sqrt()).sum();
        Some(-0.5 * smooth - 0.5 * quad - x[r] * self.fact.v_b + self.fact.d)
    }

    fn derivatives(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let f = self.value(x)?;
        let r = self.fact.rank;
        let n = self.inst.n();
        let phi = self.phi(x);
        let e2 = self.eps * self.eps;
        let mut grad = DVector::zeros(r + 1);
        let mut hess = DMatrix::zeros(r + 1, r + 1);
        let sigma = x.rows(0, r).into_owned();
        let h_inv_sigma = &self.fact.h_inv * &sigma;
        for a in 0..r {
            grad[a] = -h_inv_sigma[a];
            for b in 0..r {
                hess[(a, b)] = -self.fact.h_inv[(a, b)];
            }
        }
        grad[r] = -self.fact.v_b;
        let mut col = DVector::zeros(r + 1);
        for i in 0..n {
            let root = (phi[i] * phi[i] + e2).sqrt();
            let s = phi[i] / root;
            let curv = e2 / (root * root * root);
            for a in 0..r {
                col[a] = 2.0 * self.fact.l[(a, i)];
            }
            col[r] = self.inst.volumes()[i];
            grad.axpy(0.5 * s, &col, 1.0);
            hess.ger(-0.5 * curv, &col, &col, 1.0);
        }
        Some((f, grad, hess))
    }

    fn nonneg_index(&self) -> Option<usize> {
        Some(self.fact.rank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(capacity: f64) -> KnapsackInstance {
        let q = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, -2.0, 0.0]);
        KnapsackInstance::quadratic(q, vec![1.0, 1.0], vec![1.0, 1.0], capacity).unwrap()
    }

    #[test]
    fn diagonal_factorization() {
        let q = DMatrix::from_diagonal_element(2, 2, 2.0);
        let inst = KnapsackInstance::quadratic(q, vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
        let f = alpha_factorize(&inst, Some(&[0.0, 0.0])).unwrap();
        assert_eq!(f.rank, 2);
        assert!((f.h.clone() - DMatrix::from_diagonal_element(2, 2, 0.5)).norm() < 1e-15);
        assert!((f.l.transpose() * &f.l - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!(f.reconstruction_error(&inst) < 1e-12);
    }

    #[test]
    fn rank_one_pair() {
        let inst = pair(1.0);
        let f = alpha_factorize(&inst, Some(&[1.0, 1.0])).unwrap();
        assert_eq!(f.rank, 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f.l[(0, 0)] - s).abs() < 1e-12 && (f.l[(0, 1)] + s).abs() < 1e-12);
        assert!((f.h[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(f.reconstruction_error(&inst) < 1e-12);
    }

    #[test]
    fn zero_interaction_has_rank_zero() {
        let inst = KnapsackInstance::quadratic(
            DMatrix::zeros(2, 2),
            vec![1.0, 2.0],
            vec![1.0, 1.0],
            1.0,
        )
        .unwrap();
        assert!(matches!(alpha_factorize(&inst, None), Err(Error::RankZero)));
    }

    #[test]
    fn constants_match_definitions() {
        let inst = pair(1.0);
        let f = alpha_factorize(&inst, Some(&[1.0, 1.0])).unwrap();
        assert_eq!(f.v_b, 0.0);
        // ⅛(4 − 4) − ½(2 + 2)
        assert_eq!(f.d, -2.0);
    }

    #[test]
    fn dual_bounds_every_feasible_point() {
        let inst = pair(1.0);
        let f = alpha_factorize(&inst, None).unwrap();
        for (sigma, tau) in [(0.0, 2.0), (0.3, 1.0), (-1.0, 0.1)] {
            let zeta = DualPoint::new(vec![0.0; f.rank], tau);
            let mut zeta = zeta;
            zeta.sigma[0] = sigma;
            let (value, _, _) = qkp_alpha_dual_eval(&inst, &f, &zeta).unwrap();
            assert!(value <= -1.0 + 1e-9, "value {value}");
        }
    }

    #[test]
    fn pair_with_room_for_both() {
        let inst = pair(2.0);
        let (rep, trace) = qkp_solve_alpha_traced(&inst, &AlphaConfig::default()).unwrap();
        assert_eq!(rep.z.as_slice(), &[1, 1]);
        assert_eq!(rep.primal_value, -4.0);
        assert_eq!(rep.status, SolveStatus::Unique);
        assert!(rep.gap.abs() < 1e-6);
        for h in &trace.histories {
            assert!(h.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn pair_with_room_for_one_is_degenerate() {
        let rep = qkp_solve_alpha(&pair(1.0), &AlphaConfig::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Degenerate);
        assert_eq!(rep.primal_value, -1.0);
    }

    #[test]
    fn zero_interaction_matches_linear_path() {
        let q = DMatrix::zeros(3, 3);
        let inst =
            KnapsackInstance::quadratic(q, vec![30.0, 36.0, 40.0], vec![3.0, 4.0, 5.0], 7.0)
                .unwrap();
        let rep = qkp_solve_alpha(&inst, &AlphaConfig::default()).unwrap();
        assert_eq!(rep.z.as_slice(), &[1, 1, 0]);
        assert_eq!(rep.status, SolveStatus::Unique);
        assert!((rep.dual_value + 66.0).abs() < 1e-9);
    }
}
