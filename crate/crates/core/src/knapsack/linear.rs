//! Linear knapsack through its one-dimensional concave dual.
//!
//! With `θ_i(τ) = c_i − τ v_i`, the Lagrangian dual of `min −cᵀz, vᵀz ≤ V_c` is
//! `D(τ) = −½Σ(|θ_i| + θ_i) − τV_c`, a concave piecewise-linear function with
//! breakpoints at the ratios `c_i / v_i`. The binary solution is read off the signs
//! of `θ` at the maximizer.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::instance::{BinarySelection, KnapsackInstance};
use super::report::{default_tie_tol, theta, DualPoint, SolveReport, SolveStatus};
use crate::error::{Error, Result};

/// Relative gap accepted as zero when certifying a recovered selection.
const GAP_TOL: f64 = 1e-9;

/// Tie tolerance used after a perturbation, as a fraction of `magnitude·max c`.
const PERTURBED_TIE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDualMaximum {
    /// Chosen maximizer (midpoint of the optimal interval).
    pub tau: f64,
    /// The full set of maximizers `[lo, hi]`; `lo == hi` at a breakpoint.
    pub interval: (f64, f64),
    pub dual_value: f64,
    pub status: SolveStatus,
}

/// Lagrangian dual `−½Σ(|θ_i| + θ_i) − τV_c`.
pub fn lkp_dual_value(inst: &KnapsackInstance, tau: f64) -> f64 {
    let pos: f64 = theta(inst, tau).iter().map(|t| t.max(0.0)).sum();
    -pos - tau * inst.capacity()
}

/// `−½Σ(|θ_i| − τv_i) − τV_c`: the same function shifted by `+½Σc_i`.
///
/// Kept as a diagnostic; it shares every maximizer with [`lkp_dual_value`].
pub fn lkp_dual_value_unshifted(inst: &KnapsackInstance, tau: f64) -> f64 {
    let s: f64 = inst
        .profits()
        .iter()
        .zip(inst.volumes())
        .map(|(c, v)| (c - tau * v).abs() - tau * v)
        .sum();
    -0.5 * s - tau * inst.capacity()
}

/// One-sided slope of the dual just above `tau`: `Σ_{c_i/v_i > τ} v_i − V_c`.
pub fn lkp_dual_slope(inst: &KnapsackInstance, tau: f64) -> f64 {
    let above: f64 = inst
        .profits()
        .iter()
        .zip(inst.volumes())
        .filter(|(c, v)| **c / **v > tau)
        .map(|(_, v)| v)
        .sum();
    above - inst.capacity()
}

/// Maximizes the breakpoint dual exactly by a sorted sweep over the ratios.
pub fn lkp_dual_maximize(inst: &KnapsackInstance) -> Result<LinearDualMaximum> {
    inst.require_linear_positive()?;
    let cap = inst.capacity();
    let vol_tol = inst.volume_tol();

    if cap > inst.total_volume() + vol_tol {
        return Ok(LinearDualMaximum {
            tau: 0.0,
            interval: (0.0, 0.0),
            dual_value: lkp_dual_value(inst, 0.0),
            status: SolveStatus::CapacitySlack,
        });
    }

    let ratios: Vec<f64> = inst
        .profits()
        .iter()
        .zip(inst.volumes())
        .map(|(c, v)| c / v)
        .collect();
    let mut order: Vec<usize> = (0..inst.n()).collect();
    order.sort_by(|&a, &b| {
        ratios[b]
            .partial_cmp(&ratios[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    // Group equal ratios; each group is one breakpoint.
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some((r, w)) if *r == ratios[i] => *w += inst.volumes()[i],
            _ => groups.push((ratios[i], inst.volumes()[i])),
        }
    }

    let mut filled = 0.0;
    for (g, &(ratio, weight)) in groups.iter().enumerate() {
        let after = filled + weight;
        if (after - cap).abs() <= vol_tol {
            let lo = groups.get(g + 1).map_or(0.0, |&(r, _)| r);
            let tau = 0.5 * (lo + ratio);
            return Ok(LinearDualMaximum {
                tau,
                interval: (lo, ratio),
                dual_value: lkp_dual_value(inst, tau),
                status: SolveStatus::Unique,
            });
        }
        if after > cap {
            return Ok(LinearDualMaximum {
                tau: ratio,
                interval: (ratio, ratio),
                dual_value: lkp_dual_value(inst, ratio),
                status: SolveStatus::Degenerate,
            });
        }
        filled = after;
    }
    unreachable!("capacity below total volume is crossed by the sweep")
}

/// Recovers `z_i = ½(sign θ_i + 1)` at a given multiplier and certifies it.
///
/// Tied items (`|θ_i| ≤ tie_tol`) are filled in index order while they fit, which
/// keeps the returned selection feasible; the report is then `Degenerate`.
pub fn lkp_recover(inst: &KnapsackInstance, tau: f64, tie_tol: f64) -> SolveReport {
    let theta = theta(inst, tau);
    let tied: Vec<usize> = (0..inst.n()).filter(|&i| theta[i].abs() <= tie_tol).collect();

    let mut z = BinarySelection::from_bools(theta.iter().map(|t| *t > tie_tol));
    let mut used = inst.volume_of(&z);
    for &i in &tied {
        let v = inst.volumes()[i];
        if used + v <= inst.capacity() + inst.volume_tol() {
            z.set(i, true);
            used += v;
        }
    }

    let primal = inst.objective(&z);
    let dual = lkp_dual_value(inst, tau);
    let gap = duality_gap(inst, &z, dual);
    let min_abs_theta = theta.iter().fold(f64::INFINITY, |m, t| m.min(t.abs()));
    let fills = (used - inst.capacity()).abs() <= inst.volume_tol();

    let status = if !tied.is_empty() {
        SolveStatus::Degenerate
    } else if !inst.is_feasible(&z) {
        SolveStatus::DualBoundaryFailure
    } else if tau == 0.0 {
        SolveStatus::CapacitySlack
    } else if fills && gap <= GAP_TOL * (1.0 + primal.abs()) && min_abs_theta > gap {
        SolveStatus::Unique
    } else {
        SolveStatus::DualBoundaryFailure
    };

    let mut residuals = std::collections::BTreeMap::new();
    residuals.insert("selected_volume".to_string(), used);
    residuals.insert("min_abs_theta".to_string(), min_abs_theta);
    residuals.insert(
        "dual_value_unshifted".to_string(),
        lkp_dual_value_unshifted(inst, tau),
    );

    SolveReport {
        z,
        dual: DualPoint::new(Vec::new(), tau),
        primal_value: primal,
        dual_value: dual,
        gap,
        status,
        residuals,
        theta,
        tied,
        phi: None,
    }
}

/// Breakpoint maximization followed by sign recovery.
pub fn lkp_solve_analytic(inst: &KnapsackInstance, tie_tol: Option<f64>) -> Result<SolveReport> {
    let max = lkp_dual_maximize(inst)?;
    let tie_tol = tie_tol.unwrap_or_else(|| default_tie_tol(inst));
    let mut report = lkp_recover(inst, max.tau, tie_tol);
    report
        .residuals
        .insert("interval_lo".to_string(), max.interval.0);
    report
        .residuals
        .insert("interval_hi".to_string(), max.interval.1);
    Ok(report)
}

/// Copy of `inst` with `c_i ← c_i(1 + δ_i)`, `δ_i` uniform in `(−magnitude, magnitude)`.
pub fn perturb_linear(
    inst: &KnapsackInstance,
    magnitude: f64,
    seed: u64,
) -> Result<KnapsackInstance> {
    if !(magnitude.is_finite() && magnitude > 0.0 && magnitude < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "perturbation magnitude {magnitude} must lie in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profits = inst
        .profits()
        .iter()
        .map(|c| {
            let delta = loop {
                let d: f64 = rng.gen_range(-magnitude..magnitude);
                if d != -magnitude {
                    break d;
                }
            };
            c * (1.0 + delta)
        })
        .collect();
    inst.with_profits(profits)
}

/// Tie tolerance matched to a perturbation of the given magnitude.
pub fn perturbed_tie_tol(inst: &KnapsackInstance, magnitude: f64) -> f64 {
    PERTURBED_TIE_FRACTION * magnitude * inst.max_abs_profit()
}

/// Perturbs the profits and solves the perturbed instance by the breakpoint dual.
///
/// The report refers to the perturbed instance, which is returned alongside it.
pub fn lkp_solve_perturbed(
    inst: &KnapsackInstance,
    magnitude: f64,
    seed: u64,
) -> Result<(KnapsackInstance, SolveReport)> {
    let perturbed = perturb_linear(inst, magnitude, seed)?;
    let tie_tol = perturbed_tie_tol(&perturbed, magnitude);
    let report = lkp_solve_analytic(&perturbed, Some(tie_tol))?;
    Ok((perturbed, report))
}

/// `P(z) − dual_value`; nonnegative for any valid dual bound.
pub fn duality_gap(inst: &KnapsackInstance, z: &BinarySelection, dual_value: f64) -> f64 {
    inst.objective(z) - dual_value
}
