//! Alternating lower-level equilibrium and upper-level knapsack with a
//! geometric volume reduction.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem2d::{
    analyze_with, DensityField, ElasticModel, ElementEnergies, ResidualCheck, SolveOptions,
};
use crate::knapsack::{
    default_tie_tol, lkp_solve_analytic, lkp_solve_beta, lkp_solve_perturbed, qkp_solve_alpha,
    qkp_solve_beta, AlphaConfig, BinarySelection, KnapsackInstance, PenaltyConfig, SolveReport,
    SolveStatus,
};

/// `V_γ = max{V_c, μ·V_{γ−1}}` starting from `V_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeSchedule {
    pub v0: f64,
    pub v_c: f64,
    pub mu: f64,
}

impl VolumeSchedule {
    pub fn new(v0: f64, v_c: f64, mu: f64) -> Result<Self> {
        if !(v0.is_finite() && v_c.is_finite() && 0.0 < v_c && v_c < v0) {
            return Err(Error::InvalidParameter(format!(
                "volumes must satisfy 0 < V_c < V_0, got V_c = {v_c}, V_0 = {v0}"
            )));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::InvalidParameter(format!("mu = {mu} must lie in (0, 1)")));
        }
        Ok(Self { v0, v_c, mu })
    }

    /// `(V_1, …, V_γc)`, ending with exactly `V_c`.
    pub fn volumes(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut v = self.v0;
        loop {
            v = (self.mu * v).max(self.v_c);
            out.push(v);
            if v <= self.v_c {
                return out;
            }
        }
    }

    /// `γ_c = ⌈log(V_c/V_0) / log μ⌉`, at least 1.
    pub fn steps(&self) -> usize {
        self.volumes().len()
    }
}

pub fn volume_schedule(v0: f64, v_c: f64, mu: f64) -> Result<Vec<f64>> {
    Ok(VolumeSchedule::new(v0, v_c, mu)?.volumes())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpperSolver {
    #[default]
    LkpAnalytic,
    LkpBeta,
    QkpBeta,
    QkpAlpha,
}

impl UpperSolver {
    pub fn is_quadratic(&self) -> bool {
        matches!(self, UpperSolver::QkpBeta | UpperSolver::QkpAlpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdtConfig {
    /// Target volume, in element volumes.
    pub v_c: f64,
    pub mu: f64,
    /// Stopping threshold on successive knapsack values; `None` means
    /// `1e-4·|P_q(z¹)|`.
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub solver: UpperSolver,
    /// Fixed-volume iterations allowed once the schedule reaches `V_c`.
    #[serde(default = "default_max_fixed")]
    pub max_fixed_volume_iters: usize,
    /// Relative profit perturbation for the degeneracy retry.
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    #[serde(default)]
    pub seed: u64,
    /// Penalty weights for the β solvers; `None` uses the per-instance default.
    #[serde(default)]
    pub beta_schedule: Option<Vec<f64>>,
    #[serde(default = "default_fem")]
    pub fem: SolveOptions,
    #[serde(default)]
    pub profit: ProfitWeighting,
}

/// How element energies become knapsack profits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfitWeighting {
    /// `c_e`, the energy element `e` would store if solid.
    #[default]
    Unscaled,
    /// `(ε_min + (1 − ε_min)z_e^{γ−1})·c_e`, the energy actually stored.
    Stiffness,
}

fn default_max_fixed() -> usize {
    10
}

fn default_perturbation() -> f64 {
    1e-9
}

/// Intermediate designs can leave the load on a void-connected island, where only
/// the backward error is attainable; see [`ResidualCheck::Backward`].
fn default_fem() -> SolveOptions {
    SolveOptions {
        check: ResidualCheck::Backward,
        ..Default::default()
    }
}

impl CdtConfig {
    pub fn new(v_c: f64, mu: f64) -> Self {
        Self {
            v_c,
            mu,
            omega: None,
            solver: UpperSolver::default(),
            max_fixed_volume_iters: default_max_fixed(),
            perturbation: default_perturbation(),
            seed: 0,
            beta_schedule: None,
            fem: default_fem(),
            profit: ProfitWeighting::default(),
        }
    }

    pub fn validate(&self, v0: f64) -> Result<()> {
        if !(self.v_c.is_finite() && self.v_c > 0.0 && self.v_c <= v0) {
            return Err(Error::InvalidParameter(format!(
                "V_c = {} must lie in (0, V_0 = {v0}]",
                self.v_c
            )));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidParameter(format!("mu = {} must lie in (0, 1)", self.mu)));
        }
        if matches!(self.omega, Some(w) if !(w.is_finite() && w > 0.0)) {
            return Err(Error::InvalidParameter("omega must be positive".into()));
        }
        if !(self.perturbation > 0.0 && self.perturbation < 1.0) {
            return Err(Error::InvalidParameter("perturbation must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One pass of the alternation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub gamma: usize,
    pub volume: f64,
    pub tau: f64,
    /// `P_q(z^γ)` for the profits `c(x^γ)`.
    pub knapsack_value: f64,
    /// `fᵀx^γ`, the compliance of `z^{γ−1}`.
    pub compliance: f64,
    pub status: SolveStatus,
    /// The first solve was degenerate and the perturbed instance was solved.
    pub perturbed: bool,
    /// Both solves were degenerate and the tie-break rule chose `z^γ`.
    pub tie_broken: bool,
    pub selected_volume: f64,
    pub relative_residual: f64,
    pub z: BinarySelection,
    #[serde(skip)]
    pub fem_seconds: f64,
    #[serde(skip)]
    pub knapsack_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(s: &str) -> Result<Self> {
        let records = s
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdtResult {
    pub z: DensityField,
    /// Equilibrium displacement of the final design.
    pub x: Vec<f64>,
    /// Energies and compliance of the final design.
    pub energies: ElementEnergies,
    pub trace: IterationTrace,
    pub converged: bool,
    pub omega: f64,
    pub schedule: Vec<f64>,
    pub seconds: f64,
}

/// Builds `Q(x)` for the quadratic upper level from the displacement and the
/// element energies.
pub type InteractionFn<'a> = dyn Fn(&[f64], &[f64]) -> Result<DMatrix<f64>> + 'a;

pub fn cdt_solve(model: &ElasticModel, cfg: &CdtConfig) -> Result<CdtResult> {
    cdt_solve_with(model, cfg, None)
}

/// Algorithm loop: equilibrium at `z^{γ−1}`, energies, `V_γ`, knapsack for `z^γ`.
///
/// Stops once `V_γ ≤ V_c` and either `|P_q(z^γ) − P_q(z^{γ−1})| ≤ ω` or
/// `z^γ = z^{γ−1}` (the next pass would reproduce the same values).
pub fn cdt_solve_with(
    model: &ElasticModel,
    cfg: &CdtConfig,
    interaction: Option<&InteractionFn<'_>>,
) -> Result<CdtResult> {
    let start = Instant::now();
    let mesh = model.mesh();
    let n = mesh.n_elements();
    let v0 = n as f64;
    cfg.validate(v0)?;
    if interaction.is_some() && !cfg.solver.is_quadratic() {
        return Err(Error::InvalidParameter(
            "an interaction callback needs a quadratic upper-level solver".into(),
        ));
    }
    let schedule = if cfg.v_c < v0 {
        VolumeSchedule::new(v0, cfg.v_c, cfg.mu)?.volumes()
    } else {
        vec![cfg.v_c]
    };
    let max_iters = schedule.len() + cfg.max_fixed_volume_iters;

    let mut z = DensityField::solid(mesh);
    let mut trace = IterationTrace::default();
    let mut omega = cfg.omega;
    let mut converged = false;
    let mut tau_hint = None;

    for gamma in 1..=max_iters {
        let t0 = Instant::now();
        let (disp, energies) = analyze_with(model, &z, cfg.fem)?;
        let fem_seconds = t0.elapsed().as_secs_f64();

        let volume = schedule.get(gamma - 1).copied().unwrap_or(cfg.v_c);
        let t1 = Instant::now();
        let eps = model.eps_min();
        let profits = energies
            .c
            .iter()
            .enumerate()
            .map(|(e, &c)| match cfg.profit {
                ProfitWeighting::Stiffness if !z.is_solid(e) => eps * c,
                _ => c,
            })
            .map(|c| c.max(f64::MIN_POSITIVE))
            .collect();
        let q = interaction.map(|f| f(&disp.x, &energies.c)).transpose()?;
        // Unit volumes: flooring the capacity keeps the feasible set and avoids a
        // fractional critical item at the dual optimum.
        let capacity = (volume + 1e-9).floor().max(1.0);
        let inst = KnapsackInstance::new(profits, vec![1.0; n], capacity, q)?;
        let step = upper_level(&inst, cfg, tau_hint, gamma)?;
        let knapsack_seconds = t1.elapsed().as_secs_f64();
        tau_hint = Some(step.report.dual.tau).filter(|t| *t > 0.0);

        let value = inst.objective(&step.report.z);
        let omega_val = *omega.get_or_insert(1e-4 * value.abs());
        let unchanged = step.report.z == *z.selection();
        let prev_value = trace.records.last().map(|r| r.knapsack_value);
        trace.records.push(IterationRecord {
            gamma,
            volume,
            tau: step.report.dual.tau,
            knapsack_value: value,
            compliance: energies.compliance,
            status: step.report.status,
            perturbed: step.perturbed,
            tie_broken: step.tie_broken,
            selected_volume: inst.volume_of(&step.report.z),
            relative_residual: disp.relative_residual,
            z: step.report.z.clone(),
            fem_seconds,
            knapsack_seconds,
        });
        log::debug!(
            "gamma {gamma}: V = {volume:.4}, P_q = {value:.6e}, C = {:.6e}, {}",
            energies.compliance,
            step.report.status
        );
        z = DensityField::new(mesh, step.report.z)?;

        let at_target = volume <= cfg.v_c;
        let small_change = prev_value.is_some_and(|p| (value - p).abs() <= omega_val);
        if at_target && (small_change || unchanged) {
            converged = true;
            break;
        }
    }

    let (disp, energies) = analyze_with(model, &z, cfg.fem)?;
    Ok(CdtResult {
        z,
        x: disp.x,
        energies,
        trace,
        converged,
        omega: omega.unwrap_or(0.0),
        schedule,
        seconds: start.elapsed().as_secs_f64(),
    })
}

struct UpperStep {
    report: SolveReport,
    perturbed: bool,
    tie_broken: bool,
}

fn upper_level(
    inst: &KnapsackInstance,
    cfg: &CdtConfig,
    tau_hint: Option<f64>,
    gamma: usize,
) -> Result<UpperStep> {
    let tau0 = tau_hint.unwrap_or_else(|| interior_tau(inst));
    let report = solve_knapsack(inst, cfg.solver, cfg.beta_schedule.as_deref(), tau0)?;
    let mut step = UpperStep {
        report,
        perturbed: false,
        tie_broken: false,
    };
    let retry = matches!(
        step.report.status,
        SolveStatus::Degenerate | SolveStatus::DualBoundaryFailure
    );
    if !retry || !inst.is_linear() {
        return feasible(inst, step);
    }

    let seed = cfg.seed.wrapping_add(gamma as u64);
    let (_, mut report) = lkp_solve_perturbed(inst, cfg.perturbation, seed)?;
    step.perturbed = true;
    if report.status != SolveStatus::Degenerate {
        // Re-evaluate the selection against the unperturbed profits.
        report.primal_value = inst.objective(&report.z);
        report.gap = report.primal_value - report.dual_value;
        step.report = report;
        return feasible(inst, step);
    }
    if step.report.status != SolveStatus::Degenerate {
        step.report = lkp_solve_analytic(inst, None)?;
    }
    step.report.z = lexicographic_tie_break(inst, &step.report);
    step.report.primal_value = inst.objective(&step.report.z);
    step.report.gap = step.report.primal_value - step.report.dual_value;
    step.tie_broken = true;
    feasible(inst, step)
}

fn feasible(inst: &KnapsackInstance, step: UpperStep) -> Result<UpperStep> {
    if inst.is_feasible(&step.report.z) {
        Ok(step)
    } else {
        Err(Error::DualBoundary(format!(
            "upper-level solver returned an infeasible selection ({})",
            step.report.status
        )))
    }
}

/// Solves `inst` with the chosen method. `beta_schedule` overrides the default
/// penalty weights of the β solvers; `tau0` starts the LKP β alternation.
pub fn solve_knapsack(
    inst: &KnapsackInstance,
    solver: UpperSolver,
    beta_schedule: Option<&[f64]>,
    tau0: f64,
) -> Result<SolveReport> {
    let penalty = || {
        let mut p = PenaltyConfig::for_instance(inst);
        if let Some(b) = beta_schedule {
            p.beta_schedule = b.to_vec();
        }
        p
    };
    match solver {
        UpperSolver::LkpAnalytic => lkp_solve_analytic(inst, None),
        UpperSolver::LkpBeta => lkp_solve_beta(inst, &penalty(), tau0),
        UpperSolver::QkpBeta => qkp_solve_beta(inst, &penalty()),
        UpperSolver::QkpAlpha => qkp_solve_alpha(inst, &AlphaConfig::default()),
    }
}

/// A starting multiplier strictly between two adjacent distinct ratios `c_i/v_i`
/// near the median, so no `θ_i` vanishes at the first step.
pub fn interior_tau(inst: &KnapsackInstance) -> f64 {
    let mut r: Vec<f64> = inst
        .profits()
        .iter()
        .zip(inst.volumes())
        .map(|(c, v)| c / v)
        .collect();
    r.sort_by(f64::total_cmp);
    r.dedup();
    let k = r.len() / 2;
    if k == 0 {
        return 0.5 * r[0];
    }
    0.5 * (r[k - 1] + r[k])
}

/// Keeps the strictly profitable items of a degenerate report and fills the tied
/// ones from the highest index down, which yields the lexicographically smallest
/// selection among the tie completions.
fn lexicographic_tie_break(inst: &KnapsackInstance, report: &SolveReport) -> BinarySelection {
    let tie_tol = default_tie_tol(inst);
    let mut z = BinarySelection::from_bools(report.theta.iter().map(|t| *t > tie_tol));
    let mut used = inst.volume_of(&z);
    for &i in report.tied.iter().rev() {
        let v = inst.volumes()[i];
        if used + v <= inst.capacity() + inst.volume_tol() {
            z.set(i, true);
            used += v;
        }
    }
    z
}
