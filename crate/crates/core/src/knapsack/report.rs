use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use super::instance::{BinarySelection, KnapsackInstance};
use crate::error::{Error, Result};

/// Canonical dual variables `ζ = (σ, τ)`.
///
/// `σ` has length `n` for the penalty-form dual and length `r` for the shifted form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub sigma: Vec<f64>,
    pub tau: f64,
}

impl DualPoint {
    pub fn new(sigma: Vec<f64>, tau: f64) -> Self {
        Self { sigma, tau }
    }

    /// `G(σ) = Q + 2·Diag(σ)`.
    pub fn g_matrix(&self, q: Option<&DMatrix<f64>>) -> DMatrix<f64> {
        let n = self.sigma.len();
        let mut g = match q {
            Some(q) => q.clone(),
            None => DMatrix::zeros(n, n),
        };
        for i in 0..n {
            g[(i, i)] += 2.0 * self.sigma[i];
        }
        g
    }

    /// Membership in `S_a⁺ = {τ > 0, G(σ) ≻ 0}`, certified by a Cholesky factorization.
    pub fn in_penalty_feasible_set(&self, q: Option<&DMatrix<f64>>) -> bool {
        self.tau > 0.0 && spd_cholesky(self.g_matrix(q)).is_some()
    }

    /// The shifted-form dual only needs `τ > 0`.
    pub fn in_shifted_feasible_set(&self) -> bool {
        self.tau > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Binary, feasible, zero duality gap, and no other optimum can exist.
    Unique,
    /// Some `θ_i` (or `φ_i`) vanishes at the dual optimum: a tie witness exists.
    Degenerate,
    /// The dual ascent ended on, or could not certify away from, the boundary of the
    /// dual feasible set.
    DualBoundaryFailure,
    /// The capacity does not bind: every item fits.
    CapacitySlack,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Unique => "Unique",
            SolveStatus::Degenerate => "Degenerate",
            SolveStatus::DualBoundaryFailure => "DualBoundaryFailure",
            SolveStatus::CapacitySlack => "CapacitySlack",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tolerances and the penalty schedule shared by the dual solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    /// Increasing penalty weights; the last entry plays the role of `β_c`.
    pub beta_schedule: Vec<f64>,
    pub tol_residual: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
    /// Continuous components within this distance of {0, 1} are rounded.
    pub round_tol: f64,
    /// Absolute threshold below which `|θ_i|` or `|φ_i|` counts as a tie.
    /// `None` means `1e-9·max|c_i|`.
    pub tie_tol: Option<f64>,
}

impl PenaltyConfig {
    pub fn for_instance(inst: &KnapsackInstance) -> Self {
        let scale = inst.max_abs_profit().max(1.0);
        Self {
            beta_schedule: [1e2, 1e4, 1e6, 1e8].iter().map(|b| b * scale).collect(),
            tol_residual: 1e-12,
            tol_gap: 1e-6,
            max_iter: 500,
            round_tol: 1e-4,
            tie_tol: None,
        }
    }

    /// A single fixed penalty weight.
    pub fn with_beta(inst: &KnapsackInstance, beta: f64) -> Self {
        Self {
            beta_schedule: vec![beta],
            ..Self::for_instance(inst)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta_schedule.is_empty() {
            return Err(Error::InvalidParameter("beta schedule is empty".into()));
        }
        if self.beta_schedule.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidParameter("beta values must be positive".into()));
        }
        if self.beta_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "beta schedule must be strictly increasing".into(),
            ));
        }
        let tols = [self.tol_residual, self.tol_gap, self.round_tol];
        if tols.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if matches!(self.tie_tol, Some(t) if !(t.is_finite() && t >= 0.0)) {
            return Err(Error::InvalidParameter("tie_tol must be nonnegative".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn tie_tol_for(&self, inst: &KnapsackInstance) -> f64 {
        self.tie_tol.unwrap_or_else(|| default_tie_tol(inst))
    }
}

pub fn default_tie_tol(inst: &KnapsackInstance) -> f64 {
    1e-9 * inst.max_abs_profit()
}

/// Outcome of a knapsack solve together with its dual certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub z: BinarySelection,
    pub dual: DualPoint,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `primal_value − dual_value`; nonnegative by weak duality.
    pub gap: f64,
    pub status: SolveStatus,
    pub residuals: BTreeMap<String, f64>,
    /// `θ_i = c_i − τ v_i` at the reported dual point.
    pub theta: Vec<f64>,
    /// Indices whose sign indicator vanished within the tie tolerance.
    pub tied: Vec<usize>,
    /// `φ(ζ)` for the shifted-form dual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
}

impl SolveReport {
    pub fn is_unique(&self) -> bool {
        self.status == SolveStatus::Unique
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Relative pivot floor below which a matrix is not treated as positive definite.
const PIVOT_TOL: f64 = 1e-14;

/// Cholesky factor of a symmetric matrix, or `None` unless every pivot `L_ii²`
/// exceeds `1e-14·max_j |A_jj|`; rounding can otherwise let an exactly singular
/// matrix through.
pub fn spd_cholesky(a: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = a.diagonal().amax();
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let floor = PIVOT_TOL * scale;
    (0..l.nrows())
        .all(|i| l[(i, i)] * l[(i, i)] > floor)
        .then_some(chol)
}

/// `θ_i = c_i − τ v_i`.
pub fn theta(inst: &KnapsackInstance, tau: f64) -> Vec<f64> {
    inst.profits()
        .iter()
        .zip(inst.volumes())
        .map(|(c, v)| c - tau * v)
        .collect()
}
