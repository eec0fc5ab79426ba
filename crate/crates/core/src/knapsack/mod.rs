//! Canonical-duality solvers for the 0-1 linear and quadratic knapsack problems
//! `min ½zᵀQz − cᵀz  s.t.  vᵀz ≤ V_c, z ∈ {0,1}ⁿ`.

pub mod ascent;
pub mod cubic;
pub mod instance;
pub mod linear;
pub mod penalty;
pub mod report;
pub mod shifted;

pub use cubic::{cubic_residual, lkp_cardano_sigma};
pub use instance::{BinarySelection, KnapsackInstance};
pub use linear::{
    duality_gap, lkp_dual_maximize, lkp_dual_value, lkp_dual_value_unshifted, lkp_recover,
    lkp_solve_analytic, lkp_solve_perturbed, perturb_linear, perturbed_tie_tol,
    LinearDualMaximum,
};
pub use penalty::{
    lkp_penalty_dual_value, lkp_solve_beta, lkp_tau_update, qkp_dual_eval_beta,
    qkp_dual_value_limit, qkp_solve_beta, qkp_solve_beta_traced, PenaltyTrace,
};
pub use report::{default_tie_tol, theta, DualPoint, PenaltyConfig, SolveReport, SolveStatus};
pub use shifted::{
    alpha_factorize, qkp_alpha_dual_eval, qkp_solve_alpha, qkp_solve_alpha_traced, AlphaConfig,
    AlphaFactorization, AlphaTrace,
};
