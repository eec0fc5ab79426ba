//! Invariants of the knapsack solvers checked against exhaustive enumeration and
//! finite differences on random instances.

use cdt_core::knapsack::linear::lkp_dual_slope;
use cdt_core::knapsack::*;
use cdt_core::oracle::brute_force;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn linear_instance(max_n: usize) -> impl Strategy<Value = KnapsackInstance> {
    (1..=max_n)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(1u32..=100, n),
                prop::collection::vec(1u32..=20, n),
                0.1f64..0.9,
            )
        })
        .prop_map(|(c, v, frac)| {
            let total: u32 = v.iter().sum();
            let cap = ((frac * total as f64).floor()).max(1.0);
            KnapsackInstance::linear(
                c.into_iter().map(f64::from).collect(),
                v.into_iter().map(f64::from).collect(),
                cap,
            )
            .unwrap()
        })
}

fn quadratic_instance(max_n: usize) -> impl Strategy<Value = KnapsackInstance> {
    linear_instance(max_n)
        .prop_flat_map(|lin| {
            let n = lin.n();
            (Just(lin), prop::collection::vec(-10.0f64..=0.0, n * n))
        })
        .prop_map(|(lin, raw)| {
            let n = lin.n();
            let q = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Less => raw[i * n + j],
                std::cmp::Ordering::Greater => raw[j * n + i],
            });
            KnapsackInstance::quadratic(q, lin.profits().to_vec(), lin.volumes().to_vec(), lin.capacity())
                .unwrap()
        })
}

/// `½zᵀQz − cᵀz`, evaluated without the library.
fn objective(inst: &KnapsackInstance, z: &BinarySelection) -> f64 {
    let n = inst.n();
    let on = |i: usize| f64::from(z.as_slice()[i]);
    let mut val = -(0..n).map(|i| inst.profits()[i] * on(i)).sum::<f64>();
    if let Some(q) = inst.interaction() {
        for i in 0..n {
            for j in 0..n {
                val += 0.5 * q[(i, j)] * on(i) * on(j);
            }
        }
    }
    val
}

fn assert_matches_oracle(inst: &KnapsackInstance, rep: &SolveReport) -> Result<(), TestCaseError> {
    if rep.status != SolveStatus::Unique {
        return Ok(());
    }
    let oracle = brute_force(inst).unwrap();
    prop_assert!(oracle.is_unique(), "Unique claimed but {} optima", oracle.optimal_sets.len());
    prop_assert_eq!(&oracle.optimal_sets[0], &rep.z);
    let p = objective(inst, &rep.z);
    prop_assert!((p - oracle.optimum).abs() <= 1e-9 * (1.0 + p.abs()));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn analytic_unique_is_the_enumerated_optimum(inst in linear_instance(12)) {
        let rep = lkp_solve_analytic(&inst, None).unwrap();
        assert_matches_oracle(&inst, &rep)?;
    }

    /// A unique report with `τ > 0` fills the capacity exactly; otherwise the
    /// threshold set cannot be certified.
    #[test]
    fn sign_recovery_fills_capacity(inst in linear_instance(12)) {
        let rep = lkp_solve_analytic(&inst, None).unwrap();
        if rep.status == SolveStatus::Unique && rep.dual.tau > 0.0 {
            let used: f64 = (0..inst.n()).map(|i| inst.volumes()[i] * f64::from(rep.z.as_slice()[i])).sum();
            prop_assert_eq!(used, inst.capacity());
        }
    }

    #[test]
    fn weak_duality_for_every_multiplier(inst in linear_instance(10), tau in 0.0f64..120.0, mask in any::<u64>()) {
        let z = BinarySelection::from_mask(mask, inst.n());
        prop_assume!(inst.is_feasible(&z));
        // −Σ max(0, c_i − τv_i) − τV_c
        let dual = -(0..inst.n())
            .map(|i| (inst.profits()[i] - tau * inst.volumes()[i]).max(0.0))
            .sum::<f64>()
            - tau * inst.capacity();
        prop_assert!((lkp_dual_value(&inst, tau) - dual).abs() <= 1e-9 * (1.0 + dual.abs()));
        prop_assert!(objective(&inst, &z) >= dual - 1e-9);
        prop_assert!(duality_gap(&inst, &z, dual) >= -1e-9);
    }

    /// The printed dual differs by a constant, so both share their maximizers.
    #[test]
    fn dual_offset_is_constant(inst in linear_instance(10), t1 in 0.0f64..100.0, t2 in 0.0f64..100.0) {
        let shift = |t| lkp_dual_value_unshifted(&inst, t) - lkp_dual_value(&inst, t);
        prop_assert!((shift(t1) - shift(t2)).abs() <= 1e-9 * (1.0 + shift(t1).abs()));
        let half_sum = 0.5 * inst.profits().iter().sum::<f64>();
        prop_assert!((shift(t1).abs() - half_sum).abs() <= 1e-9 * half_sum);
    }

    #[test]
    fn perturbation_keeps_unique_solutions(inst in linear_instance(12), seed in any::<u64>()) {
        let rep = lkp_solve_analytic(&inst, None).unwrap();
        if rep.status != SolveStatus::Unique {
            return Ok(());
        }
        let (_, pert) = lkp_solve_perturbed(&inst, 1e-9, seed).unwrap();
        prop_assert_eq!(pert.z, rep.z);
    }

    #[test]
    fn lkp_gradient_matches_finite_differences(inst in linear_instance(8), tau in 0.5f64..60.0) {
        let h = 1e-6;
        let kink = (0..inst.n()).any(|i| (inst.profits()[i] / inst.volumes()[i] - tau).abs() < 2.0 * h);
        prop_assume!(!kink);
        let fd = (lkp_dual_value(&inst, tau + h) - lkp_dual_value(&inst, tau - h)) / (2.0 * h);
        let g = lkp_dual_slope(&inst, tau);
        prop_assert!((fd - g).abs() <= 1e-6 * (1.0 + g.abs()), "fd {} vs {}", fd, g);
    }
}

/// Random point of `S_a⁺` with `λ_min(G) ≥ 1`.
fn interior_point(inst: &KnapsackInstance, raw: &[f64], tau: f64) -> DualPoint {
    let lam = inst
        .interaction()
        .map_or(0.0, |q| q.clone().symmetric_eigen().eigenvalues.min());
    let base = 0.5 * (1.0 - lam).max(1.0);
    DualPoint::new(raw.iter().take(inst.n()).map(|r| base + r).collect(), tau)
}

fn beta_gradient_check(inst: &KnapsackInstance, zeta: &DualPoint, beta: f64) -> Result<(), TestCaseError> {
    prop_assert!(zeta.in_penalty_feasible_set(inst.interaction()));
    let (_, g) = qkp_dual_eval_beta(inst, zeta, beta).unwrap();
    let n = inst.n();
    let f = |s: &[f64], t: f64| qkp_dual_eval_beta(inst, &DualPoint::new(s.to_vec(), t), beta).unwrap().0;
    for k in 0..=n {
        let mut s_hi = zeta.sigma.clone();
        let mut s_lo = zeta.sigma.clone();
        let (mut t_hi, mut t_lo) = (zeta.tau, zeta.tau);
        let x = if k < n { zeta.sigma[k] } else { zeta.tau };
        let h = 1e-5 * (1.0 + x.abs());
        if k < n {
            s_hi[k] += h;
            s_lo[k] -= h;
        } else {
            t_hi += h;
            t_lo -= h;
        }
        let fd = (f(&s_hi, t_hi) - f(&s_lo, t_lo)) / (2.0 * h);
        prop_assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()), "component {}: fd {} vs {}", k, fd, g[k]);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn beta_gradient_linear_class(
        inst in linear_instance(8),
        raw in prop::collection::vec(0.0f64..50.0, 8),
        tau in 0.0f64..20.0,
        log_beta in 0.0f64..4.0,
    ) {
        beta_gradient_check(&inst, &interior_point(&inst, &raw, tau), 10f64.powf(log_beta))?;
    }

    #[test]
    fn beta_gradient_quadratic_class(
        inst in quadratic_instance(8),
        raw in prop::collection::vec(0.0f64..50.0, 8),
        tau in 0.0f64..20.0,
        log_beta in 0.0f64..4.0,
    ) {
        beta_gradient_check(&inst, &interior_point(&inst, &raw, tau), 10f64.powf(log_beta))?;
    }

    /// Away from the kinks `φ_i = 0` the subgradient is the gradient.
    #[test]
    fn alpha_subgradient_away_from_kinks(
        inst in quadratic_instance(8),
        raw in prop::collection::vec(-20.0f64..20.0, 8),
        tau in 0.0f64..20.0,
    ) {
        // A well-conditioned shift keeps σᵀH⁻¹σ small enough for central differences.
        let lam = inst.interaction().unwrap().clone().symmetric_eigen().eigenvalues.min();
        let alpha = vec![0.5 * (1.0 - lam).max(0.0) + 0.5; inst.n()];
        let fact = alpha_factorize(&inst, Some(&alpha)).unwrap();
        let r = fact.rank;
        let zeta = DualPoint::new(raw[..r.min(raw.len())].to_vec(), tau);
        prop_assume!(zeta.sigma.len() == r);
        let (_, g, kinks) = qkp_alpha_dual_eval(&inst, &fact, &zeta).unwrap();
        prop_assume!(kinks.is_empty());
        let signs = |z: &DualPoint| fact.phi(&inst, z).iter().map(|p| p.signum()).collect::<Vec<_>>();
        let s0 = signs(&zeta);
        let f = |z: &DualPoint| qkp_alpha_dual_eval(&inst, &fact, z).unwrap().0;
        for k in 0..=r {
            let mut hi = zeta.clone();
            let mut lo = zeta.clone();
            let x = if k < r { zeta.sigma[k] } else { zeta.tau };
            let h = 1e-6 * (1.0 + x.abs());
            if k < r {
                hi.sigma[k] += h;
                lo.sigma[k] -= h;
            } else {
                hi.tau += h;
                lo.tau -= h;
            }
            prop_assume!(signs(&hi) == s0 && signs(&lo) == s0);
            let fd = (f(&hi) - f(&lo)) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()), "component {}: fd {} vs {}", k, fd, g[k]);
        }
    }

    #[test]
    fn alpha_unique_is_the_enumerated_optimum(inst in quadratic_instance(8)) {
        let (rep, trace) = qkp_solve_alpha_traced(&inst, &AlphaConfig::default()).unwrap();
        assert_matches_oracle(&inst, &rep)?;
        for h in &trace.histories {
            prop_assert!(h.windows(2).all(|w| w[1] >= w[0]), "alpha ascent decreased");
        }
    }

    /// Instances with a single dominant item or ample room often certify.
    #[test]
    fn alpha_unique_on_weakly_coupled_instances(inst in linear_instance(7), scale in 0.0f64..0.05) {
        let n = inst.n();
        let q = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { -scale * (1 + (i + j) % 3) as f64 });
        let quad = KnapsackInstance::quadratic(q, inst.profits().to_vec(), inst.volumes().to_vec(), inst.capacity()).unwrap();
        let rep = qkp_solve_alpha(&quad, &AlphaConfig::default()).unwrap();
        assert_matches_oracle(&quad, &rep)?;
    }

    /// `Q = 0` through the quadratic solvers selects what the linear path selects.
    #[test]
    fn zero_interaction_reduces_to_linear(inst in linear_instance(8)) {
        let lin = lkp_solve_analytic(&inst, None).unwrap();
        if lin.status != SolveStatus::Unique {
            return Ok(());
        }
        let n = inst.n();
        let quad = KnapsackInstance::quadratic(DMatrix::zeros(n, n), inst.profits().to_vec(), inst.volumes().to_vec(), inst.capacity()).unwrap();
        let a = qkp_solve_alpha(&quad, &AlphaConfig::default()).unwrap();
        prop_assert_eq!(&a.z, &lin.z);
        let b = qkp_solve_beta(&quad, &PenaltyConfig::for_instance(&quad)).unwrap();
        if b.status == SolveStatus::Unique {
            prop_assert_eq!(&b.z, &lin.z);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn beta_unique_is_the_enumerated_optimum(inst in quadratic_instance(6)) {
        let (rep, trace) = qkp_solve_beta_traced(&inst, &PenaltyConfig::for_instance(&inst)).unwrap();
        assert_matches_oracle(&inst, &rep)?;
        for h in trace.histories.iter().chain(&trace.inner_histories) {
            prop_assert!(h.windows(2).all(|w| w[1] >= w[0]), "beta ascent decreased");
        }
    }

    #[test]
    fn lkp_beta_unique_is_the_enumerated_optimum(inst in linear_instance(8)) {
        let tau0 = {
            let mut r: Vec<f64> = (0..inst.n()).map(|i| inst.profits()[i] / inst.volumes()[i]).collect();
            r.sort_by(f64::total_cmp);
            0.5 * r[r.len() / 2] + 0.25
        };
        let rep = lkp_solve_beta(&inst, &PenaltyConfig::for_instance(&inst), tau0).unwrap();
        assert_matches_oracle(&inst, &rep)?;
    }
}
