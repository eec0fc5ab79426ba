//! Exhaustive and dynamic-programming ground truth for small knapsack instances.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knapsack::{BinarySelection, KnapsackInstance};

/// Largest instance [`brute_force`] accepts.
pub const MAX_BRUTE_FORCE_N: usize = 25;

/// Objective values within this relative distance of the optimum count as ties.
///
/// Co-optimal selections evaluated in floating point can differ by a few ulps.
pub const TIE_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub optimum: f64,
    /// Every feasible minimizer, in lexicographic order.
    pub optimal_sets: Vec<BinarySelection>,
    pub count_feasible: u64,
}

impl OracleResult {
    pub fn is_unique(&self) -> bool {
        self.optimal_sets.len() == 1
    }

    pub fn contains(&self, z: &BinarySelection) -> bool {
        self.optimal_sets.iter().any(|s| s == z)
    }
}

/// Minimizes `½zᵀQz − cᵀz` over all feasible `z ∈ {0,1}ⁿ`.
///
/// Selections are visited in Gray-code order so each step updates the volume and
/// objective in `O(n)`; candidates near the running best are then re-evaluated
/// from scratch, so the reported optimum is exactly [`KnapsackInstance::objective`]
/// of the reported sets.
pub fn brute_force(inst: &KnapsackInstance) -> Result<OracleResult> {
    let n = inst.n();
    if n > MAX_BRUTE_FORCE_N {
        return Err(Error::TooLarge {
            n,
            max: MAX_BRUTE_FORCE_N,
        });
    }
    let c = inst.profits();
    let v = inst.volumes();
    let q = inst.interaction();
    let cap = inst.capacity() + inst.volume_tol();
    let scale: f64 = c.iter().map(|x| x.abs()).sum::<f64>()
        + q.map_or(0.0, |q| q.iter().map(|x| x.abs()).sum::<f64>());
    let slack = 1e-9 * (1.0 + scale);

    // h[k] = Σ_{j ∈ S} Q_kj for the current set S.
    let mut h = vec![0.0; n];
    let mut z = vec![false; n];
    let mut value = 0.0;
    let mut volume = 0.0;
    let mut best = 0.0;
    let mut candidates: Vec<u64> = vec![0];
    let mut count_feasible = 1u64;
    let mut mask = 0u64;

    for step in 1u64..(1u64 << n) {
        let k = step.trailing_zeros() as usize;
        let qkk = q.map_or(0.0, |q| q[(k, k)]);
        let sign = if z[k] { -1.0 } else { 1.0 };
        // Adding k changes ½zᵀQz by h_k + ½Q_kk; removing it by −(h_k − ½Q_kk).
        let dq = if z[k] { -(h[k] - 0.5 * qkk) } else { h[k] + 0.5 * qkk };
        value += dq - sign * c[k];
        volume += sign * v[k];
        z[k] = !z[k];
        mask ^= 1 << k;
        if let Some(q) = q {
            for (j, hj) in h.iter_mut().enumerate() {
                *hj += sign * q[(j, k)];
            }
        }
        if volume > cap {
            continue;
        }
        count_feasible += 1;
        if value < best - slack {
            best = value;
            candidates.clear();
            candidates.push(mask);
        } else if value <= best + slack {
            best = best.min(value);
            candidates.push(mask);
        }
    }

    let mut exact: Vec<(f64, BinarySelection)> = candidates
        .into_iter()
        .map(|m| BinarySelection::from_mask(m, n))
        .filter(|s| inst.is_feasible(s))
        .map(|s| (inst.objective(&s), s))
        .collect();
    let optimum = exact
        .iter()
        .map(|(p, _)| *p)
        .fold(f64::INFINITY, f64::min);
    let tol = TIE_REL * (1.0 + optimum.abs());
    exact.retain(|(p, _)| *p <= optimum + tol);
    let mut optimal_sets: Vec<BinarySelection> = exact.into_iter().map(|(_, s)| s).collect();
    optimal_sets.sort_by(|a, b| a.as_slice().cmp(b.as_slice()));

    Ok(OracleResult {
        optimum,
        optimal_sets,
        count_feasible,
    })
}

/// Exact linear-knapsack optimum by the capacity-indexed dynamic program.
pub fn dp_lkp(inst: &KnapsackInstance) -> Result<f64> {
    if !inst.is_linear() {
        return Err(Error::InvalidInstance(
            "dynamic program requires a linear instance".into(),
        ));
    }
    let as_int = |x: f64, what: &str| -> Result<usize> {
        if x.fract() != 0.0 || x < 0.0 || x > 1e8 {
            return Err(Error::NonInteger(format!("{what} = {x}")));
        }
        Ok(x as usize)
    };
    let cap = as_int(inst.capacity(), "capacity")?;
    let volumes = inst
        .volumes()
        .iter()
        .enumerate()
        .map(|(i, v)| as_int(*v, &format!("v[{i}]")))
        .collect::<Result<Vec<_>>>()?;

    // best[w] = largest profit with total volume ≤ w.
    let mut best = vec![0.0_f64; cap + 1];
    for (&vi, &ci) in volumes.iter().zip(inst.profits()) {
        if ci <= 0.0 || vi > cap {
            continue;
        }
        for w in (vi..=cap).rev() {
            let take = best[w - vi] + ci;
            if take > best[w] {
                best[w] = take;
            }
        }
    }
    Ok(-best[cap])
}

/// Seeded random instance family for oracle comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Integer `c ∈ [1,100]`, integer `v ∈ [1,20]`, `V_c = ⌊½Σv⌋`.
    Linear,
    /// As [`Family::Linear`] plus a symmetric `Q` with zero diagonal and
    /// off-diagonal entries uniform in `[−10, 0]`.
    Quadratic,
}

/// `count` instances of size `n`, reproducible from `seed`.
pub fn random_family(family: Family, count: usize, n: usize, seed: u64) -> Result<Vec<KnapsackInstance>> {
    if n == 0 {
        return Err(Error::InvalidParameter("family size n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=100) as f64).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=20) as f64).collect();
            let cap = (0.5 * v.iter().sum::<f64>()).floor().max(1.0);
            let q = (family == Family::Quadratic).then(|| {
                let mut q = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..i {
                        let x = -rng.gen_range(0.0..=10.0);
                        q[(i, j)] = x;
                        q[(j, i)] = x;
                    }
                }
                q
            });
            KnapsackInstance::new(c, v, cap, q)
        })
        .collect()
}
