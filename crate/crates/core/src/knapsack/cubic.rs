//! Positive root of the canonical dual algebraic equation `β⁻¹σ³ + σ² = θ²`.

use crate::error::{Error, Result};

/// Relative residual every returned root satisfies.
pub const CUBIC_RESIDUAL_TOL: f64 = 1e-10;

/// Prefactor of the printed closed form `σ = (β/6)(−1 + φ + φᶜ)`.
///
/// It yields half the root; kept so tests can show why the residual check exists.
pub const PRINTED_PREFACTOR: f64 = 1.0 / 6.0;

/// Prefactor obtained by reducing `σ³ + βσ² − βθ² = 0` with `σ = y − β/3`.
pub const CARDANO_PREFACTOR: f64 = 1.0 / 3.0;

pub fn cubic_residual(sigma: f64, theta: f64, beta: f64) -> f64 {
    sigma * sigma * sigma / beta + sigma * sigma - theta * theta
}

pub fn residual_ok(sigma: f64, theta: f64, beta: f64) -> bool {
    sigma > 0.0
        && cubic_residual(sigma, theta, beta).abs() <= CUBIC_RESIDUAL_TOL * (1.0 + theta * theta)
}

/// `prefactor·β·(−1 + φ + φᶜ)` with `η = 4β²/27` and `φφᶜ = 1`.
///
/// For `θ² ≥ η` the cube root is real; otherwise `φ` lies on the unit circle and
/// `φ + φᶜ = 2cos(arg/3)`.
pub fn cardano_closed_form(theta: f64, beta: f64, prefactor: f64) -> f64 {
    let t = theta.abs();
    let t2 = t * t;
    let eta = 4.0 * beta * beta / 27.0;
    let sum = if t2 >= eta {
        let inner = 2.0 * t2 - eta + 2.0 * t * (t2 - eta).sqrt();
        let phi = (inner / eta).cbrt();
        phi + 1.0 / phi
    } else {
        let arg = (2.0 * t * (eta - t2).sqrt()).atan2(2.0 * t2 - eta);
        2.0 * (arg / 3.0).cos()
    };
    prefactor * beta * (sum - 1.0)
}

/// Unique positive root of `β⁻¹σ³ + σ² = θ²`.
///
/// The closed form is accepted only when it passes the residual check; otherwise
/// (cancellation when `σ ≪ β`) the root is refined by Newton's method from an upper
/// bound, where the convex increasing cubic makes the iterates decrease
/// monotonically, with bisection on `[0, |θ|]` as the last resort.
pub fn lkp_cardano_sigma(theta: f64, beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidParameter(format!("theta = {theta} is not finite")));
    }
    if theta == 0.0 {
        return Err(Error::DegenerateTheta);
    }
    let t = theta.abs();

    let closed = cardano_closed_form(t, beta, CARDANO_PREFACTOR);
    if residual_ok(closed, t, beta) {
        return Ok(closed);
    }

    // σ ≤ |θ| and σ ≤ (βθ²)^{1/3} both bound the root from above.
    let mut sigma = t.min((beta * t * t).cbrt());
    if closed.is_finite() && closed > 0.0 && closed < sigma && cubic_residual(closed, t, beta) >= 0.0
    {
        sigma = closed;
    }
    for _ in 0..100 {
        let f = cubic_residual(sigma, t, beta);
        if f <= 0.0 {
            break;
        }
        let df = 3.0 * sigma * sigma / beta + 2.0 * sigma;
        let next = sigma - f / df;
        if !(next > 0.0 && next < sigma) {
            break;
        }
        sigma = next;
    }
    if residual_ok(sigma, t, beta) {
        return Ok(sigma);
    }

    let (mut lo, mut hi) = (0.0_f64, t);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cubic_residual(mid, t, beta) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let sigma = if cubic_residual(lo, t, beta).abs() < cubic_residual(hi, t, beta).abs() && lo > 0.0
    {
        lo
    } else {
        hi
    };
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Plain bisection on the cubic, independent of the closed form.
    fn bisect(theta: f64, beta: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, theta.abs());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cubic_residual(mid, theta, beta) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn unit_theta_unit_beta() {
        let oracle = bisect(1.0, 1.0);
        assert!((oracle - 0.754_877_666_246_692_7).abs() < 1e-12);
        let sigma = lkp_cardano_sigma(1.0, 1.0).unwrap();
        assert!((sigma - oracle).abs() < 1e-12);
        assert!(residual_ok(sigma, 1.0, 1.0));
    }

    #[test]
    fn large_beta_limit() {
        let sigma = lkp_cardano_sigma(1.0, 1e9).unwrap();
        assert!((sigma - 1.0).abs() < 1e-6);
        let sigma = lkp_cardano_sigma(-3.0, 1e12).unwrap();
        assert!((sigma - 3.0).abs() < 1e-6);
    }

    #[test]
    fn zero_theta_is_degenerate() {
        assert!(matches!(lkp_cardano_sigma(0.0, 5.0), Err(Error::DegenerateTheta)));
        assert!(lkp_cardano_sigma(1.0, 0.0).is_err());
    }

    #[test]
    fn printed_prefactor_gives_half_the_root() {
        for (theta, beta) in [(1.0, 1.0), (5.0, 0.3), (0.2, 40.0)] {
            let printed = cardano_closed_form(theta, beta, PRINTED_PREFACTOR);
            let corrected = cardano_closed_form(theta, beta, CARDANO_PREFACTOR);
            assert!(!residual_ok(printed, theta, beta));
            assert!(residual_ok(corrected, theta, beta));
            assert!((2.0 * printed - corrected).abs() < 1e-12 * corrected);
        }
    }

    #[test]
    fn both_branches_of_the_closed_form() {
        // θ² ≥ η and θ² < η with η = 4β²/27.
        for (theta, beta) in [(10.0, 1.0), (0.1, 10.0)] {
            let sigma = cardano_closed_form(theta, beta, CARDANO_PREFACTOR);
            assert!((sigma - bisect(theta, beta)).abs() < 1e-10 * (1.0 + theta));
        }
    }

    proptest! {
        #[test]
        fn residual_certificate(theta in -1e3f64..1e3, log_beta in -3.0f64..9.0) {
            prop_assume!(theta != 0.0);
            let beta = 10f64.powf(log_beta);
            let sigma = lkp_cardano_sigma(theta, beta).unwrap();
            prop_assert!(sigma > 0.0);
            prop_assert!(residual_ok(sigma, theta, beta));
            prop_assert!(sigma <= theta.abs() * (1.0 + 1e-12));
        }
    }
}
