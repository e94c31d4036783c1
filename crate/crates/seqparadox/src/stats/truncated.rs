//! Mean of a truncated normal distribution.

use super::normal::{cdf_raw, pdf_raw};
use crate::error::{Error, Result};

/// Smallest interval probability we are willing to condition on; below this
/// the truncation is reported as degenerate instead of returning ±∞ or NaN.
const MIN_MASS: f64 = 1e-300;

/// Mean of N(mu, sigma²) truncated to [a, b]:
/// mu + sigma·(φ(α) − φ(β)) / (Φ(β) − Φ(α)) with α = (a−mu)/σ, β = (b−mu)/σ.
///
/// `a = -∞` and/or `b = +∞` are allowed (φ → 0, Φ → {0, 1}). When both
/// standardized bounds sit in the same far tail the interval mass is formed
/// from complementary CDFs so no cancellation occurs. An interval whose
/// probability mass underflows below 1e-300 is a degenerate-truncation error.
pub fn truncated_normal_mean(mu: f64, sigma: f64, a: f64, b: f64) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::domain(
            "truncated_normal_mean",
            format!("mu = {mu} is not finite"),
        ));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(
            "truncated_normal_mean",
            format!("sigma = {sigma} must be positive and finite"),
        ));
    }
    if a.is_nan() || b.is_nan() {
        return Err(Error::domain("truncated_normal_mean", "NaN bound"));
    }
    if !(a < b) {
        return Err(Error::domain(
            "truncated_normal_mean",
            format!("bounds must satisfy a < b, got [{a}, {b}]"),
        ));
    }
    if a == f64::INFINITY || b == f64::NEG_INFINITY {
        return Err(Error::domain(
            "truncated_normal_mean",
            "a must be < +inf and b > -inf",
        ));
    }

    let alpha = if a == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        (a - mu) / sigma
    };
    let beta = if b == f64::INFINITY {
        f64::INFINITY
    } else {
        (b - mu) / sigma
    };

    let pdf_at = |z: f64| if z.is_finite() { pdf_raw(z) } else { 0.0 };
    let cdf_at = |z: f64| {
        if z == f64::NEG_INFINITY {
            0.0
        } else if z == f64::INFINITY {
            1.0
        } else {
            cdf_raw(z)
        }
    };

    // Interval mass Φ(β) − Φ(α), via complements when both bounds are in the
    // upper tail (where the direct difference would cancel).
    let mass = if alpha > 0.0 && beta > 0.0 {
        cdf_at(-alpha) - cdf_at(-beta)
    } else {
        cdf_at(beta) - cdf_at(alpha)
    };
    if !(mass >= MIN_MASS) {
        return Err(Error::DegenerateTruncation { lower: a, upper: b });
    }

    Ok(mu + sigma * (pdf_at(alpha) - pdf_at(beta)) / mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal::pdf_raw;
    use crate::stats::quadrature::integrate;
    use crate::stats::rng::RngStream;
    use approx::assert_relative_eq;

    // Expected means frozen from 40-digit (120-digit for the deep-tail
    // cases) mpmath evaluations of the closed form.

    #[test]
    fn half_line_reference_values() {
        assert_relative_eq!(
            truncated_normal_mean(0.0, 1.0, 0.0, f64::INFINITY).unwrap(),
            0.79788456080286536,
            epsilon = 1e-13
        );
        let sigma = 2.0 / 5f64.sqrt();
        assert_relative_eq!(
            truncated_normal_mean(2.0, sigma, 1.0, f64::INFINITY).unwrap(),
            2.219983111628473,
            epsilon = 1e-12
        );
    }

    #[test]
    fn no_truncation_returns_mu() {
        assert_eq!(
            truncated_normal_mean(3.25, 0.5, f64::NEG_INFINITY, f64::INFINITY).unwrap(),
            3.25
        );
    }

    #[test]
    fn two_sided_reference_values() {
        // Symmetric interval about mu leaves the mean unchanged.
        assert_relative_eq!(
            truncated_normal_mean(1.0, 2.0, -1.0, 3.0).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            truncated_normal_mean(0.0, 1.0, -2.0, -1.0).unwrap(),
            -1.3831690466315528,
            epsilon = 1e-13
        );
    }

    #[test]
    fn deep_tail_intervals_stay_accurate() {
        // Both bounds 8-16 sd above the mean: the complementary-CDF mass
        // computation must not cancel.
        assert_relative_eq!(
            truncated_normal_mean(0.0, 1.0, 8.0, 9.0).unwrap(),
            8.1211889929797971,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            truncated_normal_mean(3.0, 0.5, 10.0, 11.0).unwrap(),
            10.035358816092290,
            max_relative = 1e-12
        );
    }

    #[test]
    fn degenerate_truncation_is_an_error() {
        let err = truncated_normal_mean(0.0, 1.0, 38.0, 39.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateTruncation { .. }));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(truncated_normal_mean(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(truncated_normal_mean(0.0, -1.0, 0.0, 1.0).is_err());
        assert!(truncated_normal_mean(f64::NAN, 1.0, 0.0, 1.0).is_err());
        assert!(truncated_normal_mean(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(truncated_normal_mean(0.0, 1.0, 2.0, 1.0).is_err());
        assert!(truncated_normal_mean(0.0, 1.0, f64::INFINITY, f64::INFINITY).is_err());
        assert!(truncated_normal_mean(0.0, 1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn matches_quadrature_on_random_intervals() {
        // 100 random (mu, sigma, a, b) with bounds within ±3σ: the closed
        // form must agree with direct integration of t·(truncated density).
        let mut rng = RngStream::new(0xACCE55, 0);
        for _ in 0..100 {
            let mu = -2.0 + 4.0 * rng.uniform();
            let sigma = 0.3 + 2.0 * rng.uniform();
            let lo = mu + sigma * (-3.0 + 2.5 * rng.uniform());
            let hi = lo + sigma * (0.5 + 2.5 * rng.uniform());
            let mass = integrate(
                |t| pdf_raw((t - mu) / sigma) / sigma,
                lo,
                hi,
                1e-12,
            )
            .unwrap()
            .value;
            let first_moment = integrate(
                |t| t * pdf_raw((t - mu) / sigma) / sigma,
                lo,
                hi,
                1e-12,
            )
            .unwrap()
            .value;
            let expected = first_moment / mass;
            let got = truncated_normal_mean(mu, sigma, lo, hi).unwrap();
            assert!(
                (got - expected).abs() < 1e-8,
                "mu={mu} sigma={sigma} [{lo},{hi}]: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn matches_rejection_sampling() {
        // Brute-force Monte Carlo cross-check of the half-line case.
        let mut rng = RngStream::new(0x7AB1E, 1);
        let mut kept = 0u64;
        let mut sum = 0.0;
        for _ in 0..100_000 {
            let z = rng.standard_normal();
            if z > 0.0 {
                kept += 1;
                sum += z;
            }
        }
        let mc = sum / kept as f64;
        // sd of the half-normal ≈ 0.6028; 4 MC-se at ~5e4 kept draws.
        let se = 0.6028 / (kept as f64).sqrt();
        let exact = truncated_normal_mean(0.0, 1.0, 0.0, f64::INFINITY).unwrap();
        assert!((mc - exact).abs() < 4.0 * se, "mc {mc} vs exact {exact}");
    }
}
