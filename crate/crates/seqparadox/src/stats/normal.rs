//! Standard-normal density, CDF, log-CDF and quantile.
//!
//! The CDF is computed from [`erfc`](super::erf::erfc) (rational
//! approximation), not quadrature; quadrature stays available as an
//! independent oracle in tests. The quantile inverts the CDF through
//! `erfc_inv`. `norm_log_cdf` stays finite far into the lower tail, where
//! `norm_cdf` itself underflows, by switching to the Mills asymptotic series.

use super::erf;
use crate::error::{Error, Result};

/// ln(2π)/2, the normalizing constant of the standard normal log-density.
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_741_780_329_736_405;

/// ln(1e-300): events whose log-probability falls below this are treated as
/// underflowed by the conditioning routines across the crate.
pub(crate) const LN_MIN_MASS: f64 = -690.775_527_898_213_68;

/// 1/√2.
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal density φ(z). Internal, assumes finite input.
pub(crate) fn pdf_raw(z: f64) -> f64 {
    (-0.5 * z * z - HALF_LN_TWO_PI).exp()
}

/// Standard normal log-density log φ(z). Internal, assumes finite input.
pub(crate) fn log_pdf_raw(z: f64) -> f64 {
    -0.5 * z * z - HALF_LN_TWO_PI
}

/// Standard normal CDF Φ(z). Internal, assumes finite input; ±∞ still map
/// to {0, 1} because `erfc` handles them.
pub(crate) fn cdf_raw(z: f64) -> f64 {
    (0.5 * erf::erfc(-z * FRAC_1_SQRT_2)).clamp(0.0, 1.0)
}

/// log Φ(z), finite for all finite `z`. Internal, assumes finite input.
///
/// For z ≥ -30 the direct `erfc` route keeps full relative accuracy. Below
/// that, Φ(z) is still representable but we switch to the asymptotic
/// expansion Φ(-t) = φ(t)/t · (1 - 1/t² + 3/t⁴ - 15/t⁶ + ...) whose log is
/// stable arbitrarily deep in the tail.
pub(crate) fn log_cdf_raw(z: f64) -> f64 {
    if z >= -30.0 {
        cdf_raw(z).ln()
    } else {
        let t = -z;
        let t2 = t * t;
        // Terms (-1)^k (2k-1)!!/t^{2k}; at t = 30 the truncation error is
        // below 1e-13 relative.
        let series = 1.0 + (-1.0 + (3.0 + (-15.0 + (105.0 - 945.0 / t2) / t2) / t2) / t2) / t2;
        log_pdf_raw(t) - t.ln() + series.ln()
    }
}

/// Quantile Φ⁻¹(p). Internal, assumes p ∈ (0, 1).
pub(crate) fn quantile_raw(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// Mills-type ratio φ(z)/Φ(z), computed in log space so it stays accurate
/// when Φ(z) underflows (z ≪ 0) or when both factors are tiny.
pub(crate) fn pdf_over_cdf(z: f64) -> f64 {
    (log_pdf_raw(z) - log_cdf_raw(z)).exp()
}

/// Standard normal density φ(z) = (2π)^(-1/2)·exp(-z²/2).
pub fn norm_pdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain("norm_pdf", format!("z = {z} is not finite")));
    }
    Ok(pdf_raw(z))
}

/// Standard normal CDF Φ(z), accurate to better than 1e-12 absolute on
/// [-8, 8] and monotone; the result is clamped to [0, 1].
pub fn norm_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain("norm_cdf", format!("z = {z} is not finite")));
    }
    Ok(cdf_raw(z))
}

/// log Φ(z), finite for every finite `z` (e.g. ≈ -45006.6 at z = -300).
pub fn norm_log_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(
            "norm_log_cdf",
            format!("z = {z} is not finite"),
        ));
    }
    Ok(log_cdf_raw(z))
}

/// Quantile function Φ⁻¹(p) for p ∈ (0, 1); satisfies
/// |Φ(norm_quantile(p)) - p| < 1e-12.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "norm_quantile",
            format!("p = {p} is not in the open interval (0, 1)"),
        ));
    }
    Ok(quantile_raw(p))
}

/// A standard-normal abscissa together with its density and CDF, evaluated
/// once and carried as a unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdNormalEval {
    /// Abscissa z.
    pub z: f64,
    /// φ(z) ≥ 0.
    pub pdf: f64,
    /// Φ(z) ∈ [0, 1].
    pub cdf: f64,
}

impl StdNormalEval {
    /// Evaluates φ and Φ at `z`.
    pub fn at(z: f64) -> Result<Self> {
        Ok(StdNormalEval {
            z,
            pdf: norm_pdf(z)?,
            cdf: norm_cdf(z)?,
        })
    }
}
