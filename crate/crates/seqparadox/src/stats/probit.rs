//! The probit-normal integral: a Gaussian expectation of a probit factor in
//! closed form.

use super::normal::cdf_raw;
use crate::error::{Error, Result};

/// Orientation of the probit factor's argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// Use +(a + b·u − c)/ω.
    Plus,
    /// Use −(a + b·u − c)/ω.
    Minus,
}

impl Sign {
    /// The multiplicative factor ±1.
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Maps a continuation indicator x ∈ {0, 1} to the sign (−1)^(1−x):
    /// x = 1 → `Plus`, x = 0 → `Minus`.
    pub fn from_indicator(x: bool) -> Self {
        if x {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// E[Φ(sign·(a + b·U − c)/ω)] for U ~ N(mu, sigma²), which collapses to
/// Φ(sign·(a + b·mu − c)/√(ω² + σ²·b²)).
///
/// `sigma = 0` (degenerate U) is allowed; `omega` must be strictly positive.
pub fn probit_normal_integral(
    a: f64,
    b: f64,
    c: f64,
    omega: f64,
    mu: f64,
    sigma: f64,
    sign: Sign,
) -> Result<f64> {
    for (name, v) in [("a", a), ("b", b), ("c", c), ("mu", mu)] {
        if !v.is_finite() {
            return Err(Error::domain(
                "probit_normal_integral",
                format!("{name} = {v} is not finite"),
            ));
        }
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::domain(
            "probit_normal_integral",
            format!("omega = {omega} must be positive and finite"),
        ));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(
            "probit_normal_integral",
            format!("sigma = {sigma} must be non-negative and finite"),
        ));
    }

    let scale = (omega * omega + sigma * sigma * b * b).sqrt();
    Ok(cdf_raw(sign.factor() * (a + b * mu - c) / scale))
}
