//! Closed-form operations on the hierarchical posterior: log-density,
//! mean and its probit correction term, moment generating function, and the
//! analytic mode.
//!
//! All formulas carry the sign factor (−1)^(1−x) — written `sf` below —
//! which is +1 for the continued trial and −1 for the stopped one. Density
//! work happens in log space with the complementary-CDF form of ln Φ, so
//! the expressions stay finite arbitrarily far into the tails.

use super::HierPosterior;
use crate::error::{Error, Result};
use crate::stats::normal::{log_cdf_raw, pdf_over_cdf, LN_MIN_MASS};

/// Log-density of the hierarchical posterior at θ:
///
/// log[ Φ(sf·(a + bθ − ȳ⁽¹⁾)/ω) · φ((θ − μ_{1+x})/σ_{1+x}) / σ_{1+x} ] − log normalizer.
///
/// For investigator A (no θ-dependent design factor) this is the conjugate
/// Normal log-density. Non-finite θ yields −∞ (no mass off the real line);
/// the function never returns NaN.
pub fn hier_log_density(theta: f64, post: &HierPosterior) -> f64 {
    if !theta.is_finite() {
        return f64::NEG_INFINITY;
    }
    let base = post.conjugate.log_density(theta);
    if !post.design_factor_active() {
        return base;
    }
    let dp = &post.design_prior;
    let arg = post.sign().factor() * (dp.a + dp.b * theta - post.ybar1) / dp.omega;
    log_cdf_raw(arg) + base - post.normalizer.ln()
}

/// Density of the hierarchical posterior at θ.
pub fn hier_density(theta: f64, post: &HierPosterior) -> f64 {
    hier_log_density(theta, post).exp()
}

/// The probit correction term of the posterior mean — the amount by which
/// the hierarchical mean moves away from the conjugate mean:
///
/// sf · b·σ²_{1+x}/√(ω² + σ²_{1+x}b²) · φ(d)/Φ(sf·d),
/// d = (a + b·μ_{1+x} − ȳ⁽¹⁾)/√(ω² + σ²_{1+x}b²).
///
/// Zero for investigator A. Errors when the Φ term has underflowed.
pub fn correction_term(post: &HierPosterior) -> Result<f64> {
    if !post.design_factor_active() {
        return Ok(0.0);
    }
    let sf = post.sign().factor();
    let d = post.d_margin();
    if log_cdf_raw(sf * d) < LN_MIN_MASS {
        return Err(Error::DegenerateConditioning {
            op: "correction_term",
            value: log_cdf_raw(sf * d).exp(),
        });
    }
    let s = post.conjugate.sd;
    // φ(d) = φ(sf·d), so the Mills ratio φ(d)/Φ(sf·d) is pdf_over_cdf(sf·d).
    Ok(sf * post.design_prior.b * s * s / post.joint_sd() * pdf_over_cdf(sf * d))
}

/// Posterior mean: μ_{1+x} plus the probit correction term.
pub fn hier_posterior_mean(post: &HierPosterior) -> Result<f64> {
    Ok(post.conjugate.mean + correction_term(post)?)
}

/// Moment generating function E[exp(tΘ)] of the hierarchical posterior:
///
/// exp(t²σ²_{1+x}/2 + μ_{1+x}t) · Φ(sf·(a + b[μ_{1+x} + tσ²_{1+x}] − ȳ⁽¹⁾)/√(ω² + σ²_{1+x}b²)) / normalizer.
///
/// Evaluated in log space; extreme t saturates to 0 or +∞ rather than NaN.
pub fn hier_posterior_mgf(t: f64, post: &HierPosterior) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::domain(
            "hier_posterior_mgf",
            format!("t = {t} must be finite"),
        ));
    }
    let m = post.conjugate.mean;
    let s = post.conjugate.sd;
    let gaussian_log_mgf = 0.5 * t * t * s * s + m * t;
    if !post.design_factor_active() {
        return Ok(gaussian_log_mgf.exp());
    }
    let dp = &post.design_prior;
    let arg = post.sign().factor() * (dp.a + dp.b * (m + t * s * s) - post.ybar1)
        / post.joint_sd();
    Ok((gaussian_log_mgf + log_cdf_raw(arg) - post.normalizer.ln()).exp())
}

/// Analytic posterior mode: the unique maximizer of the log-concave density
/// on [μ_{1+x} − 10σ_{1+x}, μ_{1+x} + 10σ_{1+x}], found by golden-section
/// search (derivative-free) to ~1e-9 bracket width in θ.
///
/// Exact shortcuts: investigator A and b = 0 both reduce to the conjugate
/// mean.
pub fn hier_posterior_mode(post: &HierPosterior) -> Result<f64> {
    if post.reduces_to_conjugate() {
        return Ok(post.conjugate.mean);
    }
    let m = post.conjugate.mean;
    let s = post.conjugate.sd;
    let (mut lo, mut hi) = (m - 10.0 * s, m + 10.0 * s);
    let tol = 1e-9 * s.max(1.0);
    // (√5 − 1)/2
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let f = |theta: f64| hier_log_density(theta, post);
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evaluations = 2u64;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = f(x1);
        }
        evaluations += 1;
    }
    let mode = 0.5 * (lo + hi);
    if hi - lo > tol || !f(mode).is_finite() {
        return Err(Error::Accuracy {
            op: "hier_posterior_mode",
            best: mode,
            error_estimate: hi - lo,
            tolerance: tol,
            evaluations,
        });
    }
    Ok(mode)
}
