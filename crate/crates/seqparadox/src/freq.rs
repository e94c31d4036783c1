//! Frequentist analysis of the sequential trial: the MLE, the exact
//! repeated-sampling expectations of the estimator (marginal and conditional
//! on the stopping decision), and the plug-in bias-corrected estimator.
//!
//! Throughout, z denotes the standardized stopping margin
//! z = √n/σ·(ψ − θ), so the continuation probability is π(θ) = Φ(z).
//! All Mills ratios φ/Φ are evaluated in log space so the expressions stay
//! finite far into the tails.

use crate::error::{Error, Result};
use crate::stats::normal::{cdf_raw, log_cdf_raw, pdf_over_cdf, pdf_raw, LN_MIN_MASS};
use crate::trial::{DesignConfig, TrialSummary};
use serde::{Deserialize, Serialize};

/// The standardized stopping margin z = √n/σ·(ψ − θ).
fn z_margin(theta: f64, design: &DesignConfig) -> f64 {
    (design.n as f64).sqrt() / design.sigma * (design.psi - theta)
}

fn require_finite_theta(op: &'static str, theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("theta = {theta} must be finite")))
    }
}

/// Maximum-likelihood estimate of θ: the pooled mean over the
/// (1 + x)·n observed outcomes. By likelihood proportionality this is the
/// MLE under both investigators' designs.
pub fn mle(summary: &TrialSummary) -> f64 {
    summary.ybar
}

/// Probability that the trial continues, π(θ) = Φ(√n/σ·(ψ − θ)).
pub fn continuation_prob(theta: f64, design: &DesignConfig) -> Result<f64> {
    design.validate()?;
    require_finite_theta("continuation_prob", theta)?;
    Ok(cdf_raw(z_margin(theta, design)))
}

/// Repeated-sampling mean of the MLE under investigator B's design:
/// E[θ̂] = θ + σ/(2√n)·φ(z).
pub fn marginal_estimator_mean(theta: f64, design: &DesignConfig) -> Result<f64> {
    design.validate()?;
    require_finite_theta("marginal_estimator_mean", theta)?;
    let z = z_margin(theta, design);
    Ok(theta + design.sigma / (2.0 * (design.n as f64).sqrt()) * pdf_raw(z))
}

/// Mean of the MLE conditional on the stopping decision:
///
/// * x = 0 (stopped):   θ + σ/√n · φ(z)/Φ(−z)
/// * x = 1 (continued): θ − σ/(2√n) · φ(z)/Φ(z)
///
/// with z = √n/σ·(ψ − θ). Errors if the conditioning event has mass below
/// 1e-300 — the conditional expectation is then not a meaningful number.
pub fn conditional_estimator_mean(theta: f64, design: &DesignConfig, x: bool) -> Result<f64> {
    design.validate()?;
    require_finite_theta("conditional_estimator_mean", theta)?;
    let z = z_margin(theta, design);
    let conditioning_log_mass = if x { log_cdf_raw(z) } else { log_cdf_raw(-z) };
    if conditioning_log_mass < LN_MIN_MASS {
        return Err(Error::DegenerateConditioning {
            op: "conditional_estimator_mean",
            value: conditioning_log_mass.exp(),
        });
    }
    let root_n = (design.n as f64).sqrt();
    if x {
        // φ(z)/Φ(z) = pdf_over_cdf(z)
        Ok(theta - design.sigma / (2.0 * root_n) * pdf_over_cdf(z))
    } else {
        // φ(z)/Φ(−z) = φ(−z)/Φ(−z) by symmetry of φ
        Ok(theta + design.sigma / root_n * pdf_over_cdf(-z))
    }
}

/// The plug-in bias-corrected estimator for a continued trial:
/// θ̂_BC = θ̂ + σ/(2√n)·φ(ẑ)/Φ(ẑ), ẑ = √n/σ·(ψ − θ̂), θ̂ = ȳ.
///
/// Only the x = 1 branch is defined; a stopped trial has no published
/// correction and is reported as an unsupported branch.
pub fn bias_corrected_estimate(summary: &TrialSummary, design: &DesignConfig) -> Result<f64> {
    design.validate()?;
    if summary.n != design.n {
        return Err(Error::InconsistentData(format!(
            "summary has per-stage size {}, design says n = {}",
            summary.n, design.n
        )));
    }
    if !summary.x {
        return Err(Error::UnsupportedBranch(
            "bias-corrected estimate is defined only for the continued trial (x = 1)".into(),
        ));
    }
    let theta_hat = mle(summary);
    require_finite_theta("bias_corrected_estimate", theta_hat)?;
    let z_hat = z_margin(theta_hat, design);
    Ok(theta_hat + design.sigma / (2.0 * (design.n as f64).sqrt()) * pdf_over_cdf(z_hat))
}

/// All repeated-sampling expectations of the estimator at one (θ, design),
/// computed together so the law-of-total-expectation identity
/// `marginal_mean = cond_mean_stop·(1 − π) + cond_mean_continue·π`
/// can be verified where the pieces coexist (enforced to 1e-12 at
/// construction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    /// Effect size at which the expectations are evaluated.
    pub theta: f64,
    /// Stopping threshold of the design.
    pub psi: f64,
    /// E[θ̂] under repeated sampling of the sequential design.
    pub marginal_mean: f64,
    /// E[θ̂ | X = 0] (trial stopped at the interim).
    pub cond_mean_stop: f64,
    /// E[θ̂ | X = 1] (trial continued).
    pub cond_mean_continue: f64,
    /// π(θ) = P(X = 1 | θ).
    pub continuation_prob: f64,
}

impl BiasReport {
    /// Computes the report and checks the total-expectation identity.
    pub fn new(theta: f64, design: &DesignConfig) -> Result<Self> {
        let report = BiasReport {
            theta,
            psi: design.psi,
            marginal_mean: marginal_estimator_mean(theta, design)?,
            cond_mean_stop: conditional_estimator_mean(theta, design, false)?,
            cond_mean_continue: conditional_estimator_mean(theta, design, true)?,
            continuation_prob: continuation_prob(theta, design)?,
        };
        let recombined = report.cond_mean_stop * (1.0 - report.continuation_prob)
            + report.cond_mean_continue * report.continuation_prob;
        let tol = 1e-12 * report.marginal_mean.abs().max(1.0);
        if (recombined - report.marginal_mean).abs() > tol {
            return Err(Error::domain(
                "BiasReport",
                format!(
                    "total-expectation identity violated: marginal {} vs recombined {}",
                    report.marginal_mean, recombined
                ),
            ));
        }
        Ok(report)
    }

    /// Marginal bias E[θ̂] − θ.
    pub fn marginal_bias(&self) -> f64 {
        self.marginal_mean - self.theta
    }
}
