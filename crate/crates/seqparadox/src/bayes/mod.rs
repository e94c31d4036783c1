//! Bayesian analyses of the trial.
//!
//! Question 1 (effect size with the design treated as fixed) leads to the
//! conjugate Normal posterior [`ConjugatePosterior`]; Question 2 (the
//! threshold ψ itself uncertain, with the linear design prior
//! Ψ | Θ ~ N(a + bΘ, ω²)) leads to investigator B's hierarchical posterior
//! [`HierPosterior`], whose density is a Normal kernel tilted by a probit
//! factor. For investigator A the design factor is θ-free and the
//! hierarchical posterior collapses to the conjugate one for every input.
//!
//! Closed-form quantities (density, normalizer, mean, MGF) live in
//! [`mod@self`] and `hier`; quadrature-based ones (CDF, quantiles, moments)
//! and the two samplers live in `numeric`.

mod hier;
mod numeric;

pub use hier::{
    correction_term, hier_density, hier_log_density, hier_posterior_mean, hier_posterior_mgf,
    hier_posterior_mode,
};
pub use numeric::{
    default_mcmc_step, hier_cdf, hier_quantile, hier_quantiles, posterior_moments, sample_grid,
    sample_mcmc, McmcSample, PosteriorMoments, DEFAULT_BURN_IN, MCMC_THIN,
};

use crate::error::{Error, Result};
use crate::stats::normal::{cdf_raw, log_pdf_raw, quantile_raw};
use crate::stats::probit::{probit_normal_integral, Sign};
use crate::trial::{DesignConfig, Investigator, TrialSummary};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Prior on the effect size Θ: either a proper Normal or the improper flat
/// limit τ → ∞, kept as an explicit variant so the limit formulas are exact
/// rather than approximated with a huge τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThetaPrior {
    /// Θ ~ N(μ, τ²).
    Normal {
        /// Prior mean μ.
        mu: f64,
        /// Prior standard deviation τ > 0.
        tau: f64,
    },
    /// The improper flat prior (τ → ∞): posterior mean ȳ, variance
    /// σ²/((1+x)n).
    Flat,
}

impl ThetaPrior {
    /// Builds a validated proper Normal prior.
    pub fn normal(mu: f64, tau: f64) -> Result<Self> {
        let prior = ThetaPrior::Normal { mu, tau };
        prior.validate()?;
        Ok(prior)
    }

    /// Checks the type invariants.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThetaPrior::Normal { mu, tau } => {
                if !mu.is_finite() {
                    return Err(Error::domain("ThetaPrior", format!("mu = {mu} must be finite")));
                }
                if !(tau > 0.0) || !tau.is_finite() {
                    return Err(Error::domain(
                        "ThetaPrior",
                        format!("tau = {tau} must be positive and finite"),
                    ));
                }
            }
            ThetaPrior::Flat => {}
        }
        Ok(())
    }
}

/// Investigator B's linear design prior: Ψ | Θ ~ N(a + bΘ, ω²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPrior {
    /// Intercept a.
    pub a: f64,
    /// Slope b coupling the threshold to the effect size.
    pub b: f64,
    /// Residual standard deviation ω > 0.
    pub omega: f64,
}

impl DesignPrior {
    /// Builds a validated design prior.
    pub fn new(a: f64, b: f64, omega: f64) -> Result<Self> {
        let prior = DesignPrior { a, b, omega };
        prior.validate()?;
        Ok(prior)
    }

    /// Checks the type invariants (a, b finite; ω > 0).
    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::domain(
                "DesignPrior",
                format!("a = {}, b = {} must be finite", self.a, self.b),
            ));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::domain(
                "DesignPrior",
                format!("omega = {} must be positive and finite", self.omega),
            ));
        }
        Ok(())
    }
}

/// The Question-1 posterior Θ | data ~ N(μ_{1+x}, σ²_{1+x}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePosterior {
    /// Posterior mean μ_{1+x}.
    pub mean: f64,
    /// Posterior standard deviation σ_{1+x} > 0.
    pub sd: f64,
}

impl ConjugatePosterior {
    /// Log-density at θ.
    pub fn log_density(&self, theta: f64) -> f64 {
        log_pdf_raw((theta - self.mean) / self.sd) - self.sd.ln()
    }

    /// Density at θ.
    pub fn density(&self, theta: f64) -> f64 {
        self.log_density(theta).exp()
    }

    /// CDF at θ.
    pub fn cdf(&self, theta: f64) -> f64 {
        cdf_raw((theta - self.mean) / self.sd)
    }

    /// Quantile function, p ∈ (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(
                "ConjugatePosterior::quantile",
                format!("p = {p} must lie in (0, 1)"),
            ));
        }
        Ok(self.mean + self.sd * quantile_raw(p))
    }
}

/// Computes the conjugate posterior of Θ given the trial summary.
///
/// With Θ ~ N(μ, τ²) and ȳ | Θ ~ N(Θ, σ²/((1+x)n)):
/// mean = (ȳ·τ² + μ·v)/(τ² + v), variance = v·τ²/(τ² + v) with
/// v = σ²/((1+x)n). The flat prior gives mean ȳ and variance v exactly.
pub fn conjugate_posterior(
    summary: &TrialSummary,
    prior: &ThetaPrior,
    design: &DesignConfig,
) -> Result<ConjugatePosterior> {
    design.validate()?;
    prior.validate()?;
    if summary.n != design.n {
        return Err(Error::InconsistentData(format!(
            "summary has per-stage size {}, design says n = {}",
            summary.n, design.n
        )));
    }
    if !summary.ybar.is_finite() || !summary.ybar1.is_finite() {
        return Err(Error::domain(
            "conjugate_posterior",
            "summary means must be finite",
        ));
    }
    let sample_size = (1 + summary.x as usize) * design.n;
    let v = design.sigma * design.sigma / sample_size as f64;
    let (mean, var) = match *prior {
        ThetaPrior::Flat => (summary.ybar, v),
        ThetaPrior::Normal { mu, tau } => {
            let tau2 = tau * tau;
            let denom = tau2 + v;
            ((summary.ybar * tau2 + mu * v) / denom, v * tau2 / denom)
        }
    };
    Ok(ConjugatePosterior {
        mean,
        sd: var.sqrt(),
    })
}

/// Investigator B's Question-2 posterior: a Normal kernel tilted by the
/// probit factor Φ((−1)^(1−x)·(a + bθ − ȳ⁽¹⁾)/ω), normalized in closed form.
///
/// For investigator A the design factor is θ-free, so the object carries
/// `normalizer = 1` and every operation falls through to the conjugate
/// posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierPosterior {
    /// The conjugate component N(μ_{1+x}, σ²_{1+x}).
    pub conjugate: ConjugatePosterior,
    /// The linear design prior (a, b, ω).
    pub design_prior: DesignPrior,
    /// Observed first-stage mean ȳ⁽¹⁾ entering the probit factor.
    pub ybar1: f64,
    /// Continuation indicator of the observed trial.
    pub x: bool,
    /// Whose design factor applies (for A the factor is absent).
    pub investigator: Investigator,
    /// Normalizing constant Φ((−1)^(1−x)·(a + b·μ_{1+x} − ȳ⁽¹⁾)/√(ω² + σ²_{1+x}b²)).
    pub normalizer: f64,
}

impl HierPosterior {
    /// Probit sign factor: +1 for the continued trial, −1 for the stopped
    /// one.
    pub(crate) fn sign(&self) -> Sign {
        Sign::from_indicator(self.x)
    }

    /// Whether the θ-dependent design factor is present (investigator B).
    pub(crate) fn design_factor_active(&self) -> bool {
        self.investigator == Investigator::B
    }

    /// Whether every operation reduces exactly to the conjugate posterior
    /// (investigator A, or a slope-free design prior).
    pub(crate) fn reduces_to_conjugate(&self) -> bool {
        !self.design_factor_active() || self.design_prior.b == 0.0
    }

    /// The combined scale √(ω² + σ²_{1+x}·b²) of the marginalized probit
    /// argument.
    pub(crate) fn joint_sd(&self) -> f64 {
        let b = self.design_prior.b;
        let s = self.conjugate.sd;
        (self.design_prior.omega * self.design_prior.omega + s * s * b * b).sqrt()
    }

    /// The standardized margin d = (a + b·μ_{1+x} − ȳ⁽¹⁾)/√(ω² + σ²_{1+x}b²).
    pub(crate) fn d_margin(&self) -> f64 {
        (self.design_prior.a + self.design_prior.b * self.conjugate.mean - self.ybar1)
            / self.joint_sd()
    }
}

/// Constructs the Question-2 posterior for the investigator recorded in
/// `design`. Errors with a degenerate-conditioning report when the
/// normalizer underflows (the observed indicator is essentially impossible
/// under the prior).
pub fn hier_posterior(
    summary: &TrialSummary,
    prior: &ThetaPrior,
    design_prior: &DesignPrior,
    design: &DesignConfig,
) -> Result<HierPosterior> {
    design_prior.validate()?;
    let conjugate = conjugate_posterior(summary, prior, design)?;
    let sign = Sign::from_indicator(summary.x);
    let normalizer = match design.investigator {
        Investigator::A => 1.0,
        Investigator::B => {
            let z = probit_normal_integral(
                design_prior.a,
                design_prior.b,
                summary.ybar1,
                design_prior.omega,
                conjugate.mean,
                conjugate.sd,
                sign,
            )?;
            if z < 1e-300 {
                return Err(Error::DegenerateConditioning {
                    op: "hier_posterior",
                    value: z,
                });
            }
            z
        }
    };
    Ok(HierPosterior {
        conjugate,
        design_prior: *design_prior,
        ybar1: summary.ybar1,
        x: summary.x,
        investigator: design.investigator,
        normalizer,
    })
}

/// The empirical-Bayes slope b = ȳ⁽¹⁾/(2ȳ) ("the relative difference
/// between the two" stage means). Defined only for a continued trial whose
/// two means share a sign.
pub fn empirical_bayes_b(summary: &TrialSummary) -> Result<f64> {
    if !summary.x {
        return Err(Error::UnsupportedInput {
            op: "empirical_bayes_b",
            reason: "the empirical-Bayes slope is defined only for a continued trial (x = 1)"
                .into(),
        });
    }
    if summary.ybar == 0.0 {
        return Err(Error::UnsupportedInput {
            op: "empirical_bayes_b",
            reason: "overall mean is zero".into(),
        });
    }
    if summary.ybar1 * summary.ybar < 0.0 {
        return Err(Error::UnsupportedInput {
            op: "empirical_bayes_b",
            reason: format!(
                "stage means must share a sign (ȳ⁽¹⁾ = {}, ȳ = {})",
                summary.ybar1, summary.ybar
            ),
        });
    }
    Ok(summary.ybar1 / (2.0 * summary.ybar))
}

/// How a [`PosteriorSummary`]'s location/scale entries were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMethod {
    /// Closed-form mean; sd and quantiles from deterministic quadrature.
    ClosedForm,
    /// All moments and quantiles from deterministic quadrature.
    Quadrature,
    /// Moments and quantiles estimated from Metropolis draws.
    Mcmc,
    /// Moments and quantiles estimated from inverse-CDF draws.
    Grid,
}

/// Serializable posterior report (the JSON surface of the CLI).
///
/// `mode` is always the analytic mode (maximizer of the density), never a
/// kernel-smoothed mode of draws; `quantiles` maps probability (as its
/// decimal string) to the quantile value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Posterior mean.
    pub mean: f64,
    /// Analytic posterior mode.
    pub mode: f64,
    /// Posterior standard deviation.
    pub sd: f64,
    /// Normalizing constant of the tilted density (1 for the conjugate
    /// reduction).
    pub normalizer: f64,
    /// Requested quantiles, keyed by the probability's decimal string.
    pub quantiles: BTreeMap<String, f64>,
    /// Provenance of the numbers.
    pub method: SummaryMethod,
}

fn quantile_key(p: f64) -> String {
    format!("{p}")
}

impl PosteriorSummary {
    /// Summary with the closed-form mean, quadrature sd and quantiles.
    pub fn from_closed_form(post: &HierPosterior, probs: &[f64]) -> Result<Self> {
        let moments = posterior_moments(post)?;
        let qs = hier_quantiles(post, probs)?;
        Ok(PosteriorSummary {
            mean: hier_posterior_mean(post)?,
            mode: hier_posterior_mode(post)?,
            sd: moments.sd,
            normalizer: post.normalizer,
            quantiles: probs
                .iter()
                .map(|&p| quantile_key(p))
                .zip(qs)
                .collect(),
            method: SummaryMethod::ClosedForm,
        })
    }

    /// Summary with every entry from deterministic quadrature.
    pub fn from_quadrature(post: &HierPosterior, probs: &[f64]) -> Result<Self> {
        let mut summary = Self::from_closed_form(post, probs)?;
        let moments = posterior_moments(post)?;
        summary.mean = moments.mean;
        summary.method = SummaryMethod::Quadrature;
        Ok(summary)
    }

    /// Summary estimated from sampler output (`method` must be
    /// [`SummaryMethod::Mcmc`] or [`SummaryMethod::Grid`]); the mode stays
    /// analytic.
    pub fn from_draws(
        post: &HierPosterior,
        draws: &[f64],
        probs: &[f64],
        method: SummaryMethod,
    ) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::domain("PosteriorSummary", "no draws supplied"));
        }
        if !matches!(method, SummaryMethod::Mcmc | SummaryMethod::Grid) {
            return Err(Error::domain(
                "PosteriorSummary",
                "draw-based summaries must be tagged mcmc or grid",
            ));
        }
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
        let mut sorted = draws.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut quantiles = BTreeMap::new();
        for &p in probs {
            quantiles.insert(quantile_key(p), empirical_quantile(&sorted, p)?);
        }
        Ok(PosteriorSummary {
            mean,
            mode: hier_posterior_mode(post)?,
            sd: var.sqrt(),
            normalizer: post.normalizer,
            quantiles,
            method,
        })
    }
}

/// Linear-interpolation sample quantile of an ascending-sorted slice.
pub(crate) fn empirical_quantile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::domain("empirical_quantile", "empty sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(
            "empirical_quantile",
            format!("p = {p} must lie in [0, 1]"),
        ));
    }
    let h = (sorted.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    if i + 1 >= sorted.len() {
        return Ok(sorted[sorted.len() - 1]);
    }
    let frac = h - i as f64;
    Ok(sorted[i] + frac * (sorted[i + 1] - sorted[i]))
}
