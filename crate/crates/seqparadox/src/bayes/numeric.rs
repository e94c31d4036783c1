//! Quadrature-based posterior functionals — CDF, quantiles, moments — and
//! the two samplers (inverse-CDF on a precomputed grid, and random-walk
//! Metropolis).
//!
//! All numeric work restricts the posterior to the window
//! [μ_{1+x} − 10σ_{1+x}, μ_{1+x} + 10σ_{1+x}]. For every non-degenerate
//! posterior the mass outside is far below 1e-8; if hyperparameters push
//! mass out of the window (a probit ramp dozens of σ away), the grid
//! construction detects the missing mass and reports an accuracy error
//! instead of returning silently truncated answers.

use super::hier::{hier_density, hier_log_density};
use super::HierPosterior;
use crate::error::{Error, Result};
use crate::stats::quadrature::{gk15_panel, integrate};
use crate::stats::rng::RngStream;
use serde::{Deserialize, Serialize};

/// Half-width of the integration window in posterior standard deviations.
const WINDOW_SDS: f64 = 10.0;
/// Number of equal panels in the precomputed CDF grid.
const GRID_PANELS: usize = 1024;
/// Quantile convergence tolerance in CDF space.
const QUANTILE_CDF_TOL: f64 = 1e-9;

/// Default Metropolis burn-in (discarded leading iterations).
pub const DEFAULT_BURN_IN: usize = 1000;
/// Thinning stride used when comparing MCMC output distributionally
/// (for example in Kolmogorov–Smirnov checks against the grid sampler).
pub const MCMC_THIN: usize = 10;

fn window(post: &HierPosterior) -> (f64, f64) {
    let m = post.conjugate.mean;
    let s = post.conjugate.sd;
    (m - WINDOW_SDS * s, m + WINDOW_SDS * s)
}

/// Posterior CDF at θ, by adaptive quadrature of the density from the lower
/// window edge (exact conjugate CDF when the posterior reduces to it).
/// `theta` may be ±∞; NaN is rejected.
pub fn hier_cdf(theta: f64, post: &HierPosterior) -> Result<f64> {
    if theta.is_nan() {
        return Err(Error::domain("hier_cdf", "theta is NaN"));
    }
    if post.reduces_to_conjugate() {
        return Ok(post.conjugate.cdf(theta));
    }
    let (lo, hi) = window(post);
    if theta <= lo {
        return Ok(0.0);
    }
    let upper = theta.min(hi);
    let result = integrate(|t| hier_density(t, post), lo, upper, 1e-10)?;
    Ok(result.value.clamp(0.0, 1.0))
}

/// Precomputed cumulative-mass grid over the posterior window: one GK15
/// panel per grid cell, with prefix sums, so a CDF evaluation costs a single
/// panel and quantiles can be bracketed in O(log panels).
pub(crate) struct HierGrid {
    lo: f64,
    hi: f64,
    step: f64,
    /// cum[i] = mass of the first i panels; cum[0] = 0.
    cum: Vec<f64>,
}

impl HierGrid {
    pub(crate) fn build(post: &HierPosterior) -> Result<Self> {
        let (lo, hi) = window(post);
        let step = (hi - lo) / GRID_PANELS as f64;
        let mut cum = Vec::with_capacity(GRID_PANELS + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..GRID_PANELS {
            let a = lo + step * i as f64;
            let b = if i + 1 == GRID_PANELS {
                hi
            } else {
                lo + step * (i + 1) as f64
            };
            let (value, _) = gk15_panel(|t| hier_density(t, post), a, b)?;
            acc += value;
            cum.push(acc);
        }
        if (acc - 1.0).abs() > 1e-6 {
            return Err(Error::Accuracy {
                op: "HierGrid::build",
                best: acc,
                error_estimate: (acc - 1.0).abs(),
                tolerance: 1e-6,
                evaluations: (15 * GRID_PANELS) as u64,
            });
        }
        Ok(HierGrid { lo, hi, step, cum })
    }

    fn total(&self) -> f64 {
        *self.cum.last().expect("grid has panels")
    }

    fn cdf(&self, post: &HierPosterior, theta: f64) -> Result<f64> {
        if theta <= self.lo {
            return Ok(0.0);
        }
        if theta >= self.hi {
            return Ok(self.total().min(1.0));
        }
        let idx = (((theta - self.lo) / self.step) as usize).min(GRID_PANELS - 1);
        let a = self.lo + self.step * idx as f64;
        let (value, _) = gk15_panel(|t| hier_density(t, post), a, theta)?;
        Ok((self.cum[idx] + value).clamp(0.0, 1.0))
    }

    /// Solves cdf(θ) = p by safeguarded Newton (density as derivative,
    /// bisection fallback) inside the bracketing panel.
    fn quantile(&self, post: &HierPosterior, p: f64) -> Result<f64> {
        let k = self
            .cum
            .partition_point(|&c| c < p)
            .saturating_sub(1)
            .min(GRID_PANELS - 1);
        let mut bracket_lo = self.lo + self.step * k as f64;
        let mut bracket_hi = bracket_lo + self.step;
        let mut x = 0.5 * (bracket_lo + bracket_hi);
        let mut evaluations = 0u64;
        let mut best_gap = f64::INFINITY;
        for _ in 0..120 {
            let gap = self.cdf(post, x)? - p;
            evaluations += 16;
            best_gap = best_gap.min(gap.abs());
            if gap.abs() < QUANTILE_CDF_TOL {
                return Ok(x);
            }
            if gap > 0.0 {
                bracket_hi = x;
            } else {
                bracket_lo = x;
            }
            let density = hier_density(x, post);
            let mut next = if density > 0.0 { x - gap / density } else { f64::NAN };
            if !(next > bracket_lo && next < bracket_hi) {
                next = 0.5 * (bracket_lo + bracket_hi);
            }
            x = next;
        }
        Err(Error::Accuracy {
            op: "hier_quantile",
            best: x,
            error_estimate: best_gap,
            tolerance: QUANTILE_CDF_TOL,
            evaluations,
        })
    }
}

/// Posterior quantile: monotone root-finding on the CDF so that
/// |hier_cdf(hier_quantile(p)) − p| < 1e-8. Requires p ∈ (0, 1).
pub fn hier_quantile(p: f64, post: &HierPosterior) -> Result<f64> {
    Ok(hier_quantiles(post, &[p])?[0])
}

/// Batch quantiles sharing one CDF grid (the grid build dominates the cost
/// of a single quantile).
pub fn hier_quantiles(post: &HierPosterior, ps: &[f64]) -> Result<Vec<f64>> {
    for &p in ps {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(
                "hier_quantile",
                format!("p = {p} must lie in (0, 1)"),
            ));
        }
    }
    if post.reduces_to_conjugate() {
        return ps.iter().map(|&p| post.conjugate.quantile(p)).collect();
    }
    let grid = HierGrid::build(post)?;
    ps.iter().map(|&p| grid.quantile(post, p)).collect()
}

/// Window mass and the first two posterior moments by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMoments {
    /// Integral of the density over the 10σ window (should be 1 within
    /// 1e-8 for a healthy posterior).
    pub mass: f64,
    /// Posterior mean (normalized within the window).
    pub mean: f64,
    /// Posterior standard deviation.
    pub sd: f64,
}

/// Computes [`PosteriorMoments`]; exact for the conjugate reduction.
pub fn posterior_moments(post: &HierPosterior) -> Result<PosteriorMoments> {
    if post.reduces_to_conjugate() {
        return Ok(PosteriorMoments {
            mass: 1.0,
            mean: post.conjugate.mean,
            sd: post.conjugate.sd,
        });
    }
    let (lo, hi) = window(post);
    let scale = 1.0 + post.conjugate.mean.abs() + WINDOW_SDS * post.conjugate.sd;
    let mass = integrate(|t| hier_density(t, post), lo, hi, 1e-10)?.value;
    let first = integrate(|t| t * hier_density(t, post), lo, hi, 1e-10 * scale)?.value;
    let mean = first / mass;
    let central2 = integrate(
        |t| {
            let d = t - mean;
            d * d * hier_density(t, post)
        },
        lo,
        hi,
        1e-10 * scale * scale,
    )?
    .value
        / mass;
    Ok(PosteriorMoments {
        mass,
        mean,
        sd: central2.sqrt(),
    })
}

/// Draws m iid samples by inverse-CDF on the quantile grid (exact conjugate
/// quantiles when the posterior reduces). Deterministic given the stream.
pub fn sample_grid(post: &HierPosterior, m: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if m < 1 {
        return Err(Error::domain("sample_grid", "m must be at least 1"));
    }
    if post.reduces_to_conjugate() {
        return (0..m)
            .map(|_| post.conjugate.quantile(rng.uniform()))
            .collect();
    }
    let grid = HierGrid::build(post)?;
    (0..m).map(|_| grid.quantile(post, rng.uniform())).collect()
}

/// Output of [`sample_mcmc`]: the post-burn-in chain and its acceptance
/// diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcSample {
    /// Post-burn-in draws, in chain order (not thinned).
    pub draws: Vec<f64>,
    /// Fraction of accepted proposals over the retained phase.
    pub acceptance_rate: f64,
    /// True when the acceptance rate left [0.1, 0.9] — the step size needs
    /// retuning; the draws are still returned.
    pub tuning_warning: bool,
}

/// Standard 1-D random-walk proposal scale: 2.4 posterior standard
/// deviations of the conjugate component.
pub fn default_mcmc_step(post: &HierPosterior) -> f64 {
    2.4 * post.conjugate.sd
}

/// Random-walk Metropolis targeting the hierarchical log-density: proposals
/// θ' = θ + step·N(0,1), started at the conjugate mean. Consumes exactly
/// two stream draws per iteration, so output is deterministic given the
/// stream.
pub fn sample_mcmc(
    post: &HierPosterior,
    m: usize,
    burn_in: usize,
    step: f64,
    rng: &mut RngStream,
) -> Result<McmcSample> {
    if m < 1 {
        return Err(Error::domain("sample_mcmc", "m must be at least 1"));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::domain(
            "sample_mcmc",
            format!("step = {step} must be positive and finite"),
        ));
    }
    let mut current = post.conjugate.mean;
    let mut current_lp = hier_log_density(current, post);
    let mut draws = Vec::with_capacity(m);
    let mut accepted = 0u64;
    for i in 0..burn_in + m {
        let proposal = current + step * rng.standard_normal();
        let proposal_lp = hier_log_density(proposal, post);
        // The uniform is always consumed to keep the draw count per
        // iteration fixed.
        let u = rng.uniform();
        if u.ln() < proposal_lp - current_lp {
            current = proposal;
            current_lp = proposal_lp;
            if i >= burn_in {
                accepted += 1;
            }
        }
        if i >= burn_in {
            draws.push(current);
        }
    }
    let acceptance_rate = accepted as f64 / m as f64;
    Ok(McmcSample {
        draws,
        acceptance_rate,
        tuning_warning: !(0.1..=0.9).contains(&acceptance_rate),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::hier::{hier_posterior_mean, hier_posterior_mode};
    use crate::bayes::test_fixtures::*;
    use crate::bayes::{hier_posterior, DesignPrior};
    use crate::trial::Investigator;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn cdf_reference_values() {
        let post = example_posterior_b();
        for (theta, expected) in [
            (1.0, 0.00023905411376855398),
            (1.5, 0.41346644363159805),
            (2.0, 0.87618184546710199),
            (1.6247121369061606, 0.57976024768514947),
        ] {
            assert_abs_diff_eq!(hier_cdf(theta, &post).unwrap(), expected, epsilon = 1e-9);
        }
        let stopped = stopped_posterior_b();
        assert_abs_diff_eq!(
            hier_cdf(2.0, &stopped).unwrap(),
            0.62297142513608338,
            epsilon = 1e-9
        );
    }

    #[test]
    fn cdf_limits_and_reductions() {
        let post = example_posterior_b();
        assert_abs_diff_eq!(hier_cdf(f64::INFINITY, &post).unwrap(), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(
            hier_cdf(post.conjugate.mean + 100.0, &post).unwrap(),
            1.0,
            epsilon = 1e-8
        );
        assert_eq!(hier_cdf(f64::NEG_INFINITY, &post).unwrap(), 0.0);
        assert!(hier_cdf(f64::NAN, &post).is_err());

        // b = 0 and investigator A: exact conjugate CDF values.
        let (theta_prior, design_prior) = example_priors();
        let b0 = DesignPrior::new(-0.5, 0.0, 0.1).unwrap();
        let pb0 = hier_posterior(
            &table1_summary(),
            &theta_prior,
            &b0,
            &design(Investigator::B),
        )
        .unwrap();
        let pa = hier_posterior(
            &table1_summary(),
            &theta_prior,
            &design_prior,
            &design(Investigator::A),
        )
        .unwrap();
        for k in -5..=5 {
            let theta = 0.9 + 0.4 * k as f64;
            assert_eq!(hier_cdf(theta, &pb0).unwrap(), pb0.conjugate.cdf(theta));
            assert_eq!(hier_cdf(theta, &pa).unwrap(), pa.conjugate.cdf(theta));
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let post = example_posterior_b();
        for p in [1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0 - 1e-6] {
            let q = hier_quantile(p, &post).unwrap();
            assert_abs_diff_eq!(hier_cdf(q, &post).unwrap(), p, epsilon = 1e-8);
        }
        assert!(hier_quantile(0.0, &post).is_err());
        assert!(hier_quantile(1.0, &post).is_err());
    }

    #[test]
    fn median_and_skewness_ordering() {
        let post = example_posterior_b();
        let median = hier_quantile(0.5, &post).unwrap();
        assert_abs_diff_eq!(median, 1.5614639090977835, epsilon = 1e-7);
        let mode = hier_posterior_mode(&post).unwrap();
        let mean = hier_posterior_mean(&post).unwrap();
        // Right-skew ordering for the continued trial with b > 0.
        assert!(mode < median && median < mean, "{mode} < {median} < {mean}");

        let stopped = stopped_posterior_b();
        assert_abs_diff_eq!(
            hier_quantile(0.5, &stopped).unwrap(),
            1.7958945239717511,
            epsilon = 1e-7
        );
    }

    #[test]
    fn moments_match_closed_form_and_frozen_sd() {
        let post = example_posterior_b();
        let m = posterior_moments(&post).unwrap();
        assert_abs_diff_eq!(m.mass, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(
            m.mean,
            hier_posterior_mean(&post).unwrap(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(m.sd, 0.31285579544885801, epsilon = 1e-8);

        let stopped = stopped_posterior_b();
        let ms = posterior_moments(&stopped).unwrap();
        assert_abs_diff_eq!(ms.mass, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(
            ms.mean,
            hier_posterior_mean(&stopped).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn grid_detects_mass_escaping_the_window() {
        // A probit ramp ~25 joint-sd above the kernel: the normalizer is
        // representable but the posterior mass lives outside the 10σ window.
        let (theta_prior, _) = example_priors();
        let far = DesignPrior::new(-15.12, 1.0, 0.01).unwrap();
        let post = hier_posterior(
            &table1_summary(),
            &theta_prior,
            &far,
            &design(Investigator::B),
        )
        .unwrap();
        assert!(post.normalizer > 1e-300);
        let err = hier_quantile(0.5, &post).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }), "got {err:?}");
    }

    #[test]
    fn grid_sampler_matches_theoretical_mean() {
        let post = example_posterior_b();
        let mut rng = RngStream::new(0x5EED, 1);
        let m = 100_000;
        let draws = sample_grid(&post, m, &mut rng).unwrap();
        let mean = draws.iter().sum::<f64>() / m as f64;
        let tol = 4.0 * 0.31285579544885801 / (m as f64).sqrt();
        assert_abs_diff_eq!(mean, 1.6247121369061606, epsilon = tol);
        // Deterministic under the same stream.
        let mut rng2 = RngStream::new(0x5EED, 1);
        let draws2 = sample_grid(&post, m, &mut rng2).unwrap();
        assert_eq!(draws, draws2);
    }

    #[test]
    fn grid_sampler_b0_reduces_to_conjugate_draws() {
        let (theta_prior, _) = example_priors();
        let b0 = DesignPrior::new(-0.5, 0.0, 0.1).unwrap();
        let post = hier_posterior(
            &table1_summary(),
            &theta_prior,
            &b0,
            &design(Investigator::B),
        )
        .unwrap();
        let mut rng = RngStream::new(0x5EED, 2);
        let draws = sample_grid(&post, 50_000, &mut rng).unwrap();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let sd = (draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n).sqrt();
        assert_abs_diff_eq!(mean, post.conjugate.mean, epsilon = 4.0 * post.conjugate.sd / n.sqrt());
        assert_relative_eq!(sd, post.conjugate.sd, epsilon = 0.02);
    }

    #[test]
    fn mcmc_matches_posterior_means() {
        // Investigator B: 2·10⁵ draws must land within ±0.02 of 1.6247.
        let post = example_posterior_b();
        let mut rng = RngStream::new(0x4D43, 0);
        let out = sample_mcmc(&post, 200_000, DEFAULT_BURN_IN, default_mcmc_step(&post), &mut rng)
            .unwrap();
        let mean = out.draws.iter().sum::<f64>() / out.draws.len() as f64;
        assert_abs_diff_eq!(mean, 1.6247121369061606, epsilon = 0.02);
        assert!(!out.tuning_warning, "acceptance {}", out.acceptance_rate);
        assert!(out.acceptance_rate > 0.1 && out.acceptance_rate < 0.9);

        // Investigator A: ±0.01 of the conjugate mean 0.8911.
        let (theta_prior, design_prior) = example_priors();
        let pa = hier_posterior(
            &table1_summary(),
            &theta_prior,
            &design_prior,
            &design(Investigator::A),
        )
        .unwrap();
        let mut rng_a = RngStream::new(0xA11CE, 0);
        let out_a =
            sample_mcmc(&pa, 200_000, DEFAULT_BURN_IN, default_mcmc_step(&pa), &mut rng_a)
                .unwrap();
        let mean_a = out_a.draws.iter().sum::<f64>() / out_a.draws.len() as f64;
        assert_abs_diff_eq!(mean_a, 0.89111979090909091, epsilon = 0.01);
    }

    #[test]
    fn mcmc_is_deterministic_and_validates_input() {
        let post = example_posterior_b();
        let step = default_mcmc_step(&post);
        let a = sample_mcmc(&post, 500, 100, step, &mut RngStream::new(9, 9)).unwrap();
        let b = sample_mcmc(&post, 500, 100, step, &mut RngStream::new(9, 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws.len(), 500);
        assert!(sample_mcmc(&post, 0, 100, step, &mut RngStream::new(9, 9)).is_err());
        assert!(sample_mcmc(&post, 10, 100, 0.0, &mut RngStream::new(9, 9)).is_err());
        assert!(sample_grid(&post, 0, &mut RngStream::new(9, 9)).is_err());
    }

    #[test]
    fn mcmc_flags_bad_tuning() {
        // An absurdly large step is rejected almost always.
        let post = example_posterior_b();
        let out = sample_mcmc(&post, 2000, 100, 1e6, &mut RngStream::new(4, 4)).unwrap();
        assert!(out.acceptance_rate < 0.1);
        assert!(out.tuning_warning);
    }
}
