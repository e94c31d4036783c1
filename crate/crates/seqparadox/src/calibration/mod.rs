//! Calibration studies: simulation-based calibration (SBC) of the
//! posteriors over a joint prior universe, Monte Carlo verification of the
//! selection-bias formulas, the selection-shift demonstration, the greedy
//! stopping-rule miscalibration demo, and the empirical-Bayes equivalence
//! check.
//!
//! All studies draw replicate `i` from `RngStream::new(master_seed, i)`, so
//! results are bitwise identical regardless of how many rayon workers run
//! them.

pub mod beta;
pub mod ks;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{
    conjugate_posterior, correction_term, empirical_bayes_b, hier_cdf, hier_posterior,
    DesignPrior, ThetaPrior,
};
use crate::error::{Error, Result};
use crate::freq::{bias_corrected_estimate, mle, BiasReport};
use crate::stats::rng::RngStream;
use crate::trial::{
    simulate_greedy, simulate_trial, summarize, DesignConfig, Investigator, TrialData,
    TrialSummary,
};

pub use beta::beta_reg;
pub use ks::{kolmogorov_sf, ks_two_sample, ks_uniform, KsResult};

/// Number of bins in the PIT histogram of a [`UniformityReport`].
pub const HISTOGRAM_BINS: usize = 20;

/// Conditioned SBC stops after `n_reps * MAX_ATTEMPT_FACTOR` attempts even
/// if the retention quota is unmet, so that a near-impossible conditioning
/// event cannot hang a study.
const MAX_ATTEMPT_FACTOR: usize = 10_000;

/// The joint prior universe a calibration study simulates from: a proper
/// prior on the effect Θ, optionally a linear Gaussian prior coupling the
/// threshold Ψ to Θ (absent ⇒ the fixed ψ from `design` is used), the trial
/// design, the replicate count, and the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseConfig {
    pub theta_prior: ThetaPrior,
    pub design_prior: Option<DesignPrior>,
    pub design: DesignConfig,
    pub n_reps: usize,
    pub master_seed: u64,
}

impl UniverseConfig {
    pub fn validate(&self) -> Result<()> {
        self.theta_prior.validate()?;
        if let Some(dp) = &self.design_prior {
            dp.validate()?;
        }
        self.design.validate()?;
        if self.n_reps == 0 {
            return Err(Error::InvalidConfig(
                "n_reps must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    /// The universe must be samplable, which rules out the flat prior.
    fn proper_prior(&self) -> Result<(f64, f64)> {
        match self.theta_prior {
            ThetaPrior::Normal { mu, tau } => Ok((mu, tau)),
            ThetaPrior::Flat => Err(Error::UnsupportedInput {
                op: "calibration universe",
                reason: "a flat prior on theta cannot be sampled; use a proper normal prior"
                    .to_string(),
            }),
        }
    }
}

/// Which posterior the SBC run evaluates at the true Θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorKind {
    Conjugate,
    Hierarchical,
}

/// One SBC replicate: the drawn parameters, the simulated trial, and the
/// designated posterior's CDF evaluated at the true Θ (the probability
/// integral transform, PIT).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub theta: f64,
    pub psi: f64,
    pub data: TrialData,
    pub posterior_cdf_at_theta: f64,
}

/// Uniformity diagnostics for a batch of PIT values: a 20-bin histogram and
/// a Kolmogorov–Smirnov test against Uniform(0, 1).
///
/// `n_attempted` counts universe draws including those discarded by
/// conditioning (`n_attempted == n_used` for unconditioned runs); the ratio
/// `n_used / n_attempted` estimates the retention probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub n_used: usize,
    pub n_attempted: usize,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub histogram: [u64; HISTOGRAM_BINS],
}

impl UniformityReport {
    pub(crate) fn from_pits(pits: &[f64], n_attempted: usize) -> Result<Self> {
        let ks = ks_uniform(pits)?;
        let mut histogram = [0u64; HISTOGRAM_BINS];
        for &p in pits {
            let bin = ((p * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            histogram[bin] += 1;
        }
        Ok(Self {
            n_used: pits.len(),
            n_attempted,
            ks_statistic: ks.statistic,
            ks_p_value: ks.p_value,
            histogram,
        })
    }

    /// Convenience: does the KS test accept uniformity at level `alpha`?
    pub fn passes(&self, alpha: f64) -> bool {
        self.ks_p_value > alpha
    }
}

/// Draws (Θ, Ψ) for one replicate. Order is fixed: Θ first, then the
/// threshold noise (when a design prior is present), then the caller
/// simulates the trial from the same stream.
fn draw_parameters(cfg: &UniverseConfig, rng: &mut RngStream) -> Result<(f64, f64)> {
    let (mu, tau) = cfg.proper_prior()?;
    let theta = rng.normal(mu, tau);
    let psi = match &cfg.design_prior {
        Some(dp) => dp.a + dp.b * theta + rng.normal(0.0, dp.omega),
        None => cfg.design.psi,
    };
    Ok((theta, psi))
}

/// One SBC attempt on stream `attempt`; `Ok(None)` means the replicate was
/// discarded by the conditioning event.
fn sbc_attempt(
    cfg: &UniverseConfig,
    posterior: PosteriorKind,
    condition_on_x: Option<bool>,
    attempt: usize,
) -> Result<Option<Replicate>> {
    let mut rng = RngStream::new(cfg.master_seed, attempt as u64);
    let (theta, psi) = draw_parameters(cfg, &mut rng)?;
    let design_rep = DesignConfig { psi, ..cfg.design };
    let data = simulate_trial(&design_rep, theta, &mut rng)?;
    if let Some(required) = condition_on_x {
        if data.x != required {
            return Ok(None);
        }
    }
    let summary = summarize(&data);
    let posterior_cdf_at_theta = match posterior {
        PosteriorKind::Conjugate => {
            conjugate_posterior(&summary, &cfg.theta_prior, &design_rep)?.cdf(theta)
        }
        PosteriorKind::Hierarchical => {
            let dp = cfg
                .design_prior
                .as_ref()
                .expect("checked by run_sbc_replicates");
            let post = hier_posterior(&summary, &cfg.theta_prior, dp, &design_rep)?;
            hier_cdf(theta, &post)?
        }
    };
    Ok(Some(Replicate {
        theta,
        psi,
        data,
        posterior_cdf_at_theta,
    }))
}

/// Runs an SBC study and returns only the uniformity report. See
/// [`run_sbc_replicates`] for the semantics.
pub fn run_sbc(
    cfg: &UniverseConfig,
    posterior: PosteriorKind,
    condition_on_x: Option<bool>,
) -> Result<UniformityReport> {
    run_sbc_replicates(cfg, posterior, condition_on_x).map(|(report, _)| report)
}

/// Runs an SBC study and returns the report together with every retained
/// replicate (for CSV export).
///
/// Each attempt `i` draws Θ (and Ψ when a design prior is present) from
/// `RngStream::new(master_seed, i)` and simulates the trial. With
/// `condition_on_x = Some(x)`, attempts whose indicator differs are
/// discarded and attempts continue until `n_reps` replicates are retained
/// (so `n_reps` is a retained-replicate quota); a budget of
/// `10^4 * n_reps` attempts bounds the search, and a report with
/// `n_used < n_reps` is returned when the budget is exhausted with at least
/// one retained replicate. Retention is by attempt order, which makes the
/// result independent of the number of rayon workers.
pub fn run_sbc_replicates(
    cfg: &UniverseConfig,
    posterior: PosteriorKind,
    condition_on_x: Option<bool>,
) -> Result<(UniformityReport, Vec<Replicate>)> {
    cfg.validate()?;
    cfg.proper_prior()?;
    if posterior == PosteriorKind::Hierarchical && cfg.design_prior.is_none() {
        return Err(Error::InvalidConfig(
            "hierarchical SBC requires a design prior in the universe".to_string(),
        ));
    }
    let quota = cfg.n_reps;
    let cap = if condition_on_x.is_some() {
        quota.saturating_mul(MAX_ATTEMPT_FACTOR)
    } else {
        quota
    };
    let batch_size = if condition_on_x.is_some() {
        (4 * quota).clamp(256, 65_536).min(cap)
    } else {
        quota
    };

    let mut replicates: Vec<Replicate> = Vec::with_capacity(quota);
    let mut n_attempted = cap;
    let mut next = 0usize;
    'search: while replicates.len() < quota && next < cap {
        let hi = (next + batch_size).min(cap);
        let batch: Vec<Option<Replicate>> = (next..hi)
            .into_par_iter()
            .map(|i| sbc_attempt(cfg, posterior, condition_on_x, i))
            .collect::<Result<_>>()?;
        for (offset, item) in batch.into_iter().enumerate() {
            if let Some(rep) = item {
                replicates.push(rep);
                if replicates.len() == quota {
                    n_attempted = next + offset + 1;
                    break 'search;
                }
            }
        }
        next = hi;
    }

    if replicates.is_empty() {
        let wanted = match condition_on_x {
            Some(true) => "x = 1",
            Some(false) => "x = 0",
            None => "any x",
        };
        return Err(Error::EmptySelection(format!(
            "no replicate matched {wanted} in {cap} attempts"
        )));
    }
    let pits: Vec<f64> = replicates
        .iter()
        .map(|r| r.posterior_cdf_at_theta)
        .collect();
    let report = UniformityReport::from_pits(&pits, n_attempted)?;
    Ok((report, replicates))
}

/// Serializes replicates as CSV, one row per replicate.
pub fn replicates_to_csv(replicates: &[Replicate]) -> String {
    let mut out = String::from("theta,psi,x,ybar1,ybar,cdf_at_theta\n");
    for rep in replicates {
        let s = summarize(&rep.data);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rep.theta,
            rep.psi,
            u8::from(s.x),
            s.ybar1,
            s.ybar,
            rep.posterior_cdf_at_theta
        ));
    }
    out
}

/// Sample size, mean, and Monte Carlo standard error of one stratum.
/// A single-replicate stratum reports `se = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumStats {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

fn stratum(values: &[f64]) -> Option<StratumStats> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n == 1 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        (var / n as f64).sqrt()
    };
    Some(StratumStats { n, mean, se })
}

/// Output of [`selection_shift_study`]: the empirical mean of Θ overall and
/// within the continuation (`x = 1`) and stop (`x = 0`) strata. Empty
/// strata are reported as absent rather than as an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionShiftReport {
    pub n_reps: usize,
    pub overall: StratumStats,
    pub continued: Option<StratumStats>,
    pub stopped: Option<StratumStats>,
    /// The observed first-stage mean the study conditioned on, if any.
    pub reference_ybar1: Option<f64>,
}

/// Demonstrates the selection (collider) effect: when the threshold prior
/// couples Ψ to Θ with slope b ≠ 0, learning the continuation indicator
/// shifts the Θ distribution.
///
/// Two modes:
///
/// * `reference_ybar1 = Some(ybar1)` (the paradox as experienced by the
///   analyst holding data): replicates draw (Θ, Ψ) from the prior and set
///   `x = 1{ybar1 ≤ Ψ}` for the *fixed observed* first-stage mean. The
///   shift of the continued stratum has the sign of b.
/// * `reference_ybar1 = None` (marginal over data): each replicate also
///   simulates its own trial, so `x = 1{ȳ⁽¹⁾ ≤ Ψ}` with ȳ⁽¹⁾ drawn from
///   the replicate's own Θ. The shift then has the sign of b − 1 (at b = 1
///   the first-stage noise exactly cancels the coupling), which is the
///   reason the conditioned mode is the interesting demonstration.
pub fn selection_shift_study(
    cfg: &UniverseConfig,
    reference_ybar1: Option<f64>,
) -> Result<SelectionShiftReport> {
    cfg.validate()?;
    cfg.proper_prior()?;
    if cfg.design_prior.is_none() {
        return Err(Error::InvalidConfig(
            "selection_shift_study requires a design prior coupling psi to theta".to_string(),
        ));
    }
    if let Some(r) = reference_ybar1 {
        if !r.is_finite() {
            return Err(Error::domain(
                "selection_shift_study",
                format!("reference_ybar1 = {r} must be finite"),
            ));
        }
    }
    let draws: Vec<(f64, bool)> = (0..cfg.n_reps)
        .into_par_iter()
        .map(|i| -> Result<(f64, bool)> {
            let mut rng = RngStream::new(cfg.master_seed, i as u64);
            let (theta, psi) = draw_parameters(cfg, &mut rng)?;
            let x = match reference_ybar1 {
                Some(ybar1) => ybar1 <= psi,
                None => {
                    let design_rep = DesignConfig { psi, ..cfg.design };
                    simulate_trial(&design_rep, theta, &mut rng)?.x
                }
            };
            Ok((theta, x))
        })
        .collect::<Result<_>>()?;
    let all: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let continued: Vec<f64> = draws.iter().filter(|d| d.1).map(|d| d.0).collect();
    let stopped: Vec<f64> = draws.iter().filter(|d| !d.1).map(|d| d.0).collect();
    Ok(SelectionShiftReport {
        n_reps: cfg.n_reps,
        overall: stratum(&all).expect("n_reps >= 1 was validated"),
        continued: stratum(&continued),
        stopped: stratum(&stopped),
        reference_ybar1,
    })
}

/// Closed-form bias quantities side by side with their Monte Carlo
/// estimates.
///
/// `closed_form` is `None` when no closed form applies: investigator A's
/// fixed design has no selection bias to report, and a threshold so extreme
/// that one branch's conditioning probability underflows makes the
/// conditional means degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasMcReport {
    pub theta: f64,
    pub design: DesignConfig,
    pub n_reps: usize,
    pub closed_form: Option<BiasReport>,
    /// MC estimate of the marginal mean E[θ̂].
    pub marginal: StratumStats,
    /// MC estimate of E[θ̂ | x = 0]; absent if no replicate stopped.
    pub stopped: Option<StratumStats>,
    /// MC estimate of E[θ̂ | x = 1]; absent if no replicate continued.
    pub continued: Option<StratumStats>,
    /// MC estimate of the continuation probability P(x = 1), with binomial
    /// standard error.
    pub continuation_prob: StratumStats,
}

/// Monte Carlo verification of the selection-bias formulas: simulates
/// `n_reps` trials at a fixed true effect and reports the empirical mean of
/// the MLE marginally and within each stopping stratum, next to the closed
/// forms.
pub fn bias_mc_study(
    theta: f64,
    design: &DesignConfig,
    n_reps: usize,
    master_seed: u64,
) -> Result<BiasMcReport> {
    design.validate()?;
    if !theta.is_finite() {
        return Err(Error::domain(
            "bias_mc_study",
            format!("theta = {theta} must be finite"),
        ));
    }
    if n_reps < 10_000 {
        return Err(Error::InvalidConfig(format!(
            "bias_mc_study needs at least 10^4 replicates for usable standard errors, got {n_reps}"
        )));
    }
    let draws: Vec<(f64, bool)> = (0..n_reps)
        .into_par_iter()
        .map(|i| -> Result<(f64, bool)> {
            let mut rng = RngStream::new(master_seed, i as u64);
            let data = simulate_trial(design, theta, &mut rng)?;
            Ok((mle(&summarize(&data)), data.x))
        })
        .collect::<Result<_>>()?;
    let all: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let continued: Vec<f64> = draws.iter().filter(|d| d.1).map(|d| d.0).collect();
    let stopped: Vec<f64> = draws.iter().filter(|d| !d.1).map(|d| d.0).collect();
    let p_hat = continued.len() as f64 / n_reps as f64;
    let continuation_prob = StratumStats {
        n: n_reps,
        mean: p_hat,
        se: (p_hat * (1.0 - p_hat) / n_reps as f64).sqrt(),
    };
    let closed_form = match design.investigator {
        Investigator::A => None,
        Investigator::B => match BiasReport::new(theta, design) {
            Ok(report) => Some(report),
            Err(Error::DegenerateConditioning { .. }) => None,
            Err(e) => return Err(e),
        },
    };
    Ok(BiasMcReport {
        theta,
        design: *design,
        n_reps,
        closed_form,
        marginal: stratum(&all).expect("n_reps >= 10^4"),
        stopped: stratum(&stopped),
        continued: stratum(&continued),
        continuation_prob,
    })
}

/// SBC for the greedy design of a Bernoulli(p) sequence: p is drawn from a
/// Beta prior, the greedy stopping rule picks the prefix with the highest
/// running mean, and two posteriors are scored by their CDF at the true p —
/// the *naive* posterior `Beta(α + s, β + n0 − s)` that treats the retained
/// prefix as a fixed-size sample, and the *full* posterior updated on all N
/// raw outcomes. The full posterior is calibrated; the naive one is not,
/// because the greedy rule's likelihood is not proportional to the
/// fixed-design one.
///
/// Returns `(naive, full)` uniformity reports.
pub fn greedy_miscalibration_demo(
    n_total: usize,
    beta_prior: (f64, f64),
    n_reps: usize,
    master_seed: u64,
) -> Result<(UniformityReport, UniformityReport)> {
    let (alpha, beta_shape) = beta_prior;
    if n_total == 0 {
        return Err(Error::InvalidConfig(
            "greedy demo needs at least one observation per replicate".to_string(),
        ));
    }
    if n_reps == 0 {
        return Err(Error::InvalidConfig(
            "greedy demo needs at least one replicate".to_string(),
        ));
    }
    if !(alpha > 0.0) || !(beta_shape > 0.0) || !alpha.is_finite() || !beta_shape.is_finite() {
        return Err(Error::domain(
            "greedy_miscalibration_demo",
            format!("Beta prior shapes ({alpha}, {beta_shape}) must be positive and finite"),
        ));
    }
    let pits: Vec<(f64, f64)> = (0..n_reps)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut rng = RngStream::new(master_seed, i as u64);
            let p = beta::sample_beta(alpha, beta_shape, &mut rng);
            let greedy = simulate_greedy(n_total, p, &mut rng)?;
            let s_retained: u64 = greedy.retained.iter().map(|&b| u64::from(b)).sum();
            let s_all: u64 = greedy.raw.iter().map(|&b| u64::from(b)).sum();
            let naive = beta_reg(
                alpha + s_retained as f64,
                beta_shape + (greedy.n0 as f64 - s_retained as f64),
                p,
            )?;
            let full = beta_reg(
                alpha + s_all as f64,
                beta_shape + (greedy.n_total as f64 - s_all as f64),
                p,
            )?;
            Ok((naive, full))
        })
        .collect::<Result<_>>()?;
    let naive: Vec<f64> = pits.iter().map(|p| p.0).collect();
    let full: Vec<f64> = pits.iter().map(|p| p.1).collect();
    Ok((
        UniformityReport::from_pits(&naive, n_reps)?,
        UniformityReport::from_pits(&full, n_reps)?,
    ))
}

/// Evaluates the empirical-Bayes equivalence of the Bayesian and
/// frequentist correction terms: under a flat effect prior and the
/// data-driven hyperparameters b = ȳ⁽¹⁾/(2ȳ), ω = bσ/√(2n), a = bψ, the
/// hierarchical posterior-mean correction coincides with the frequentist
/// bias correction. Returns the absolute difference of the two corrections
/// (zero up to rounding when the identity holds).
///
/// Preconditions are those of [`empirical_bayes_b`]: the trial must have
/// continued (x = 1) and the two stage means must share a nonzero sign.
pub fn eb_equivalence_check(summary: &TrialSummary, design: &DesignConfig) -> Result<f64> {
    design.validate()?;
    let b = empirical_bayes_b(summary)?;
    let omega = b * design.sigma / (2.0 * design.n as f64).sqrt();
    let design_prior = DesignPrior::new(b * design.psi, b, omega)?;
    // The identity concerns investigator B's design factor; the design's
    // (n, σ, ψ) are used as given.
    let design_b = DesignConfig {
        investigator: Investigator::B,
        ..*design
    };
    let post = hier_posterior(summary, &ThetaPrior::Flat, &design_prior, &design_b)?;
    let bayes_correction = correction_term(&post)?;
    let freq_correction = bias_corrected_estimate(summary, &design_b)? - mle(summary);
    Ok((bayes_correction - freq_correction).abs())
}
