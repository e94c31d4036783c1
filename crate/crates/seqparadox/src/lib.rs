//! One-interim group-sequential trial inference, both ways.
//!
//! This crate implements, simulates and cross-verifies the frequentist and
//! Bayesian analyses of a two-stage normal trial in which a second batch of
//! observations is collected only when the first-stage mean falls at or
//! below a threshold. Two analysts look at the same data: investigator A
//! planned a fixed-size study, investigator B ran the sequential rule. The
//! library provides
//!
//! - the trial simulator, likelihoods with and without the design factor,
//!   and a numerical proportionality check ([`trial`]);
//! - exact selection-bias formulas for the maximum-likelihood estimator and
//!   the plug-in bias-corrected estimate ([`freq`]);
//! - the conjugate posterior and, under a linear Gaussian prior coupling the
//!   threshold to the treatment effect, investigator B's closed-form
//!   hierarchical posterior with density, mean, mode, MGF, CDF/quantiles and
//!   two independent samplers ([`bayes`]);
//! - simulation-based calibration (SBC) studies, Monte Carlo verification of
//!   the bias formulas, a selection-shift demonstration, and a greedy
//!   stopping-rule miscalibration demo ([`calibration`]);
//! - numerical foundations: normal special functions, truncated-normal
//!   moments, the probit-normal integral, adaptive Gauss–Kronrod quadrature
//!   and reproducible RNG substreams ([`stats`]).
//!
//! All stochastic entry points take explicit `(master_seed, stream_index)`
//! randomness, and replicate-parallel studies are bitwise reproducible
//! regardless of worker count.

// Reference values are frozen at their full printed precision even where
// that exceeds f64 resolution, and validators spell `!(x > 0.0)` so that
// NaN fails them too.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod freq;
pub mod stats;
pub mod trial;

pub use error::{Error, Result};
