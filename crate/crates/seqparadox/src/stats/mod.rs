//! Numerical foundations: normal special functions, truncated-normal
//! moments, the probit-normal integral, adaptive quadrature, and the
//! deterministic RNG-substream contract used by all Monte Carlo code.

pub mod erf;
pub mod normal;
pub mod probit;
pub mod quadrature;
pub mod rng;
pub mod truncated;

pub use normal::{norm_cdf, norm_log_cdf, norm_pdf, norm_quantile, StdNormalEval};
pub use probit::{probit_normal_integral, Sign};
pub use quadrature::{integrate, QuadratureResult};
pub use rng::RngStream;
pub use truncated::truncated_normal_mean;
