//! Kolmogorov–Smirnov uniformity tests for calibration histograms.
//!
//! `kolmogorov_sf` evaluates the asymptotic Kolmogorov distribution; the
//! finite-sample statistics are mapped onto it with the Stephens
//! small-sample correction, which keeps the test usable at the replicate
//! counts the calibration studies run (hundreds to a few thousand).

use crate::error::{Error, Result};

/// A KS statistic together with its (asymptotic, Stephens-corrected)
/// p-value.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution:
/// P(K > lambda) for the limiting statistic K.
///
/// Two complementary series are used: the Jacobi-theta form for small
/// lambda (where the alternating series needs many terms) and the
/// alternating exponential series elsewhere. Both are accurate to well
/// below 1e-10 at the 1.18 switch point.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !lambda.is_finite() {
        return if lambda > 0.0 { 0.0 } else { 1.0 };
    }
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K <= λ) = sqrt(2π)/λ · Σ_{k≥1} exp(−(2k−1)² π² / (8λ²))
        let t = (-std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda)).exp();
        let t2 = t * t; // t^2
        let t8 = t2 * t2 * t2 * t2; // t^8
        // exponents 1, 9, 25, 49 = successive odd squares
        let sum = t * (1.0 + t8 * (1.0 + t8 * t8 * (1.0 + t8 * t8 * t8)));
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * sum;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        // P(K > λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2 k² λ²)
        let q = (-2.0 * lambda * lambda).exp();
        let q4 = q * q * q * q;
        let q9 = q4 * q4 * q;
        let q16 = q9 * q4 * q * q * q;
        (2.0 * (q - q4 + q9 - q16)).clamp(0.0, 1.0)
    }
}

/// Stephens' finite-sample mapping of a KS statistic onto the asymptotic
/// distribution.
fn stephens_p_value(statistic: f64, n_effective: f64) -> f64 {
    let s = n_effective.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * statistic)
}

/// One-sample KS test of `sample` against the Uniform(0, 1) distribution.
/// The sample is not assumed sorted; values must lie in [0, 1].
pub fn ks_uniform(sample: &[f64]) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::domain("ks_uniform", "sample is empty".to_string()));
    }
    if let Some(&bad) = sample
        .iter()
        .find(|v| !v.is_finite() || !(0.0..=1.0).contains(*v))
    {
        return Err(Error::domain(
            "ks_uniform",
            format!("sample value {bad} lies outside [0, 1]"),
        ));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("values checked finite"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &u) in sorted.iter().enumerate() {
        let upper = (i + 1) as f64 / n - u; // D+ candidate
        let lower = u - i as f64 / n; // D- candidate
        d = d.max(upper).max(lower);
    }
    Ok(KsResult {
        statistic: d,
        p_value: stephens_p_value(d, n),
    })
}

/// Two-sample KS test. The effective sample size n1·n2/(n1+n2) feeds the
/// same Stephens correction as the one-sample case.
pub fn ks_two_sample(first: &[f64], second: &[f64]) -> Result<KsResult> {
    if first.is_empty() || second.is_empty() {
        return Err(Error::domain(
            "ks_two_sample",
            "both samples must be non-empty".to_string(),
        ));
    }
    for &v in first.iter().chain(second.iter()) {
        if !v.is_finite() {
            return Err(Error::domain(
                "ks_two_sample",
                format!("non-finite sample value {v}"),
            ));
        }
    }
    let mut a = first.to_vec();
    let mut b = second.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("values checked finite"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("values checked finite"));
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        let gap = (i as f64 / n1 as f64 - j as f64 / n2 as f64).abs();
        d = d.max(gap);
    }
    let n_eff = (n1 as f64) * (n2 as f64) / (n1 as f64 + n2 as f64);
    Ok(KsResult {
        statistic: d,
        p_value: stephens_p_value(d, n_eff),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng::RngStream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kolmogorov_sf_reference_values() {
        for (lambda, expected) in [
            (0.3, 0.99999069419866543),
            (0.5, 0.96394524366487509),
            (0.8, 0.54414241157419815),
            (1.0, 0.26999967167735452),
            (1.36, 0.04948587675537791),
            (1.6276, 0.010001537333060768),
            (2.0, 0.00067092525577969535),
        ] {
            assert_abs_diff_eq!(kolmogorov_sf(lambda), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn kolmogorov_sf_branches_agree_and_edges_hold() {
        // Both series are far inside their convergence regions at the
        // branch point, so they must agree there.
        let cross = 1.18;
        let theta = {
            let t = (-std::f64::consts::PI * std::f64::consts::PI / (8.0 * cross * cross)).exp();
            1.0 - (2.0 * std::f64::consts::PI).sqrt() / cross
                * (t + t.powi(9) + t.powi(25) + t.powi(49))
        };
        let series = {
            let q = (-2.0 * cross * cross).exp();
            2.0 * (q - q.powi(4) + q.powi(9) - q.powi(16))
        };
        assert_abs_diff_eq!(theta, series, epsilon = 1e-12);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert_eq!(kolmogorov_sf(-3.0), 1.0);
        assert_eq!(kolmogorov_sf(f64::INFINITY), 0.0);
        assert!(kolmogorov_sf(8.0) < 1e-50);
        // Monotone decreasing.
        let mut prev = 1.0;
        for k in 1..200 {
            let v = kolmogorov_sf(k as f64 * 0.02);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn ks_uniform_accepts_uniform_and_rejects_shifted() {
        let mut rng = RngStream::new(0x4B53, 0);
        let uniform: Vec<f64> = (0..2000).map(|_| rng.uniform()).collect();
        let pass = ks_uniform(&uniform).unwrap();
        assert!(pass.p_value > 0.01, "uniform sample rejected: {pass:?}");

        // A sample squeezed toward 0 (u^1.3) is visibly non-uniform at
        // this sample size.
        let skewed: Vec<f64> = uniform.iter().map(|u| u.powf(1.3)).collect();
        let fail = ks_uniform(&skewed).unwrap();
        assert!(fail.p_value < 0.01, "skewed sample accepted: {fail:?}");
        assert!(fail.statistic > pass.statistic);
    }

    #[test]
    fn ks_uniform_on_a_regular_grid_is_nearly_exact() {
        // Midpoints i/n − 1/(2n) have D = 1/(2n) exactly.
        let n = 500usize;
        let grid: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let res = ks_uniform(&grid).unwrap();
        assert_abs_diff_eq!(res.statistic, 0.5 / n as f64, epsilon = 1e-15);
        assert!(res.p_value > 0.999);
    }

    #[test]
    fn ks_uniform_validates_input() {
        assert!(ks_uniform(&[]).is_err());
        assert!(ks_uniform(&[0.5, 1.2]).is_err());
        assert!(ks_uniform(&[0.5, f64::NAN]).is_err());
        assert!(ks_uniform(&[0.5, -0.1]).is_err());
    }

    #[test]
    fn ks_two_sample_same_and_different_distributions() {
        let mut rng = RngStream::new(0x4B54, 0);
        let a: Vec<f64> = (0..1500).map(|_| rng.standard_normal()).collect();
        let b: Vec<f64> = (0..2500).map(|_| rng.standard_normal()).collect();
        let same = ks_two_sample(&a, &b).unwrap();
        assert!(same.p_value > 0.01, "same-distribution samples rejected: {same:?}");

        let shifted: Vec<f64> = b.iter().map(|v| v + 0.3).collect();
        let diff = ks_two_sample(&a, &shifted).unwrap();
        assert!(diff.p_value < 0.01, "shifted samples accepted: {diff:?}");
    }

    #[test]
    fn ks_two_sample_handles_ties_and_validates() {
        // Identical samples (all mass tied) give D = 0, p = 1.
        let a = [1.0, 2.0, 3.0];
        let res = ks_two_sample(&a, &a).unwrap();
        assert_eq!(res.statistic, 0.0);
        assert_abs_diff_eq!(res.p_value, 1.0, epsilon = 1e-12);
        assert!(ks_two_sample(&[], &a).is_err());
        assert!(ks_two_sample(&a, &[f64::INFINITY]).is_err());
    }
}
