//! Deterministic RNG substreams for reproducible Monte Carlo.
//!
//! Every stochastic routine in the crate draws from an [`RngStream`]
//! identified by `(master_seed, stream_index)`. The backing generator is
//! ChaCha12 — a counter-mode block cipher — with the stream index mapped to
//! the cipher's 64-bit stream field, so distinct indices give independent
//! streams and a replicate's randomness never depends on scheduling or
//! worker count: replicate `i` always reads stream `i` from the start.
//!
//! Normal variates use inversion (the crate's own quantile function) rather
//! than rejection, so a draw consumes exactly one uniform and sequences
//! stay aligned across platforms.

use super::normal::quantile_raw;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// A reproducible random stream addressed by `(master_seed, stream_index)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    /// Opens stream `stream_index` of the generator family seeded by
    /// `master_seed`, positioned at its start.
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        RngStream {
            master_seed,
            stream_index,
            rng,
        }
    }

    /// The master seed this stream belongs to.
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// The index of this stream within its family.
    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Next raw 64-bit word.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw on the open interval (0, 1): 53 significant bits,
    /// offset by half an ulp so 0 and 1 are unreachable (safe to pass to
    /// quantile functions).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw by inversion.
    pub fn standard_normal(&mut self) -> f64 {
        quantile_raw(self.uniform())
    }

    /// Normal draw with the given mean and standard deviation (sd ≥ 0).
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Bernoulli draw with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_index_reproduce_exactly() {
        let mut a = RngStream::new(0xDEAD_BEEF, 42);
        let mut b = RngStream::new(0xDEAD_BEEF, 42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..1000 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn different_indices_differ() {
        let mut a = RngStream::new(1, 0);
        let mut b = RngStream::new(1, 1);
        let same = (0..100).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniforms_live_strictly_inside_unit_interval() {
        let mut s = RngStream::new(99, 0);
        for _ in 0..100_000 {
            let u = s.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn uniform_moments_are_sane() {
        let mut s = RngStream::new(2024, 5);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let u = s.uniform();
            sum += u;
            sum_sq += u * u;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        // 4 MC standard errors: se(mean) = sqrt(1/12)/sqrt(n) ≈ 9.1e-4.
        assert!((mean - 0.5).abs() < 4.0 * 9.2e-4, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 4e-3, "var {var}");
    }

    #[test]
    fn cross_stream_correlation_is_negligible() {
        // |r| < 0.01 over 1e5 paired uniforms from distinct stream indices.
        let mut a = RngStream::new(123, 10);
        let mut b = RngStream::new(123, 11);
        let n = 100_000usize;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = a.uniform();
            let y = b.uniform();
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - (sx / nf) * (sy / nf);
        let vx = sxx / nf - (sx / nf).powi(2);
        let vy = syy / nf - (sy / nf).powi(2);
        let r = cov / (vx * vy).sqrt();
        assert!(r.abs() < 0.01, "cross-stream correlation r = {r}");
    }

    #[test]
    fn standard_normal_moments() {
        let mut s = RngStream::new(31337, 0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let z = s.standard_normal();
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        // se(mean) = 1/sqrt(n) ≈ 2.24e-3; se(var) ≈ sqrt(2/n) ≈ 3.2e-3.
        assert!(mean.abs() < 4.0 * 2.3e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 4.0 * 3.2e-3, "var {var}");
    }

    #[test]
    fn bernoulli_frequency_matches_p() {
        let mut s = RngStream::new(8, 2);
        let n = 100_000;
        let hits = (0..n).filter(|_| s.bernoulli(0.3)).count();
        let freq = hits as f64 / n as f64;
        // se = sqrt(0.3·0.7/n) ≈ 1.45e-3.
        assert!((freq - 0.3).abs() < 4.0 * 1.5e-3, "freq {freq}");
    }

    #[test]
    fn clone_continues_identically() {
        let mut s = RngStream::new(5, 1);
        for _ in 0..10 {
            s.next_u64();
        }
        let mut t = s.clone();
        for _ in 0..100 {
            assert_eq!(s.next_u64(), t.next_u64());
        }
    }
}
