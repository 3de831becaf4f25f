//! Seeded, splittable random streams.
//!
//! A stream is ChaCha8 keyed by `seed` (expanded through SplitMix64 by
//! `seed_from_u64`) with the 64-bit ChaCha stream id set to `substream_id`.
//! Distinct stream ids address disjoint keystreams under the same key, so
//! replication `i` of a simulation can use substream `i` regardless of which
//! thread runs it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::num_core::LowerTriangular;

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    substream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, substream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(substream_id);
        Self {
            seed,
            substream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream_id(&self) -> u64 {
        self.substream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = StandardNormal.sample(&mut self.rng);
        }
    }

    pub fn uniform(&mut self) -> f64 {
        // 53 random bits mapped to [0, 1).
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer; used to derive independent seeds for simulation cells.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// mean + L·z with z drawn from `stream`.
pub fn sample_mv_normal(
    stream: &mut RandomStream,
    mean: &[f64],
    chol: &LowerTriangular<f64>,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; mean.len()];
    let mut z = vec![0.0; mean.len()];
    sample_mv_normal_into(stream, mean, chol, &mut z, &mut out)?;
    Ok(out)
}

/// Allocation-free variant of [`sample_mv_normal`]; `scratch` and `out` must have the mean's length.
pub fn sample_mv_normal_into(
    stream: &mut RandomStream,
    mean: &[f64],
    chol: &LowerTriangular<f64>,
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let n = mean.len();
    if chol.dim() != n || scratch.len() != n || out.len() != n {
        return Err(Error::domain(format!(
            "dimension mismatch: mean {n}, factor {}, buffers {}/{}",
            chol.dim(),
            scratch.len(),
            out.len()
        )));
    }
    stream.fill_standard_normal(scratch);
    chol.apply_into(scratch, out);
    for (o, m) in out.iter_mut().zip(mean) {
        *o += m;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num_core::{cholesky_lower, CorrelationMatrix};

    #[test]
    fn identical_streams_match() {
        let mut a = RandomStream::new(42, 7);
        let mut b = RandomStream::new(42, 7);
        for _ in 0..1000 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn substreams_differ() {
        let mut a = RandomStream::new(42, 0);
        let mut b = RandomStream::new(42, 1);
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn substreams_uncorrelated() {
        let n = 100_000;
        let mut a = RandomStream::new(3, 10);
        let mut b = RandomStream::new(3, 11);
        let r: f64 = (0..n)
            .map(|_| a.standard_normal() * b.standard_normal())
            .sum::<f64>()
            / n as f64;
        assert!(r.abs() < 0.02, "cross moment {r}");
    }

    #[test]
    fn degenerate_covariance_returns_mean() {
        let mut s = RandomStream::new(1, 0);
        let x = sample_mv_normal(&mut s, &[0.0, 0.0], &LowerTriangular::zeros(2)).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_domain_error() {
        let mut s = RandomStream::new(1, 0);
        let r = sample_mv_normal(&mut s, &[0.0, 0.0, 0.0], &LowerTriangular::identity(2));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn empirical_mean_and_correlation() {
        let n = 100_000;
        let mut s = RandomStream::new(2024, 0);
        let eye = LowerTriangular::identity(2);
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let x = sample_mv_normal(&mut s, &[1.0, 2.0], &eye).unwrap();
            sum[0] += x[0];
            sum[1] += x[1];
        }
        assert!((sum[0] / n as f64 - 1.0).abs() < 0.02);
        assert!((sum[1] / n as f64 - 2.0).abs() < 0.02);

        let l = cholesky_lower(&CorrelationMatrix::equicorrelated(2, 0.99).unwrap()).unwrap();
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = sample_mv_normal(&mut s, &[0.0, 0.0], &l).unwrap();
            sxy += x[0] * x[1];
            sxx += x[0] * x[0];
            syy += x[1] * x[1];
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!((rho - 0.99).abs() < 0.005, "rho {rho}");
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut s = RandomStream::new(9, 9);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
