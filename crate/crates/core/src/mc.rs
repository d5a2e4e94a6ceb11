//! Seeded Monte Carlo helpers with one ChaCha stream per work chunk.

use crate::prior::{PriorGrid, PriorKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// Sample budget and root seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 20_000, seed: 1 }
    }
}

/// Mean of per-sample values with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    /// 0 when the value was computed exactly.
    pub samples: usize,
}

impl Estimate {
    pub fn exact(v: f64) -> Estimate {
        Estimate { mean: v, std_err: 0.0, samples: 0 }
    }

    pub fn is_exact(&self) -> bool {
        self.samples == 0
    }

    pub fn rel_err(&self) -> f64 {
        self.std_err / self.mean.abs()
    }
}

const CHUNK: usize = 256;

/// Independent stream `stream` of the root seed.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Averages `f(rng)` over `cfg.samples` draws. Chunks run in parallel, each
/// on its own stream, and are reduced in chunk order.
pub fn average<F>(cfg: &McConfig, f: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let chunks = cfg.samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(cfg.seed, c as u64);
            let n = CHUNK.min(cfg.samples - c * CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..n {
                let v = f(&mut rng);
                s += v;
                s2 += v * v;
            }
            (s, s2, n)
        })
        .collect();
    let (mut s, mut s2, mut n) = (0.0, 0.0, 0usize);
    for (a, b, c) in sums {
        s += a;
        s2 += b;
        n += c;
    }
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0).max(1.0)).max(0.0);
    Estimate { mean, std_err: (var / nf).sqrt(), samples: n }
}

/// Draws φ from the prior's continuous law restricted to its support.
pub fn sample_prior(prior: &PriorGrid, rng: &mut ChaCha8Rng) -> f64 {
    let (lo, hi) = prior.support;
    match prior.kind {
        PriorKind::Uniform => rng.random_range(lo..hi),
        PriorKind::Gaussian => {
            let n = Normal::new(0.0, prior.delta_phi).expect("positive width");
            loop {
                let x = n.sample(rng);
                if x >= lo && x < hi {
                    return x;
                }
            }
        }
    }
}

/// Variance of the grid posterior `mass · exp(loglik)`.
pub fn posterior_variance(prior: &PriorGrid, loglik: &[f64]) -> f64 {
    let mx = loglik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for ((&l, &w), &x) in loglik.iter().zip(prior.mass()).zip(&prior.nodes) {
        let p = w * (l - mx).exp();
        z += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    let mean = m1 / z;
    (m2 / z - mean * mean).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unbiased() {
        let cfg = McConfig { samples: 10_000, seed: 7 };
        let a = average(&cfg, |r| r.random::<f64>());
        let b = average(&cfg, |r| r.random::<f64>());
        assert_eq!(a, b);
        assert!((a.mean - 0.5).abs() < 5.0 * a.std_err);
        assert!((a.std_err - (1.0f64 / 12.0 / 1e4).sqrt()).abs() < 2e-4);
    }
}
