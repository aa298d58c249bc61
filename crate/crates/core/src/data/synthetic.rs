//! Synthetic sample generators with known per-agent distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{max_abs_normalize, DistributedDataset, Provenance, Reservoir};
use crate::problems::Sample;
use crate::rng::derive_seed;

/// Offset separating reservoir streams from dataset streams.
const RESERVOIR_STREAM: u64 = 1 << 40;

/// A per-agent sampling distribution.
pub trait SampleSource {
    fn agents(&self) -> usize;
    fn name(&self) -> &'static str;
    fn draw(&self, agent: usize, rng: &mut ChaCha8Rng) -> Sample;

    /// `n` i.i.d. samples per agent; agent `i` uses its own derived stream.
    fn dataset(&self, n: usize, seed: u64) -> DistributedDataset {
        let shards = (0..self.agents())
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                (0..n).map(|_| self.draw(i, &mut rng)).collect()
            })
            .collect();
        DistributedDataset { shards, provenance: Provenance { source: self.name().into(), seed } }
    }

    /// Fresh per-agent pools, independent of [`SampleSource::dataset`] for the same seed.
    fn reservoir(&self, per_agent: usize, seed: u64) -> Reservoir {
        Reservoir::PerAgent(
            (0..self.agents())
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, RESERVOIR_STREAM + i as u64));
                    (0..per_agent).map(|_| self.draw(i, &mut rng)).collect()
                })
                .collect(),
        )
    }
}

fn gaussian_vec(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Agent `i` draws `[b; c] ~ N(means[i], sigma^2 I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSource {
    pub d_x: usize,
    pub d_y: usize,
    pub sigma: f64,
    pub means: Vec<Vec<f64>>,
}

impl QuadraticSource {
    /// Agent means with i.i.d. `N(0, mean_scale^2 / d)` coordinates, `d = d_x + d_y`.
    pub fn random(m: usize, d_x: usize, d_y: usize, sigma: f64, mean_scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
        let d = d_x + d_y;
        let s = mean_scale / (d as f64).sqrt();
        let means = (0..m).map(|_| gaussian_vec(d, s, &mut rng)).collect();
        Self { d_x, d_y, sigma, means }
    }

    /// Mean of the agent means: the population `(b, c)`.
    pub fn population_mean(&self) -> Vec<f64> {
        let m = self.means.len() as f64;
        let mut out = vec![0.0; self.d_x + self.d_y];
        for mu in &self.means {
            for (o, v) in out.iter_mut().zip(mu) {
                *o += v / m;
            }
        }
        out
    }
}

impl SampleSource for QuadraticSource {
    fn agents(&self) -> usize {
        self.means.len()
    }

    fn name(&self) -> &'static str {
        "synthetic_quadratic"
    }

    fn draw(&self, agent: usize, rng: &mut ChaCha8Rng) -> Sample {
        let mu = &self.means[agent];
        let noise = gaussian_vec(mu.len(), self.sigma, rng);
        Sample::unlabeled(mu.iter().zip(noise).map(|(a, b)| a + b).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticQuadratic {
    pub dataset: DistributedDataset,
    pub source: QuadraticSource,
}

#[allow(clippy::too_many_arguments)]
pub fn synthesize_quadratic_data(
    d_x: usize,
    d_y: usize,
    m: usize,
    n: usize,
    sigma: f64,
    mean_scale: f64,
    seed: u64,
) -> SyntheticQuadratic {
    let source = QuadraticSource::random(m, d_x, d_y, sigma, mean_scale, seed);
    SyntheticQuadratic { dataset: source.dataset(n, seed), source }
}

/// Agent `i` draws the scalar phase `xi ~ N(phases[i], sigma^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineSource {
    pub phases: Vec<f64>,
    pub sigma: f64,
}

impl SineSource {
    /// Phases spread evenly over `[-spread, spread]`.
    pub fn spread(m: usize, spread: f64, sigma: f64) -> Self {
        let phases = (0..m)
            .map(|i| if m == 1 { 0.0 } else { -spread + 2.0 * spread * i as f64 / (m - 1) as f64 })
            .collect();
        Self { phases, sigma }
    }
}

impl SampleSource for SineSource {
    fn agents(&self) -> usize {
        self.phases.len()
    }

    fn name(&self) -> &'static str {
        "synthetic_sine"
    }

    fn draw(&self, agent: usize, rng: &mut ChaCha8Rng) -> Sample {
        let z: f64 = rng.sample(StandardNormal);
        Sample::unlabeled(vec![self.phases[agent] + self.sigma * z])
    }
}

/// Two Gaussian classes `N(+-separation/2 * u, I)` along a random unit `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucPoolSpec {
    pub dim: usize,
    pub count: usize,
    pub positive_fraction: f64,
    pub separation: f64,
    pub seed: u64,
}

/// Labelled pool with max-abs normalized features.
pub fn synthesize_auc_pool(spec: &AucPoolSpec) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut u = gaussian_vec(spec.dim, 1.0, &mut rng);
    let un = crate::linalg::norm(&u);
    u.iter_mut().for_each(|e| *e /= un);
    let mut pool: Vec<Sample> = (0..spec.count)
        .map(|_| {
            let label = if rng.random_bool(spec.positive_fraction) { 1.0 } else { -1.0 };
            let shift = 0.5 * spec.separation * label;
            let f = u.iter().map(|ui| shift * ui + rng.sample::<f64, _>(StandardNormal)).collect();
            Sample::new(label, f)
        })
        .collect();
    max_abs_normalize(&mut pool);
    pool
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_the_mean() {
        let syn = synthesize_quadratic_data(2, 1, 3, 5, 0.0, 1.0, 4);
        for (i, shard) in syn.dataset.shards.iter().enumerate() {
            assert!(shard.iter().all(|s| s.features == syn.source.means[i]));
        }
    }

    #[test]
    fn shard_mean_concentrates() {
        let n = 10_000;
        let syn = synthesize_quadratic_data(1, 1, 2, n, 1.0, 1.0, 7);
        for (i, shard) in syn.dataset.shards.iter().enumerate() {
            for k in 0..2 {
                let mean = shard.iter().map(|s| s.features[k]).sum::<f64>() / n as f64;
                assert!((mean - syn.source.means[i][k]).abs() <= 3.0 / (n as f64).sqrt());
            }
        }
    }

    #[test]
    fn deterministic_and_reservoir_independent() {
        let a = synthesize_quadratic_data(2, 2, 2, 4, 0.5, 1.0, 1);
        let b = synthesize_quadratic_data(2, 2, 2, 4, 0.5, 1.0, 1);
        assert_eq!(a, b);
        let Reservoir::PerAgent(r) = a.source.reservoir(4, 1) else { unreachable!() };
        assert_ne!(r[0], a.dataset.shards[0]);
    }

    #[test]
    fn auc_pool_is_normalized_and_labelled() {
        let pool = synthesize_auc_pool(&AucPoolSpec { dim: 4, count: 500, positive_fraction: 0.3, separation: 2.0, seed: 3 });
        assert!(pool.iter().all(|s| s.label == 1.0 || s.label == -1.0));
        assert!(pool.iter().flat_map(|s| &s.features).all(|v| v.abs() <= 1.0));
        let pos = pool.iter().filter(|s| s.label > 0.0).count();
        assert!((100..200).contains(&pos));
    }
}
