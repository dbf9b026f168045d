use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::RobotModel;

/// Joint values in actuated-joint order (radians or meters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<f64>);

impl Configuration {
    pub fn new(values: Vec<f64>) -> Self {
        Configuration(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Portable, seeded configuration sampler.
///
/// The generator is xoshiro256++ whose 256-bit state is expanded from the 64-bit seed
/// with SplitMix64. Each joint value is `lower + u * (upper - lower)` where
/// `u = (next_u64 >> 11) * 2^-53` lies in `[0, 1)`. Continuous joints use `[-pi, pi]`.
/// Joints are drawn in configuration order, one `next_u64` each, so the stream is
/// identical on every platform.
#[derive(Clone, Debug)]
pub struct ConfigSampler {
    rng: Xoshiro256PlusPlus,
}

impl ConfigSampler {
    pub fn new(seed: u64) -> Self {
        ConfigSampler {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn sample(&mut self, model: &RobotModel) -> Configuration {
        let values = model
            .active_joints
            .iter()
            .map(|&j| {
                let (lower, upper) = model.joints[j].sampling_range();
                let u = self.unit();
                if lower == upper {
                    lower
                } else {
                    lower + u * (upper - lower)
                }
            })
            .collect();
        Configuration(values)
    }
}

/// Number of configurations drawn from one seeded stream before moving to the next.
///
/// Configuration `k` of a run seeded with `seed` is the `(k % BATCH_SIZE)`-th draw of
/// the stream seeded with `batch_seed(seed, k / BATCH_SIZE)`. Batches are the unit of
/// parallel work, so results do not depend on the worker count.
pub const BATCH_SIZE: usize = 512;

/// Seed of the stream for batch `batch`: `splitmix64(seed) + batch` (wrapping), so runs
/// with neighbouring seeds do not share streams.
pub fn batch_seed(seed: u64, batch: usize) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)).wrapping_add(batch as u64)
}

impl RobotModel {
    pub fn sample_configuration(&self, sampler: &mut ConfigSampler) -> Configuration {
        sampler.sample(self)
    }

    /// Configurations `[start, start + count)` of the deterministic sequence for `seed`.
    pub fn configuration_sequence(&self, seed: u64, start: usize, count: usize) -> Vec<Configuration> {
        let mut out = Vec::with_capacity(count);
        let mut index = start;
        let end = start + count;
        while index < end {
            let batch = index / BATCH_SIZE;
            let mut sampler = ConfigSampler::new(batch_seed(seed, batch));
            for _ in 0..index % BATCH_SIZE {
                sampler.sample(self);
            }
            let batch_end = ((batch + 1) * BATCH_SIZE).min(end);
            while index < batch_end {
                out.push(sampler.sample(self));
                index += 1;
            }
        }
        out
    }
}
