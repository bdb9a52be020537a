//! Seeded randomness. Every stochastic component draws from a stream
//! derived from the single run seed, so a run is reproducible end to end
//! and modules cannot perturb each other's draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream ids, one per consumer.
const STREAM_SAMPLER: u64 = 1;
const STREAM_SIM: u64 = 2;
const STREAM_PREDICTOR_NOISE: u64 = 3;

/// Splits one seed into independent per-module generators.
#[derive(Debug, Clone, Copy)]
pub struct RngHub {
    seed: u64,
}

impl RngHub {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream feeding candidate sampling.
    pub fn sampler(&self) -> ChaCha8Rng {
        stream(self.seed, STREAM_SAMPLER)
    }

    /// Stream feeding scene initialization.
    pub fn sim(&self) -> ChaCha8Rng {
        stream(self.seed, STREAM_SIM)
    }

    /// Base seed for the noisy predictor; it derives one generator per
    /// (step, candidate) via [`derive_seed`] so batch and serial
    /// evaluation see identical noise.
    pub fn predictor_noise_seed(&self) -> u64 {
        mix(mix(self.seed, STREAM_PREDICTOR_NOISE), 0)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// SplitMix64 finalizer; decorrelates nearby inputs.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic generator for a (base, step, candidate) triple.
pub fn derive_seed(base: u64, step: u64, candidate: u64) -> u64 {
    mix(mix(base, step.wrapping_add(1)), candidate.wrapping_add(1))
}

/// Convenience constructor for derived generators.
pub fn derived_rng(base: u64, step: u64, candidate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, step, candidate))
}
