//! Oracle predictor with Gaussian pixel noise, emulating the error of a
//! learned model at a controlled magnitude.

use rand_distr::{Distribution, Normal};

use super::{OraclePredictor, PredictError, PredictedVideo, PredictionContext, Predictor};
use crate::rng::derived_rng;
use crate::types::ActionSequence;

/// Noise std is expressed in [0, 1] intensity units (e.g. 5/255). Each
/// (step, candidate) pair derives its own generator from the base seed, so
/// batch and serial evaluation produce bitwise-identical videos.
#[derive(Debug, Clone, Copy)]
pub struct NoisyOraclePredictor {
    inner: OraclePredictor,
    std: f64,
    base_seed: u64,
}

impl NoisyOraclePredictor {
    pub fn new(std: f64, base_seed: u64) -> Self {
        Self { inner: OraclePredictor, std, base_seed }
    }
}

impl Predictor for NoisyOraclePredictor {
    fn predict(
        &self,
        ctx: &PredictionContext,
        seq: &ActionSequence,
    ) -> Result<PredictedVideo, PredictError> {
        let mut video = self.inner.predict(ctx, seq)?;
        if self.std <= 0.0 {
            return Ok(video);
        }
        let mut rng = derived_rng(self.base_seed, ctx.curr.timestamp, seq.id as u64);
        let dist = Normal::new(0.0, self.std * 255.0).expect("finite positive std");
        for frame in &mut video.frames {
            for px in frame.pixels.iter_mut() {
                let noisy = *px as f64 + dist.sample(&mut rng);
                *px = noisy.round().clamp(0.0, 255.0) as u8;
            }
        }
        Ok(video)
    }

    fn needs_snapshot(&self) -> bool {
        true
    }
}
