//! Conditional action sampling: map a direction hint into action space,
//! blend it with the historical mean, and draw Gaussian candidates.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Action, ActionBounds, ActionSequence};
use crate::vlm::DirectionHint;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("blend weights must sum to 1, got {0}")]
    WeightSum(f64),
    #[error("blend_means expects sources (vlm, sub), got ({0:?}, {1:?})")]
    SourceMismatch(MeanSource, MeanSource),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSource {
    Vlm,
    Sub,
    Blended,
}

/// A 7-vector sampling mean tagged with where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingMean {
    pub mu: [f64; 7],
    pub source: MeanSource,
}

impl SamplingMean {
    pub fn zero(source: MeanSource) -> Self {
        Self { mu: [0.0; 7], source }
    }

    /// Finite components with the grasp component inside [0, 1].
    pub fn is_valid(&self) -> bool {
        self.mu.iter().all(|v| v.is_finite()) && (0.0..=1.0).contains(&self.mu[6])
    }
}

/// Scales a direction hint into action space: translations by `w_m`,
/// rotations by `w_r`, the grasp bit passed through.
pub fn hint_to_mean(hint: &DirectionHint, w_m: f64, w_r: f64) -> SamplingMean {
    SamplingMean {
        mu: [
            w_m * hint.dx.as_f64(),
            w_m * hint.dy.as_f64(),
            w_m * hint.dz.as_f64(),
            w_r * hint.rx.as_f64(),
            w_r * hint.ry.as_f64(),
            w_r * hint.rz.as_f64(),
            if hint.g { 1.0 } else { 0.0 },
        ],
        source: MeanSource::Vlm,
    }
}

/// Weighted elementwise blend of the VLM mean and the history mean.
pub fn blend_means(
    vlm: &SamplingMean,
    sub: &SamplingMean,
    w_vlm: f64,
    w_sub: f64,
) -> Result<SamplingMean, SamplerError> {
    if (w_vlm + w_sub - 1.0).abs() > 1e-9 {
        return Err(SamplerError::WeightSum(w_vlm + w_sub));
    }
    if vlm.source != MeanSource::Vlm || sub.source != MeanSource::Sub {
        return Err(SamplerError::SourceMismatch(vlm.source, sub.source));
    }
    let mut mu = [0.0; 7];
    for i in 0..7 {
        mu[i] = w_vlm * vlm.mu[i] + w_sub * sub.mu[i];
    }
    Ok(SamplingMean { mu, source: MeanSource::Blended })
}

/// One pre-clamp draw: each dimension from `Normal(mu[i], sigma[i])`.
/// Exposed so sampling statistics can be checked on the raw draws.
pub fn draw_raw(mu: &[f64; 7], sigma: &[f64; 7], rng: &mut ChaCha8Rng) -> [f64; 7] {
    let mut out = [0.0; 7];
    for i in 0..7 {
        // sigma > 0 is a config invariant checked at load
        let dist = Normal::new(mu[i], sigma[i]).expect("sigma must be positive and finite");
        out[i] = dist.sample(rng);
    }
    out
}

/// Turns a raw draw into a well-formed action: translations and rotations
/// clamped to the bounds, grasp thresholded at 0.5 to exactly 0 or 1.
pub fn finalize_action(raw: [f64; 7], bounds: &ActionBounds) -> Action {
    Action {
        dx: raw[0].clamp(-bounds.d_max, bounds.d_max),
        dy: raw[1].clamp(-bounds.d_max, bounds.d_max),
        dz: raw[2].clamp(-bounds.d_max, bounds.d_max),
        rx: raw[3].clamp(-bounds.r_max, bounds.r_max),
        ry: raw[4].clamp(-bounds.r_max, bounds.r_max),
        rz: raw[5].clamp(-bounds.r_max, bounds.r_max),
        g: if raw[6] >= 0.5 { 1.0 } else { 0.0 },
    }
}

/// Draws `n` candidate sequences of `t` actions around one mean. The same
/// mean applies to every step of a sequence. Draw order is candidate-major
/// then step then dimension, so results are deterministic per generator
/// state.
pub fn sample_candidates(
    mean: &SamplingMean,
    n: usize,
    t: usize,
    sigma: &[f64; 7],
    bounds: &ActionBounds,
    rng: &mut ChaCha8Rng,
) -> Vec<ActionSequence> {
    (0..n)
        .map(|id| {
            let actions = (0..t)
                .map(|_| finalize_action(draw_raw(&mean.mu, sigma, rng), bounds))
                .collect();
            ActionSequence::new(id, actions)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHub;
    use crate::vlm::Sign;

    fn hint(dx: Sign, dy: Sign, rz: Sign, g: bool) -> DirectionHint {
        DirectionHint { dx, dy, dz: Sign::Zero, rx: Sign::Zero, ry: Sign::Zero, rz, g }
    }

    #[test]
    fn hint_scaling() {
        let m = hint_to_mean(&hint(Sign::Pos, Sign::Zero, Sign::Zero, true), 0.02, 0.1);
        assert_eq!(m.mu, [0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.source, MeanSource::Vlm);

        let zero = hint_to_mean(&DirectionHint::ZERO, 0.02, 0.1);
        assert_eq!(zero.mu, [0.0; 7]);

        let m = hint_to_mean(&hint(Sign::Neg, Sign::Neg, Sign::Pos, false), 0.02, 0.1);
        assert_eq!(m.mu, [-0.02, -0.02, 0.0, 0.0, 0.0, 0.1, 0.0]);
    }

    #[test]
    fn blend_degenerate_and_midpoint() {
        let vlm = SamplingMean { mu: [0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0], source: MeanSource::Vlm };
        let sub = SamplingMean { mu: [0.0, 0.02, 0.0, 0.0, 0.0, 0.0, 0.0], source: MeanSource::Sub };

        let all_vlm = blend_means(&vlm, &sub, 1.0, 0.0).unwrap();
        assert_eq!(all_vlm.mu, vlm.mu);
        assert_eq!(all_vlm.source, MeanSource::Blended);

        let mid = blend_means(&vlm, &sub, 0.5, 0.5).unwrap();
        assert_eq!(&mid.mu[..2], &[0.01, 0.01]);

        // zero history at t = 0 reduces to the scaled vlm mean
        let t0 = blend_means(&vlm, &SamplingMean::zero(MeanSource::Sub), 0.7, 0.3).unwrap();
        for i in 0..7 {
            assert!((t0.mu[i] - 0.7 * vlm.mu[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn blend_rejects_bad_weights_and_sources() {
        let vlm = SamplingMean::zero(MeanSource::Vlm);
        let sub = SamplingMean::zero(MeanSource::Sub);
        assert!(matches!(blend_means(&vlm, &sub, 0.7, 0.4), Err(SamplerError::WeightSum(_))));
        assert!(matches!(
            blend_means(&sub, &vlm, 0.5, 0.5),
            Err(SamplerError::SourceMismatch(..))
        ));
    }

    #[test]
    fn near_zero_sigma_degenerates_to_mean() {
        let mean = SamplingMean {
            mu: [0.02, -0.01, 0.0, 0.0, 0.0, 0.0, 0.8],
            source: MeanSource::Blended,
        };
        let sigma = [1e-12; 7];
        let bounds = ActionBounds::default();
        let mut rng = RngHub::new(1).sampler();
        let cands = sample_candidates(&mean, 5, 3, &sigma, &bounds, &mut rng);
        for c in &cands {
            for a in &c.actions {
                assert!((a.dx - 0.02).abs() < 1e-9);
                assert!((a.dy + 0.01).abs() < 1e-9);
                assert_eq!(a.g, 1.0); // 0.8 >= 0.5
            }
        }
    }

    #[test]
    fn same_seed_identical_candidates() {
        let mean = SamplingMean::zero(MeanSource::Blended);
        let sigma = [0.01, 0.01, 0.01, 0.05, 0.05, 0.05, 0.25];
        let bounds = ActionBounds::default();
        let a = sample_candidates(&mean, 8, 4, &sigma, &bounds, &mut RngHub::new(9).sampler());
        let b = sample_candidates(&mean, 8, 4, &sigma, &bounds, &mut RngHub::new(9).sampler());
        assert_eq!(a, b);
        let c = sample_candidates(&mean, 8, 4, &sigma, &bounds, &mut RngHub::new(10).sampler());
        assert_ne!(a, c);
    }

    #[test]
    fn emitted_actions_satisfy_invariants() {
        let mean = SamplingMean {
            mu: [0.04, -0.04, 0.0, 0.15, 0.0, -0.15, 0.5],
            source: MeanSource::Blended,
        };
        let sigma = [0.05; 7];
        let bounds = ActionBounds::default();
        let mut rng = RngHub::new(3).sampler();
        for c in sample_candidates(&mean, 50, 6, &sigma, &bounds, &mut rng) {
            assert_eq!(c.len(), 6);
            for a in &c.actions {
                assert!(a.satisfies(&bounds), "action violates bounds: {a:?}");
            }
        }
    }

    #[test]
    fn ids_are_sequential() {
        let mean = SamplingMean::zero(MeanSource::Blended);
        let sigma = [0.01; 7];
        let mut rng = RngHub::new(4).sampler();
        let cands = sample_candidates(&mean, 7, 2, &sigma, &ActionBounds::default(), &mut rng);
        for (i, c) in cands.iter().enumerate() {
            assert_eq!(c.id, i);
        }
    }
}
