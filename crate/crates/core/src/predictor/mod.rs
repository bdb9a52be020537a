//! Action-conditioned future-frame prediction behind one contract.
//!
//! [`Predictor::predict`] turns a candidate action sequence into one frame
//! per action, each frame depending only on the context and the actions
//! executed so far. Three implementations ship:
//!
//! - [`OraclePredictor`] — clones the simulator snapshot and steps it;
//!   plays the role of a perfect learned model.
//! - [`SpriteWarpPredictor`] — purely visual: translates the end-effector
//!   patch kinematically over a static background plate.
//! - [`NoisyOraclePredictor`] — oracle output plus Gaussian pixel noise,
//!   for studying robustness to prediction error.
//!
//! The context carries the last two frames and executed actions. A future
//! learned implementation is expected to broadcast each 7-dim action over
//! the image plane and concatenate it channelwise with the two history
//! frames; the contract leaves that slot open without fixing the network.

mod noisy;
mod oracle;
mod warp;

pub use noisy::NoisyOraclePredictor;
pub use oracle::OraclePredictor;
pub use warp::SpriteWarpPredictor;

use thiserror::Error;

use crate::sim::{SceneState, SimParams};
use crate::types::{ActionSequence, Frame, Action};
use crate::vlm::SceneUnderstanding;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("oracle predictor needs a simulator snapshot in the context")]
    MissingSnapshot,
    #[error("sprite-warp predictor needs initial boxes in the context")]
    MissingBoxes,
    #[error("candidate {id} is empty")]
    EmptySequence { id: usize },
}

/// Ground-truth world handle for oracle-style predictors.
#[derive(Debug, Clone)]
pub struct SimSnapshot {
    pub state: SceneState,
    pub params: SimParams,
}

/// Everything a predictor may condition on at one control step.
#[derive(Debug, Clone)]
pub struct PredictionContext {
    /// Observation at t-1.
    pub prev: Frame,
    /// Observation at t; `prev.timestamp + 1 == curr.timestamp`.
    pub curr: Frame,
    /// Action executed between t-2 and t-1.
    pub a_prev: Action,
    /// Action executed between t-1 and t.
    pub a_curr: Action,
    /// Opaque simulator snapshot; oracle predictors only.
    pub aux: Option<SimSnapshot>,
    /// Boxes localized in `curr`; sprite-warp only.
    pub init_boxes: Option<SceneUnderstanding>,
}

/// One candidate's predicted future: frame k shows the world after the
/// first k+1 actions of the candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedVideo {
    pub candidate_id: usize,
    pub frames: Vec<Frame>,
}

pub trait Predictor {
    fn predict(
        &self,
        ctx: &PredictionContext,
        seq: &ActionSequence,
    ) -> Result<PredictedVideo, PredictError>;

    /// Batched prediction; exactly equivalent to mapping [`Self::predict`]
    /// over the candidates (batching is a performance feature only).
    fn predict_batch(
        &self,
        ctx: &PredictionContext,
        candidates: &[ActionSequence],
    ) -> Result<Vec<PredictedVideo>, PredictError> {
        candidates.iter().map(|c| self.predict(ctx, c)).collect()
    }

    /// Whether the context must carry a simulator snapshot.
    fn needs_snapshot(&self) -> bool {
        false
    }

    /// Whether the context must carry initial boxes.
    fn needs_boxes(&self) -> bool {
        false
    }
}
