//! Sampling-based visual model-predictive control with a VLM-guided
//! decision loop, plus the deterministic 2D tabletop world it is tested in.
//!
//! The engine runs a receding-horizon loop: a vision-language oracle turns
//! the current observation into a coarse movement direction, the sampler
//! draws candidate action sequences around that direction, a predictor
//! rolls each candidate forward into future frames, and a hierarchical
//! cost (pixel distance to the goal image, plus box-level attraction /
//! repulsion over tracked objects) picks the sequence whose first action
//! gets executed.
//!
//! Modules map onto the stages of that loop:
//!
//! - [`config`] / [`types`] / [`log`] / [`rng`] — shared value types,
//!   run configuration, episode persistence, seeded randomness.
//! - [`sim`] — the tabletop world: dynamics, rendering, tasks, rewards.
//! - [`vlm`] — the three vision-language queries (direction, boxes,
//!   switch weight) behind one trait, with a scripted ground-truth
//!   oracle and a remote JSON-over-HTTP client.
//! - [`sampler`] — direction hint to sampling mean, history blending,
//!   Gaussian candidate generation.
//! - [`predictor`] — action-conditioned future-frame prediction (exact
//!   oracle, sprite-warp kinematic model, noisy oracle).
//! - [`tracker`] — template-matching box propagation across predicted
//!   videos.
//! - [`cost`] — pixel cost, box attraction/repulsion cost, switcher
//!   combination, winner selection.
//! - [`controller`] — the receding-horizon loop tying it all together.

pub mod config;
pub mod controller;
pub mod cost;
pub mod log;
pub mod predictor;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod tracker;
pub mod types;
pub mod vlm;

pub use config::{AblationMode, PredictorKind, RunConfig, VlmKind};
pub use controller::{run_episode, EpisodeRunner};
pub use log::{EndSignal, EpisodeLog, StepRecord};
pub use types::{Action, ActionSequence, Box2D, BoxLabel, Frame, Goal};
