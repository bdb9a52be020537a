//! The vision-language interface: three queries behind one trait.
//!
//! Every implementation answers the same three questions about the current
//! observation and the goal:
//!
//! 1. [`Vlm::query_direction`] — which way should the end-effector move
//!    (a per-axis sign plus a grasp bit),
//! 2. [`Vlm::query_boxes`] — where are the end-effector, the next
//!    sub-goal, and the interference objects,
//! 3. [`Vlm::query_switch`] — which sub-costs apply this step.
//!
//! Failures never escape: a degraded implementation falls back to a safe
//! value and sets the `degraded` flag on its answer, keeping the control
//! loop alive.

pub mod oracle;
pub mod remote;

pub use oracle::OracleVlm;
pub use remote::{RemoteVlm, Transport, TransportError};

use serde::{Deserialize, Serialize};

use crate::sim::{SceneState, TaskSpec};
use crate::types::{Box2D, Frame, Goal};

/// Per-axis movement direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Sign {
    pub fn as_f64(&self) -> f64 {
        match self {
            Sign::Neg => -1.0,
            Sign::Zero => 0.0,
            Sign::Pos => 1.0,
        }
    }

    pub fn from_i64(v: i64) -> Option<Sign> {
        match v {
            -1 => Some(Sign::Neg),
            0 => Some(Sign::Zero),
            1 => Some(Sign::Pos),
            _ => None,
        }
    }

    pub fn of(v: f64, deadband: f64) -> Sign {
        if v > deadband {
            Sign::Pos
        } else if v < -deadband {
            Sign::Neg
        } else {
            Sign::Zero
        }
    }
}

/// Coarse movement command: a sign per translation/rotation axis and a
/// grasp bit. The type admits no out-of-range values by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionHint {
    pub dx: Sign,
    pub dy: Sign,
    pub dz: Sign,
    pub rx: Sign,
    pub ry: Sign,
    pub rz: Sign,
    pub g: bool,
}

impl DirectionHint {
    pub const ZERO: DirectionHint = DirectionHint {
        dx: Sign::Zero,
        dy: Sign::Zero,
        dz: Sign::Zero,
        rx: Sign::Zero,
        ry: Sign::Zero,
        rz: Sign::Zero,
        g: false,
    };
}

/// Localization of the three roles in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneUnderstanding {
    pub e: Box2D,
    pub s: Box2D,
    pub interference: Vec<Box2D>,
}

impl SceneUnderstanding {
    /// All boxes in bounds and at least a pixel in extent.
    pub fn valid_for(&self, frame_w: u32, frame_h: u32) -> bool {
        self.e.in_bounds(frame_w, frame_h)
            && self.s.in_bounds(frame_w, frame_h)
            && self.interference.iter().all(|b| b.in_bounds(frame_w, frame_h))
    }
}

/// The switcher output: which sub-costs are active this step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchWeight {
    /// w = 0: box-level cost only.
    VlmOnly,
    /// w = 0.5: both sub-costs.
    Both,
    /// w = 1: pixel cost only.
    PixelOnly,
}

impl SwitchWeight {
    pub fn value(&self) -> f64 {
        match self {
            SwitchWeight::VlmOnly => 0.0,
            SwitchWeight::Both => 0.5,
            SwitchWeight::PixelOnly => 1.0,
        }
    }

    /// Accepts exactly 0, 0.5 or 1.
    pub fn from_value(v: f64) -> Option<SwitchWeight> {
        if v == 0.0 {
            Some(SwitchWeight::VlmOnly)
        } else if v == 0.5 {
            Some(SwitchWeight::Both)
        } else if v == 1.0 {
            Some(SwitchWeight::PixelOnly)
        } else {
            None
        }
    }
}

/// A query result plus whether a fallback was taken to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct VlmAnswer<T> {
    pub value: T,
    pub degraded: bool,
}

impl<T> VlmAnswer<T> {
    pub fn ok(value: T) -> Self {
        Self { value, degraded: false }
    }

    pub fn degraded(value: T) -> Self {
        Self { value, degraded: true }
    }
}

/// The three prompted queries. Implementations must tolerate being called
/// repeatedly within one control step and return only values satisfying
/// the domain-type invariants.
pub trait Vlm {
    fn query_direction(&mut self, obs: &Frame, goal: &Goal) -> VlmAnswer<DirectionHint>;
    fn query_boxes(&mut self, obs: &Frame, goal: &Goal) -> VlmAnswer<SceneUnderstanding>;
    fn query_switch(&mut self, obs: &Frame, goal: &Goal) -> VlmAnswer<SwitchWeight>;

    /// Hands ground truth to implementations that script their answers
    /// from simulator state. Remote implementations ignore it.
    fn sync_ground_truth(&mut self, _state: &SceneState, _task: &TaskSpec) {}
}
