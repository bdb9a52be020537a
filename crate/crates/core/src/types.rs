//! Core value types shared by every stage of the control loop.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Per-axis clamp limits applied to sampled actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    /// Max absolute translation per step, meters.
    pub d_max: f64,
    /// Max absolute rotation per step, radians.
    pub r_max: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self { d_max: 0.05, r_max: 0.2 }
    }
}

/// One control step: end-effector translation (meters), gripper rotation
/// (radians), and a binary grasp command.
///
/// `g` is stored as a float so sequences can be averaged componentwise,
/// but a well-formed action holds exactly `0.0` (open) or `1.0` (closed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
    pub g: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        dx: 0.0,
        dy: 0.0,
        dz: 0.0,
        rx: 0.0,
        ry: 0.0,
        rz: 0.0,
        g: 0.0,
    };

    pub fn from_array(v: [f64; 7]) -> Self {
        Self { dx: v[0], dy: v[1], dz: v[2], rx: v[3], ry: v[4], rz: v[5], g: v[6] }
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.dx, self.dy, self.dz, self.rx, self.ry, self.rz, self.g]
    }

    /// Whether the grasp command closes the gripper.
    pub fn grasp_closed(&self) -> bool {
        self.g >= 0.5
    }

    /// Checks the domain invariants: translations within `d_max`, rotations
    /// within `r_max`, grasp exactly 0 or 1.
    pub fn satisfies(&self, bounds: &ActionBounds) -> bool {
        let t_ok = [self.dx, self.dy, self.dz].iter().all(|d| d.abs() <= bounds.d_max);
        let r_ok = [self.rx, self.ry, self.rz].iter().all(|r| r.abs() <= bounds.r_max);
        t_ok && r_ok && (self.g == 0.0 || self.g == 1.0)
    }
}

/// A candidate plan: exactly `T` actions, tagged with its index in the
/// candidate set (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub id: usize,
    pub actions: Vec<Action>,
}

impl ActionSequence {
    pub fn new(id: usize, actions: Vec<Action>) -> Self {
        Self { id, actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("pixel buffer holds {got} bytes, expected {expected} ({w}x{h}x3)")]
    BadLength { got: usize, expected: usize, w: u32, h: u32 },
    #[error("frame dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimMismatch { a_w: u32, a_h: u32, b_w: u32, b_h: u32 },
}

/// An RGB observation: `height * width * 3` bytes, row-major, plus the
/// control step it was captured at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub timestamp: u64,
    pub pixels: Vec<u8>,
}

impl Frame {
    /// A frame filled with a single color.
    pub fn filled(width: u32, height: u32, timestamp: u64, color: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            pixels.extend_from_slice(&color);
        }
        Self { width, height, timestamp, pixels }
    }

    pub fn from_pixels(
        width: u32,
        height: u32,
        timestamp: u64,
        pixels: Vec<u8>,
    ) -> Result<Self, FrameError> {
        let expected = (width * height * 3) as usize;
        if pixels.len() != expected {
            return Err(FrameError::BadLength { got: pixels.len(), expected, w: width, h: height });
        }
        Ok(Self { width, height, timestamp, pixels })
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, color: [u8; 3]) {
        let i = ((y * self.width + x) * 3) as usize;
        self.pixels[i..i + 3].copy_from_slice(&color);
    }

    pub fn same_dims(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Euclidean distance over the whole pixel vector with intensities
    /// scaled to `[0, 1]`, so the magnitude is independent of bit depth.
    pub fn l2_distance(&self, other: &Frame) -> Result<f64, FrameError> {
        if !self.same_dims(other) {
            return Err(FrameError::DimMismatch {
                a_w: self.width,
                a_h: self.height,
                b_w: other.width,
                b_h: other.height,
            });
        }
        let sum_sq: f64 = self
            .pixels
            .iter()
            .zip(other.pixels.iter())
            .map(|(&a, &b)| {
                let d = (a as f64 - b as f64) / 255.0;
                d * d
            })
            .sum();
        Ok(sum_sq.sqrt())
    }

    /// Short hex digest of the pixel contents, for log records.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.width.to_le_bytes());
        hasher.update(self.height.to_le_bytes());
        hasher.update(&self.pixels);
        let out = hasher.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Grayscale copy (Rec. 601 luma), used by template matching.
    pub fn luma(&self) -> Vec<f32> {
        self.pixels
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
            .collect()
    }
}

/// Task input: either a target image or a language instruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Goal {
    Image { image: Frame },
    Instruction { instruction: String },
}

impl Goal {
    pub fn image(&self) -> Option<&Frame> {
        match self {
            Goal::Image { image } => Some(image),
            Goal::Instruction { .. } => None,
        }
    }

    pub fn instruction(&self) -> Option<&str> {
        match self {
            Goal::Instruction { instruction } => Some(instruction),
            Goal::Image { .. } => None,
        }
    }

    /// Text handed to prompt templates: the instruction itself, or a fixed
    /// marker when the goal is an image.
    pub fn prompt_text(&self) -> &str {
        match self {
            Goal::Instruction { instruction } => instruction,
            Goal::Image { .. } => "reach the state shown in the goal image",
        }
    }
}

/// Role of a box in the scene understanding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxLabel {
    EndEffector,
    SubGoal,
    Interference,
}

/// Axis-aligned pixel-space bounding box, center + extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub label: BoxLabel,
}

impl Box2D {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, label: BoxLabel) -> Self {
        Self { cx, cy, w, h, label }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    /// (x0, y0, x1, y1) edges.
    pub fn edges(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn in_bounds(&self, frame_w: u32, frame_h: u32) -> bool {
        let (x0, y0, x1, y1) = self.edges();
        self.w > 0.0
            && self.h > 0.0
            && x0 >= 0.0
            && y0 >= 0.0
            && x1 <= frame_w as f64
            && y1 <= frame_h as f64
    }

    /// Intersects the box with the frame. A box entirely outside is pinned
    /// to a one-pixel sliver at the nearest edge so the result always
    /// satisfies the in-bounds invariant.
    pub fn clamped(&self, frame_w: u32, frame_h: u32) -> Box2D {
        let fw = frame_w as f64;
        let fh = frame_h as f64;
        let (x0, y0, x1, y1) = self.edges();
        let cx0 = x0.clamp(0.0, fw - 1.0);
        let cy0 = y0.clamp(0.0, fh - 1.0);
        let cx1 = x1.clamp(cx0 + 1.0, fw);
        let cy1 = y1.clamp(cy0 + 1.0, fh);
        Box2D {
            cx: (cx0 + cx1) / 2.0,
            cy: (cy0 + cy1) / 2.0,
            w: cx1 - cx0,
            h: cy1 - cy0,
            label: self.label,
        }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Intersection-over-union with another box.
    pub fn iou(&self, other: &Box2D) -> f64 {
        let (ax0, ay0, ax1, ay1) = self.edges();
        let (bx0, by0, bx1, by1) = other.edges();
        let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
        let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_array_round_trip() {
        let a = Action { dx: 0.01, dy: -0.02, dz: 0.0, rx: 0.1, ry: 0.0, rz: -0.05, g: 1.0 };
        assert_eq!(Action::from_array(a.as_array()), a);
    }

    #[test]
    fn action_invariants() {
        let b = ActionBounds::default();
        assert!(Action::ZERO.satisfies(&b));
        assert!(!Action { dx: 0.06, ..Action::ZERO }.satisfies(&b));
        assert!(!Action { rz: 0.25, ..Action::ZERO }.satisfies(&b));
        assert!(!Action { g: 0.4, ..Action::ZERO }.satisfies(&b));
    }

    #[test]
    fn frame_l2_unit_case() {
        // One channel differs by 255 -> scaled difference vector (1, 0, ...).
        let goal = Frame::filled(2, 1, 0, [0, 0, 0]);
        let mut obs = goal.clone();
        obs.set(0, 0, [255, 0, 0]);
        assert!((obs.l2_distance(&goal).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_l2_dim_mismatch() {
        let a = Frame::filled(2, 2, 0, [0, 0, 0]);
        let b = Frame::filled(3, 2, 0, [0, 0, 0]);
        assert!(a.l2_distance(&b).is_err());
    }

    #[test]
    fn frame_digest_changes_with_pixels() {
        let a = Frame::filled(4, 4, 0, [10, 20, 30]);
        let mut b = a.clone();
        b.set(1, 1, [11, 20, 30]);
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.clone().digest());
    }

    #[test]
    fn box_clamping_keeps_bounds() {
        let b = Box2D::new(70.0, -3.0, 10.0, 6.0, BoxLabel::SubGoal);
        let c = b.clamped(64, 64);
        assert!(c.in_bounds(64, 64));
        assert!(c.w >= 1.0 && c.h >= 1.0);
    }

    #[test]
    fn box_iou_identity_and_disjoint() {
        let a = Box2D::new(10.0, 10.0, 6.0, 6.0, BoxLabel::EndEffector);
        assert!((a.iou(&a) - 1.0).abs() < 1e-12);
        let far = Box2D::new(40.0, 40.0, 6.0, 6.0, BoxLabel::EndEffector);
        assert_eq!(a.iou(&far), 0.0);
    }

    #[test]
    fn goal_exactly_one_payload() {
        let g = Goal::Instruction { instruction: "press the button".into() };
        assert!(g.image().is_none());
        assert_eq!(g.instruction(), Some("press the button"));
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("\"kind\":\"instruction\""));
        let back: Goal = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }
}
