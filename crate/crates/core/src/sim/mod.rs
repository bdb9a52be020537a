//! Deterministic 2D top-down tabletop world.
//!
//! The world is a square table of [`TABLE_SIZE`] meters per side. The
//! end-effector and every object live on it as axis-aligned rectangles.
//! Dynamics are total: any action applied to any state yields a new state.
//! Actions keep the full 7-dimensional interface; `dz`, `rx`, `ry` are
//! recorded but inert in 2D, `rz` accumulates into the end-effector angle
//! without affecting rendering.

mod render;
mod task;

pub use render::{render, world_to_px_scale, EE_CORE_COLOR, EE_HALO_HALF, EE_RING_COLOR, TABLE_COLOR};
pub use task::{GoalKind, ObjectSpec, TaskError, TaskName, TaskSpec};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngHub;
use crate::types::{Box2D, BoxLabel, Frame, Goal};

/// Table side length, meters. With the default 64-pixel frame one pixel
/// covers one centimeter.
pub const TABLE_SIZE: f64 = 0.64;

/// End-effector footprint side length, meters.
pub const EE_SIZE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("could not place object `{0}` collision-free after {1} attempts")]
    Placement(String, usize),
    #[error("task references unknown object `{0}`")]
    UnknownObject(String),
}

/// 2D point / extent, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: Vec2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Axis-aligned rectangle in world meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { min: Vec2::new(x0, y0), max: Vec2::new(x1, y1) }
    }

    pub fn centered(center: Vec2, w: f64, h: f64) -> Self {
        Self {
            min: Vec2::new(center.x - w / 2.0, center.y - h / 2.0),
            max: Vec2::new(center.x + w / 2.0, center.y + h / 2.0),
        }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Distance from a point to the rectangle; zero inside.
    pub fn dist_to(&self, p: Vec2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn inflate(&self, by: f64) -> Rect {
        Rect {
            min: Vec2::new(self.min.x - by, self.min.y - by),
            max: Vec2::new(self.max.x + by, self.max.y + by),
        }
    }
}

/// Behavioral markers for scene objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ObjectFlags {
    #[serde(default)]
    pub graspable: bool,
    #[serde(default)]
    pub pressable: bool,
    #[serde(default)]
    pub obstacle: bool,
    #[serde(default)]
    pub container: bool,
    /// A patch that is absorbed when a held object is dragged across it.
    #[serde(default)]
    pub liquid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub pose: Vec2,
    pub size: Vec2,
    pub color: [u8; 3],
    pub flags: ObjectFlags,
    /// Set by a press transition; only meaningful for pressable objects.
    #[serde(default)]
    pub pressed: bool,
    /// Set when a held object sweeps this patch; only meaningful for liquids.
    #[serde(default)]
    pub wiped: bool,
}

impl SceneObject {
    pub fn rect(&self) -> Rect {
        Rect::centered(self.pose, self.size.x, self.size.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gripper {
    Open,
    Closed,
}

/// Full ground-truth world state. Immutable value; [`step`] returns a new
/// state, so clones can be rolled forward independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub ee_pose: Vec2,
    pub ee_angle: f64,
    pub gripper: Gripper,
    pub held: Option<String>,
    pub objects: Vec<SceneObject>,
    pub step: u64,
}

impl SceneState {
    pub fn object(&self, name: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    fn object_mut(&mut self, name: &str) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| o.name == name)
    }

    pub fn ee_rect(&self) -> Rect {
        Rect::centered(self.ee_pose, EE_SIZE, EE_SIZE)
    }
}

/// Interaction radii for the proximity-snap grasp model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub grasp_radius: f64,
    pub press_radius: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self { grasp_radius: 0.03, press_radius: 0.03 }
    }
}

fn clamp_center(p: Vec2, half_w: f64, half_h: f64) -> Vec2 {
    Vec2::new(
        p.x.clamp(half_w, TABLE_SIZE - half_w),
        p.y.clamp(half_h, TABLE_SIZE - half_h),
    )
}

/// Applies one action. Dynamics are total: translation by `(dx, dy)` with
/// the footprint clipped to the table, `rz` accumulated into the
/// end-effector angle. A closed grasp command with empty fingers attaches
/// the nearest graspable object within `grasp_radius` (an already-closed
/// empty gripper keeps trying, so a premature close cannot deadlock the
/// grasp); opening detaches. Pressables toggle only on the open->closed
/// transition. A held object tracks the end-effector pose exactly and
/// absorbs any liquid patch it sweeps.
pub fn step(state: &SceneState, action: &crate::types::Action, params: &SimParams) -> SceneState {
    let mut next = state.clone();
    next.step = state.step + 1;

    let target = Vec2::new(next.ee_pose.x + action.dx, next.ee_pose.y + action.dy);
    next.ee_pose = clamp_center(target, EE_SIZE / 2.0, EE_SIZE / 2.0);
    next.ee_angle += action.rz;

    let closing_transition = action.grasp_closed() && next.gripper == Gripper::Open;
    let opening = !action.grasp_closed() && next.gripper == Gripper::Closed;

    if action.grasp_closed() {
        next.gripper = Gripper::Closed;
        let ee = next.ee_pose;
        if next.held.is_none() {
            next.held = next
                .objects
                .iter()
                .filter(|o| o.flags.graspable)
                .map(|o| (o.name.clone(), o.pose.dist(ee)))
                .filter(|(_, d)| *d <= params.grasp_radius)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(name, _)| name);
        }
        if closing_transition {
            for obj in next.objects.iter_mut() {
                if obj.flags.pressable && obj.pose.dist(ee) <= params.press_radius {
                    obj.pressed = !obj.pressed;
                }
            }
        }
    } else if opening {
        next.gripper = Gripper::Open;
        next.held = None;
    }

    if let Some(held_name) = next.held.clone() {
        let ee = next.ee_pose;
        if let Some(obj) = next.object_mut(&held_name) {
            obj.pose = ee;
        }
        let held_rect = next.object(&held_name).map(|o| o.rect());
        if let Some(hr) = held_rect {
            for obj in next.objects.iter_mut() {
                if obj.flags.liquid && !obj.wiped && obj.rect().intersects(&hr) {
                    obj.wiped = true;
                }
            }
        }
    }

    next
}

/// True when the end-effector footprint or a held object overlaps any
/// obstacle-flagged object.
pub fn obstacle_contact(state: &SceneState) -> bool {
    let ee = state.ee_rect();
    let held_rect = state.held.as_deref().and_then(|n| state.object(n)).map(|o| o.rect());
    state.objects.iter().filter(|o| o.flags.obstacle).any(|o| {
        let r = o.rect();
        r.intersects(&ee) || held_rect.map(|hr| r.intersects(&hr)).unwrap_or(false)
    })
}

/// Everything produced by a reset: the initial state, its rendering, and
/// the realized goal (the goal image depends on the seeded layout, so it
/// is built here rather than carried statically by the task).
#[derive(Debug, Clone)]
pub struct ResetOutcome {
    pub state: SceneState,
    pub observation: Frame,
    pub goal: Goal,
}

const PLACEMENT_ATTEMPTS: usize = 200;
const PLACEMENT_GAP: f64 = 0.02;

fn sample_pose(
    rng: &mut ChaCha8Rng,
    spawn: &Rect,
    half_w: f64,
    half_h: f64,
    occupied: &[Rect],
    name: &str,
) -> Result<Vec2, SimError> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let p = Vec2::new(
            rng.random_range(spawn.min.x..=spawn.max.x),
            rng.random_range(spawn.min.y..=spawn.max.y),
        );
        let p = clamp_center(p, half_w + 0.005, half_h + 0.005);
        let rect = Rect::centered(p, half_w * 2.0, half_h * 2.0).inflate(PLACEMENT_GAP);
        if occupied.iter().all(|r| !r.intersects(&rect)) {
            return Ok(p);
        }
    }
    Err(SimError::Placement(name.to_string(), PLACEMENT_ATTEMPTS))
}

/// Places every object collision-free within its spawn region, places the
/// end-effector, renders the initial observation, and realizes the goal.
/// Deterministic per seed.
pub fn reset(task: &TaskSpec, seed: u64, frame_size: u32) -> Result<ResetOutcome, SimError> {
    let mut rng = RngHub::new(seed).sim();
    let mut objects = Vec::with_capacity(task.objects.len());
    let mut occupied: Vec<Rect> = Vec::new();

    for spec in &task.objects {
        let pose = sample_pose(
            &mut rng,
            &spec.spawn,
            spec.size.x / 2.0,
            spec.size.y / 2.0,
            &occupied,
            &spec.name,
        )?;
        occupied.push(Rect::centered(pose, spec.size.x, spec.size.y));
        objects.push(SceneObject {
            name: spec.name.clone(),
            pose,
            size: spec.size,
            color: spec.color,
            flags: spec.flags,
            pressed: false,
            wiped: false,
        });
    }

    let ee_pose = sample_pose(&mut rng, &task.ee_spawn, EE_SIZE / 2.0, EE_SIZE / 2.0, &occupied, "end_effector")?;

    let state = SceneState {
        ee_pose,
        ee_angle: 0.0,
        gripper: Gripper::Open,
        held: None,
        objects,
        step: 0,
    };

    let goal_state = task.goal_state(&state)?;
    let goal = match task.goal_kind {
        GoalKind::Image => {
            let mut image = render(&goal_state, frame_size, frame_size);
            image.timestamp = 0;
            Goal::Image { image }
        }
        GoalKind::Instruction => Goal::Instruction { instruction: task.instruction.clone() },
    };

    let observation = render(&state, frame_size, frame_size);
    Ok(ResetOutcome { state, observation, goal })
}

/// Pixel-space boxes straight from ground truth: the end-effector, the
/// first unsatisfied sub-goal, and every obstacle-flagged object. This is
/// what the scripted VLM oracle reports.
pub fn ground_truth_boxes(
    state: &SceneState,
    task: &TaskSpec,
    frame_w: u32,
    frame_h: u32,
) -> (Box2D, Box2D, Vec<Box2D>) {
    let scale = world_to_px_scale(frame_w);
    let to_box = |pose: Vec2, size: Vec2, label: BoxLabel| {
        Box2D::new(pose.x * scale, pose.y * scale, size.x * scale, size.y * scale, label)
            .clamped(frame_w, frame_h)
    };
    let e = to_box(state.ee_pose, Vec2::new(EE_SIZE, EE_SIZE), BoxLabel::EndEffector);

    let active = task
        .active_subgoal(state)
        .or_else(|| task.sub_goals.last().cloned())
        .expect("task has at least one sub-goal");
    let s = state
        .object(&active)
        .map(|o| to_box(o.pose, o.size, BoxLabel::SubGoal))
        .unwrap_or_else(|| to_box(state.ee_pose, Vec2::new(EE_SIZE, EE_SIZE), BoxLabel::SubGoal));

    let interference: Vec<Box2D> = state
        .objects
        .iter()
        .filter(|o| o.flags.obstacle)
        .map(|o| to_box(o.pose, o.size, BoxLabel::Interference))
        .collect();

    (e, s, interference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Action;

    fn simple_state() -> SceneState {
        SceneState {
            ee_pose: Vec2::new(0.2, 0.2),
            ee_angle: 0.0,
            gripper: Gripper::Open,
            held: None,
            objects: vec![SceneObject {
                name: "block".into(),
                pose: Vec2::new(0.21, 0.2),
                size: Vec2::new(0.06, 0.06),
                color: [60, 90, 220],
                flags: ObjectFlags { graspable: true, ..Default::default() },
                pressed: false,
                wiped: false,
            }],
            step: 0,
        }
    }

    #[test]
    fn pure_translation() {
        let s = simple_state();
        let a = Action { dx: 0.05, ..Action::ZERO };
        let next = step(&s, &a, &SimParams::default());
        assert!((next.ee_pose.x - 0.25).abs() < 1e-12);
        assert!((next.ee_pose.y - 0.2).abs() < 1e-12);
        assert_eq!(next.step, 1);
    }

    #[test]
    fn translation_clamped_at_table_edge() {
        let mut s = simple_state();
        s.ee_pose = Vec2::new(TABLE_SIZE - 0.03, 0.2);
        let a = Action { dx: 0.05, ..Action::ZERO };
        let next = step(&s, &a, &SimParams::default());
        assert!((next.ee_pose.x - (TABLE_SIZE - EE_SIZE / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn grasp_within_radius_attaches() {
        let s = simple_state(); // block 0.01 m away
        let a = Action { g: 1.0, ..Action::ZERO };
        let next = step(&s, &a, &SimParams::default());
        assert_eq!(next.held.as_deref(), Some("block"));
        assert_eq!(next.gripper, Gripper::Closed);
        // held object tracks the end-effector exactly
        assert_eq!(next.object("block").unwrap().pose, next.ee_pose);
    }

    #[test]
    fn release_leaves_object_at_release_point() {
        let s = simple_state();
        let grab = Action { g: 1.0, ..Action::ZERO };
        let carry = Action { dx: 0.04, dy: 0.02, g: 1.0, ..Action::ZERO };
        let drop = Action { g: 0.0, ..Action::ZERO };
        let s1 = step(&s, &grab, &SimParams::default());
        let s2 = step(&s1, &carry, &SimParams::default());
        let carried_to = s2.object("block").unwrap().pose;
        let s3 = step(&s2, &drop, &SimParams::default());
        assert_eq!(s3.held, None);
        assert_eq!(s3.object("block").unwrap().pose, carried_to);
    }

    #[test]
    fn grasp_outside_radius_closes_empty() {
        let mut s = simple_state();
        s.objects[0].pose = Vec2::new(0.4, 0.4);
        let a = Action { g: 1.0, ..Action::ZERO };
        let next = step(&s, &a, &SimParams::default());
        assert_eq!(next.held, None);
        assert_eq!(next.gripper, Gripper::Closed);
    }

    #[test]
    fn press_toggles_on_closing_transition_only() {
        let mut s = simple_state();
        s.objects[0].flags = ObjectFlags { pressable: true, ..Default::default() };
        let close = Action { g: 1.0, ..Action::ZERO };
        let s1 = step(&s, &close, &SimParams::default());
        assert!(s1.object("block").unwrap().pressed);
        // staying closed does not re-toggle
        let s2 = step(&s1, &close, &SimParams::default());
        assert!(s2.object("block").unwrap().pressed);
    }

    #[test]
    fn step_is_deterministic() {
        let s = simple_state();
        let a = Action { dx: 0.01, dy: -0.02, g: 1.0, ..Action::ZERO };
        let n1 = step(&s, &a, &SimParams::default());
        let n2 = step(&s, &a, &SimParams::default());
        assert_eq!(n1, n2);
    }

    #[test]
    fn reset_deterministic_per_seed() {
        let task = TaskSpec::builtin(TaskName::PushButton);
        let a = reset(&task, 1, 64).unwrap();
        let b = reset(&task, 1, 64).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.observation, b.observation);
        let c = reset(&task, 2, 64).unwrap();
        assert_ne!(a.state, c.state);
    }

    #[test]
    fn reset_pick_place_non_overlapping() {
        let task = TaskSpec::builtin(TaskName::PickPlace);
        let out = reset(&task, 2, 64).unwrap();
        let banana = out.state.object("banana").unwrap().rect();
        let bowl = out.state.object("bowl").unwrap().rect();
        assert!(!banana.intersects(&bowl));
    }

    #[test]
    fn reset_wipe_has_obstacle() {
        let task = TaskSpec::builtin(TaskName::Wipe);
        let out = reset(&task, 3, 64).unwrap();
        assert!(out.state.objects.iter().any(|o| o.flags.obstacle));
    }

    #[test]
    fn wipe_absorbs_swept_liquid() {
        let mut s = simple_state();
        s.objects.push(SceneObject {
            name: "water_0".into(),
            pose: Vec2::new(0.3, 0.2),
            size: Vec2::new(0.05, 0.05),
            color: [80, 200, 230],
            flags: ObjectFlags { liquid: true, ..Default::default() },
            pressed: false,
            wiped: false,
        });
        let grab = Action { g: 1.0, ..Action::ZERO };
        let mut st = step(&s, &grab, &SimParams::default());
        assert_eq!(st.held.as_deref(), Some("block"));
        for _ in 0..4 {
            st = step(&st, &Action { dx: 0.03, g: 1.0, ..Action::ZERO }, &SimParams::default());
        }
        assert!(st.object("water_0").unwrap().wiped);
    }

    #[test]
    fn ground_truth_boxes_track_task_stage() {
        let task = TaskSpec::builtin(TaskName::PickPlace);
        let out = reset(&task, 5, 64).unwrap();
        let (_, s_before, _) = ground_truth_boxes(&out.state, &task, 64, 64);
        let banana_px = out.state.object("banana").unwrap().pose;
        let scale = world_to_px_scale(64);
        assert!((s_before.cx - banana_px.x * scale).abs() < 1.5);

        // After grasping the banana the sub-goal becomes the bowl.
        let mut st = out.state.clone();
        st.held = Some("banana".into());
        st.gripper = Gripper::Closed;
        let (_, s_after, interference) = ground_truth_boxes(&st, &task, 64, 64);
        let bowl_px = st.object("bowl").unwrap().pose;
        assert!((s_after.cx - bowl_px.x * scale).abs() < 1.5);
        assert!(interference.is_empty());
    }

    #[test]
    fn obstacle_contact_detects_overlap() {
        let mut s = simple_state();
        s.objects.push(SceneObject {
            name: "bottle".into(),
            pose: Vec2::new(0.21, 0.21),
            size: Vec2::new(0.05, 0.09),
            color: [40, 160, 70],
            flags: ObjectFlags { obstacle: true, ..Default::default() },
            pressed: false,
            wiped: false,
        });
        assert!(obstacle_contact(&s));
        s.objects[1].pose = Vec2::new(0.5, 0.5);
        assert!(!obstacle_contact(&s));
    }
}
