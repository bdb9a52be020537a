//! Scripted ground-truth implementation of the three queries.
//!
//! The oracle reads the simulator state directly: direction is the sign of
//! the offset to the active sub-goal with a small deadband, boxes come
//! from the ground-truth projection, and the switch weight follows a fixed
//! policy (both costs far from a single goal and pixel-only near it;
//! box-cost-only before the final sub-goal of a staged task, both on the
//! final approach). Pure function of (state, task): repeated queries
//! return identical answers.

use super::{DirectionHint, SceneUnderstanding, Sign, SwitchWeight, Vlm, VlmAnswer};
use crate::sim::{ground_truth_boxes, SceneState, TaskSpec};
use crate::types::{Frame, Goal};

/// Distance at which a single-goal task is considered "near" its goal and
/// the switcher drops to the pixel cost alone.
const NEAR_GOAL_DIST: f64 = 0.10;

#[derive(Debug, Clone)]
pub struct OracleVlm {
    state: Option<SceneState>,
    task: Option<TaskSpec>,
    deadband: f64,
    grasp_radius: f64,
    press_radius: f64,
}

impl OracleVlm {
    pub fn new(deadband: f64, grasp_radius: f64, press_radius: f64) -> Self {
        Self { state: None, task: None, deadband, grasp_radius, press_radius }
    }

    fn view(&self) -> Option<(&SceneState, &TaskSpec)> {
        Some((self.state.as_ref()?, self.task.as_ref()?))
    }

    fn direction(&self, state: &SceneState, task: &TaskSpec) -> DirectionHint {
        let Some(active) = task.active_subgoal(state) else {
            return DirectionHint::ZERO;
        };
        let Some(target) = state.object(&active) else {
            return DirectionHint::ZERO;
        };
        let ee = state.ee_pose;
        let dx = Sign::of(target.pose.x - ee.x, self.deadband);
        let dy = Sign::of(target.pose.y - ee.y, self.deadband);

        let g = if let Some(held) = state.held.as_deref() {
            // Carrying: keep hold unless the payload sits inside the active
            // container, which is the release condition.
            let release = target.flags.container
                && state
                    .object(held)
                    .map(|h| target.rect().contains(h.pose))
                    .unwrap_or(false);
            !release
        } else if target.flags.graspable {
            target.pose.dist(ee) <= self.grasp_radius
        } else if target.flags.pressable {
            target.pose.dist(ee) <= self.press_radius
        } else {
            false
        };

        DirectionHint { dx, dy, dz: Sign::Zero, rx: Sign::Zero, ry: Sign::Zero, rz: Sign::Zero, g }
    }

    fn switch(&self, state: &SceneState, task: &TaskSpec) -> SwitchWeight {
        if task.sub_goals.len() == 1 {
            let near = task
                .active_subgoal(state)
                .and_then(|n| state.object(&n).map(|o| o.pose.dist(state.ee_pose)))
                .map(|d| d <= NEAR_GOAL_DIST)
                .unwrap_or(true);
            if near {
                SwitchWeight::PixelOnly
            } else {
                SwitchWeight::Both
            }
        } else {
            let on_final = task
                .active_subgoal(state)
                .map(|a| Some(&a) == task.sub_goals.last())
                .unwrap_or(true);
            if on_final {
                SwitchWeight::Both
            } else {
                SwitchWeight::VlmOnly
            }
        }
    }
}

impl Vlm for OracleVlm {
    fn query_direction(&mut self, _obs: &Frame, _goal: &Goal) -> VlmAnswer<DirectionHint> {
        match self.view() {
            Some((state, task)) => VlmAnswer::ok(self.direction(state, task)),
            None => VlmAnswer::degraded(DirectionHint::ZERO),
        }
    }

    fn query_boxes(&mut self, obs: &Frame, _goal: &Goal) -> VlmAnswer<SceneUnderstanding> {
        match self.view() {
            Some((state, task)) => {
                let (e, s, interference) = ground_truth_boxes(state, task, obs.width, obs.height);
                VlmAnswer::ok(SceneUnderstanding { e, s, interference })
            }
            None => {
                let full = crate::types::Box2D::new(
                    obs.width as f64 / 2.0,
                    obs.height as f64 / 2.0,
                    obs.width as f64,
                    obs.height as f64,
                    crate::types::BoxLabel::SubGoal,
                );
                let mut e = full;
                e.label = crate::types::BoxLabel::EndEffector;
                VlmAnswer::degraded(SceneUnderstanding { e, s: full, interference: vec![] })
            }
        }
    }

    fn query_switch(&mut self, _obs: &Frame, _goal: &Goal) -> VlmAnswer<SwitchWeight> {
        match self.view() {
            Some((state, task)) => VlmAnswer::ok(self.switch(state, task)),
            None => VlmAnswer::degraded(SwitchWeight::Both),
        }
    }

    fn sync_ground_truth(&mut self, state: &SceneState, task: &TaskSpec) {
        self.state = Some(state.clone());
        self.task = Some(task.clone());
    }
}
