//! Task definitions: object layouts, sub-goal order, success predicates
//! and ground-truth-state rewards.
//!
//! Four built-in tasks mirror the usual tabletop benchmark structure:
//! a single-goal press (`push_button`), two staged transport tasks
//! (`move_to_area`, `pick_place`), and a multi-sub-goal task with an
//! obstacle (`wipe`). Custom variants load from flat text files.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{obstacle_contact, Rect, SceneState, SimError, Vec2, TABLE_SIZE};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("task file not found: {0}")]
    NotFound(String),
    #[error("failed to read task {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    PushButton,
    MoveToArea,
    PickPlace,
    Wipe,
}

impl FromStr for TaskName {
    type Err = TaskError;
    fn from_str(s: &str) -> Result<Self, TaskError> {
        match s {
            "push_button" => Ok(TaskName::PushButton),
            "move_to_area" => Ok(TaskName::MoveToArea),
            "pick_place" => Ok(TaskName::PickPlace),
            "wipe" => Ok(TaskName::Wipe),
            other => Err(TaskError::UnknownTask(other.to_string())),
        }
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TaskName::PushButton => "push_button",
            TaskName::MoveToArea => "move_to_area",
            TaskName::PickPlace => "pick_place",
            TaskName::Wipe => "wipe",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    Image,
    Instruction,
}

/// Template for one scene object: everything but the seeded pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub size: Vec2,
    pub color: [u8; 3],
    pub flags: super::ObjectFlags,
    /// Region the object's center is sampled from at reset.
    pub spawn: Rect,
}

/// A task: its kind (which fixes success/reward semantics), goal form,
/// object templates, sub-goal order and interference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskName,
    pub goal_kind: GoalKind,
    pub instruction: String,
    pub objects: Vec<ObjectSpec>,
    pub sub_goals: Vec<String>,
    pub interference: Vec<String>,
    pub ee_spawn: Rect,
}

const DIAG: f64 = std::f64::consts::SQRT_2 * TABLE_SIZE;

fn shaped(dist: f64, weight: f64) -> f64 {
    weight * (1.0 - (dist / DIAG).clamp(0.0, 1.0))
}

impl TaskSpec {
    /// The four canonical tasks.
    pub fn builtin(kind: TaskName) -> TaskSpec {
        let flags = |g, p, o, c, l| super::ObjectFlags {
            graspable: g,
            pressable: p,
            obstacle: o,
            container: c,
            liquid: l,
        };
        let obj = |name: &str, w: f64, h: f64, color: [u8; 3], fl, spawn| ObjectSpec {
            name: name.to_string(),
            size: Vec2::new(w, h),
            color,
            flags: fl,
            spawn,
        };
        match kind {
            TaskName::PushButton => TaskSpec {
                name: kind.to_string(),
                kind,
                goal_kind: GoalKind::Image,
                instruction: "press the red button".into(),
                objects: vec![obj(
                    "button",
                    0.06,
                    0.06,
                    [200, 40, 40],
                    flags(false, true, false, false, false),
                    Rect::new(0.16, 0.16, 0.48, 0.48),
                )],
                sub_goals: vec!["button".into()],
                interference: vec![],
                ee_spawn: Rect::new(0.06, 0.06, 0.58, 0.58),
            },
            TaskName::MoveToArea => TaskSpec {
                name: kind.to_string(),
                kind,
                goal_kind: GoalKind::Image,
                instruction: "move the blue block into the yellow area".into(),
                objects: vec![
                    obj(
                        "area",
                        0.16,
                        0.16,
                        [228, 218, 120],
                        flags(false, false, false, true, false),
                        Rect::new(0.40, 0.14, 0.54, 0.50),
                    ),
                    obj(
                        "block",
                        0.06,
                        0.06,
                        [60, 90, 220],
                        flags(true, false, false, false, false),
                        Rect::new(0.08, 0.10, 0.28, 0.54),
                    ),
                ],
                sub_goals: vec!["block".into(), "area".into()],
                interference: vec![],
                ee_spawn: Rect::new(0.06, 0.06, 0.58, 0.58),
            },
            TaskName::PickPlace => TaskSpec {
                name: kind.to_string(),
                kind,
                goal_kind: GoalKind::Image,
                instruction: "put the banana in the bowl".into(),
                objects: vec![
                    obj(
                        "bowl",
                        0.12,
                        0.12,
                        [60, 70, 170],
                        flags(false, false, false, true, false),
                        Rect::new(0.42, 0.14, 0.54, 0.50),
                    ),
                    obj(
                        "banana",
                        0.08,
                        0.04,
                        [230, 210, 60],
                        flags(true, false, false, false, false),
                        Rect::new(0.10, 0.10, 0.30, 0.54),
                    ),
                ],
                sub_goals: vec!["banana".into(), "bowl".into()],
                interference: vec![],
                // the arm parks on the bowl side of the table
                ee_spawn: Rect::new(0.30, 0.06, 0.58, 0.58),
            },
            TaskName::Wipe => {
                let water = |name: &str, spawn| {
                    obj(name, 0.09, 0.09, [80, 200, 230], flags(false, false, false, false, true), spawn)
                };
                TaskSpec {
                    name: kind.to_string(),
                    kind,
                    goal_kind: GoalKind::Image,
                    instruction: "wipe up the water with the towel, avoid the bottle".into(),
                    objects: vec![
                        obj(
                            "towel",
                            0.07,
                            0.07,
                            [160, 80, 200],
                            flags(true, false, false, false, false),
                            Rect::new(0.07, 0.40, 0.18, 0.56),
                        ),
                        // puddle line across the north half; the bottle
                        // guards the diagonal shortcut from the arm's
                        // south-west home to the far puddles, so the
                        // wiping tour skirts it leg by leg while the
                        // straight-to-goal route clips it
                        water("water_0", Rect::new(0.20, 0.08, 0.30, 0.20)),
                        water("water_1", Rect::new(0.34, 0.08, 0.42, 0.20)),
                        water("water_2", Rect::new(0.46, 0.08, 0.54, 0.20)),
                        water("water_3", Rect::new(0.54, 0.26, 0.60, 0.40)),
                        obj(
                            "bottle",
                            0.05,
                            0.09,
                            [40, 160, 70],
                            flags(false, false, true, false, false),
                            Rect::new(0.36, 0.30, 0.44, 0.40),
                        ),
                    ],
                    sub_goals: vec![
                        "towel".into(),
                        "water_0".into(),
                        "water_1".into(),
                        "water_2".into(),
                        "water_3".into(),
                    ],
                    interference: vec!["bottle".into()],
                    ee_spawn: Rect::new(0.06, 0.30, 0.16, 0.58),
                }
            }
        }
    }

    /// Looks a built-in task up by name.
    pub fn by_name(name: &str) -> Result<TaskSpec, TaskError> {
        Ok(TaskSpec::builtin(name.parse::<TaskName>()?))
    }

    fn sub_goal_satisfied(&self, state: &SceneState, name: &str) -> bool {
        let held = state.held.as_deref();
        match self.kind {
            TaskName::PushButton => {
                state.object(name).map(|o| o.pressed).unwrap_or(false)
            }
            TaskName::MoveToArea => {
                let block_in_area = self.payload_in_container(state);
                match name {
                    "block" => held == Some("block") || block_in_area,
                    _ => block_in_area,
                }
            }
            TaskName::PickPlace => {
                let placed = self.payload_in_container(state) && held != Some("banana");
                match name {
                    "banana" => held == Some("banana") || placed,
                    _ => placed,
                }
            }
            TaskName::Wipe => match name {
                "towel" => held == Some("towel"),
                other => state.object(other).map(|o| o.wiped).unwrap_or(false),
            },
        }
    }

    /// The transported object's center lies inside the container rect
    /// (move_to_area / pick_place staging helper).
    fn payload_in_container(&self, state: &SceneState) -> bool {
        let (payload, container) = match self.kind {
            TaskName::MoveToArea => ("block", "area"),
            TaskName::PickPlace => ("banana", "bowl"),
            _ => return false,
        };
        match (state.object(payload), state.object(container)) {
            (Some(p), Some(c)) => c.rect().contains(p.pose),
            _ => false,
        }
    }

    /// First unsatisfied sub-goal, in declared order. For `wipe` the
    /// remaining water cells are visited nearest-first, so the active cell
    /// is the closest unwiped one.
    pub fn active_subgoal(&self, state: &SceneState) -> Option<String> {
        if self.kind == TaskName::Wipe {
            if !self.sub_goal_satisfied(state, "towel") {
                return Some("towel".to_string());
            }
            return self
                .sub_goals
                .iter()
                .skip(1)
                .filter(|n| !self.sub_goal_satisfied(state, n))
                .min_by(|a, b| {
                    let da = state.object(a).map(|o| o.pose.dist(state.ee_pose)).unwrap_or(f64::MAX);
                    let db = state.object(b).map(|o| o.pose.dist(state.ee_pose)).unwrap_or(f64::MAX);
                    da.total_cmp(&db)
                })
                .cloned();
        }
        self.sub_goals.iter().find(|n| !self.sub_goal_satisfied(state, n)).cloned()
    }

    pub fn success(&self, state: &SceneState) -> bool {
        match self.kind {
            TaskName::PushButton => self.sub_goal_satisfied(state, "button"),
            TaskName::MoveToArea => self.payload_in_container(state),
            TaskName::PickPlace => {
                self.payload_in_container(state) && state.held.as_deref() != Some("banana")
            }
            TaskName::Wipe => self
                .sub_goals
                .iter()
                .skip(1)
                .all(|n| state.object(n).map(|o| o.wiped).unwrap_or(false)),
        }
    }

    /// Whether the state breaks a hard task constraint. Any contact with an
    /// obstacle-flagged object fails the episode immediately.
    pub fn violated(&self, state: &SceneState) -> bool {
        !self.interference.is_empty() && obstacle_contact(state)
    }

    /// Ground-truth-state reward in [0, 100]; exactly 100 iff the task
    /// succeeded. Shaped to increase monotonically along an approach to
    /// the active sub-goal.
    pub fn reward(&self, state: &SceneState) -> f64 {
        if self.violated(state) {
            return 0.0;
        }
        if self.success(state) {
            return 100.0;
        }
        let ee = state.ee_pose;
        match self.kind {
            TaskName::PushButton => {
                let d = state.object("button").map(|o| o.pose.dist(ee)).unwrap_or(DIAG);
                shaped(d, 99.0)
            }
            TaskName::MoveToArea => {
                let d = match (state.object("block"), state.object("area")) {
                    (Some(b), Some(a)) => a.rect().dist_to(b.pose),
                    _ => DIAG,
                };
                // d = 0 only inside the area, which is the success case.
                shaped(d, 100.0)
            }
            TaskName::PickPlace => {
                if state.held.as_deref() == Some("banana") {
                    let d = match (state.object("banana"), state.object("bowl")) {
                        (Some(p), Some(c)) => c.rect().dist_to(p.pose),
                        _ => DIAG,
                    };
                    50.0 + shaped(d, 49.0)
                } else {
                    let d = state.object("banana").map(|o| o.pose.dist(ee)).unwrap_or(DIAG);
                    shaped(d, 49.0)
                }
            }
            TaskName::Wipe => {
                let cells: Vec<_> = self.sub_goals.iter().skip(1).collect();
                let wiped = cells
                    .iter()
                    .filter(|n| state.object(n).map(|o| o.wiped).unwrap_or(false))
                    .count();
                let base = 85.0 * wiped as f64 / cells.len().max(1) as f64;
                let stage = match self.active_subgoal(state) {
                    Some(active) => {
                        let d = state.object(&active).map(|o| o.pose.dist(ee)).unwrap_or(DIAG);
                        shaped(d, 14.0)
                    }
                    None => 14.0,
                };
                base + stage
            }
        }
    }

    /// The completed scene used to realize an image goal: task done, with
    /// the end-effector resting at its natural final position.
    pub(super) fn goal_state(&self, initial: &SceneState) -> Result<SceneState, SimError> {
        let mut goal = initial.clone();
        let need = |state: &SceneState, name: &str| {
            state
                .object(name)
                .map(|o| o.pose)
                .ok_or_else(|| SimError::UnknownObject(name.to_string()))
        };
        match self.kind {
            TaskName::PushButton => {
                let pose = need(&goal, "button")?;
                for o in goal.objects.iter_mut() {
                    if o.name == "button" {
                        o.pressed = true;
                    }
                }
                goal.ee_pose = super::clamp_center(pose, EE_HALF, EE_HALF);
            }
            TaskName::MoveToArea => {
                let target = need(&goal, "area")?;
                for o in goal.objects.iter_mut() {
                    if o.name == "block" {
                        o.pose = target;
                    }
                }
                goal.ee_pose = super::clamp_center(target, EE_HALF, EE_HALF);
            }
            TaskName::PickPlace => {
                let target = need(&goal, "bowl")?;
                for o in goal.objects.iter_mut() {
                    if o.name == "banana" {
                        o.pose = target;
                    }
                }
                goal.ee_pose = super::clamp_center(target, EE_HALF, EE_HALF);
            }
            TaskName::Wipe => {
                let towel_start = need(&goal, "towel")?;
                let mut farthest = towel_start;
                let mut best = -1.0;
                for o in goal.objects.iter_mut() {
                    if o.flags.liquid {
                        o.wiped = true;
                        let d = o.pose.dist(towel_start);
                        if d > best {
                            best = d;
                            farthest = o.pose;
                        }
                    }
                }
                for o in goal.objects.iter_mut() {
                    if o.name == "towel" {
                        o.pose = farthest;
                    }
                }
                goal.ee_pose = super::clamp_center(farthest, EE_HALF, EE_HALF);
            }
        }
        Ok(goal)
    }

    fn validate(&self) -> Result<(), TaskError> {
        if self.sub_goals.is_empty() {
            return Err(TaskError::Invalid("sub_goals must be non-empty".into()));
        }
        for name in self.sub_goals.iter().chain(self.interference.iter()) {
            if !self.objects.iter().any(|o| &o.name == name) {
                return Err(TaskError::Invalid(format!("`{name}` is not a declared object")));
            }
        }
        Ok(())
    }

    /// Loads a task from a flat text file. Format:
    ///
    /// ```text
    /// name = my_wipe
    /// kind = wipe
    /// goal = image                    # or: instruction
    /// instruction = wipe up the water
    /// sub_goals = towel, water_0
    /// interference = bottle
    /// ee_spawn = 0.06 0.14 0.14 0.50
    /// object = towel | 0.07 0.07 | 160 80 200 | graspable | 0.07 0.14 0.16 0.50
    /// object = water_0 | 0.05 0.05 | 80 200 230 | liquid | 0.24 0.14 0.32 0.50
    /// ```
    ///
    /// An `object` line is `name | w h | r g b | flags | x0 y0 x1 y1` with
    /// flags a comma-separated subset of
    /// `graspable,pressable,obstacle,container,liquid` or `none`.
    pub fn from_file(path: impl AsRef<Path>) -> Result<TaskSpec, TaskError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(TaskError::NotFound(path.display().to_string()));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|source| TaskError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<TaskSpec, TaskError> {
        let mut kind: Option<TaskName> = None;
        let mut name: Option<String> = None;
        let mut goal_kind = GoalKind::Image;
        let mut instruction = String::new();
        let mut sub_goals = Vec::new();
        let mut interference = Vec::new();
        let mut ee_spawn = Rect::new(0.06, 0.06, 0.58, 0.58);
        let mut objects = Vec::new();

        let err = |line: usize, reason: String| TaskError::Parse { line, reason };

        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(i + 1, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "name" => name = Some(value.to_string()),
                "kind" => kind = Some(value.parse::<TaskName>()?),
                "goal" => {
                    goal_kind = match value {
                        "image" => GoalKind::Image,
                        "instruction" => GoalKind::Instruction,
                        other => {
                            return Err(err(i + 1, format!("goal must be image|instruction, got `{other}`")))
                        }
                    }
                }
                "instruction" => instruction = value.to_string(),
                "sub_goals" => {
                    sub_goals = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                }
                "interference" => {
                    interference = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                }
                "ee_spawn" => ee_spawn = parse_rect(value).map_err(|r| err(i + 1, r))?,
                "object" => objects.push(parse_object(value).map_err(|r| err(i + 1, r))?),
                other => return Err(err(i + 1, format!("unknown key `{other}`"))),
            }
        }

        let kind = kind.ok_or_else(|| TaskError::Invalid("missing `kind`".into()))?;
        let task = TaskSpec {
            name: name.unwrap_or_else(|| kind.to_string()),
            kind,
            goal_kind,
            instruction,
            objects,
            sub_goals,
            interference,
            ee_spawn,
        };
        task.validate()?;
        Ok(task)
    }
}

const EE_HALF: f64 = super::EE_SIZE / 2.0;

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let vals: Result<Vec<f64>, _> = s.split_whitespace().map(|p| p.parse::<f64>()).collect();
    let vals = vals.map_err(|e| e.to_string())?;
    if vals.len() != n {
        return Err(format!("expected {n} numbers, got {}", vals.len()));
    }
    Ok(vals)
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let v = parse_floats(s, 4)?;
    Ok(Rect::new(v[0], v[1], v[2], v[3]))
}

fn parse_object(s: &str) -> Result<ObjectSpec, String> {
    let parts: Vec<&str> = s.split('|').map(|p| p.trim()).collect();
    if parts.len() != 5 {
        return Err(format!("object line needs 5 `|`-separated fields, got {}", parts.len()));
    }
    let size = parse_floats(parts[1], 2)?;
    let color = parse_floats(parts[2], 3)?;
    let mut flags = super::ObjectFlags::default();
    if parts[3] != "none" {
        for f in parts[3].split(',').map(|f| f.trim()).filter(|f| !f.is_empty()) {
            match f {
                "graspable" => flags.graspable = true,
                "pressable" => flags.pressable = true,
                "obstacle" => flags.obstacle = true,
                "container" => flags.container = true,
                "liquid" => flags.liquid = true,
                other => return Err(format!("unknown flag `{other}`")),
            }
        }
    }
    Ok(ObjectSpec {
        name: parts[0].to_string(),
        size: Vec2::new(size[0], size[1]),
        color: [color[0] as u8, color[1] as u8, color[2] as u8],
        flags,
        spawn: parse_rect(parts[4])?,
    })
}
