//! The receding-horizon control loop.
//!
//! Each step: query the switch weight and movement direction, blend the
//! direction-derived mean with the history mean, sample candidates,
//! predict each candidate's future frames, score them (pixel cost against
//! the goal image and/or box cost over tracked boxes), execute the first
//! action of the winner, and pool the winner's remaining actions into the
//! next history mean. Tracking is skipped entirely when the switch says
//! pixel-only; both box queries and the pixel pass are elided when unused.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{AblationMode, PredictorKind, RunConfig, VlmKind};
use crate::cost::{self, CostError};
use crate::log::{EndSignal, EpisodeLog, LogError, StepRecord};
use crate::predictor::{
    NoisyOraclePredictor, OraclePredictor, PredictError, PredictedVideo, PredictionContext,
    Predictor, SimSnapshot, SpriteWarpPredictor,
};
use crate::rng::RngHub;
use crate::sampler::{self, MeanSource, SamplerError, SamplingMean};
use crate::sim::{self, SceneState, SimError, SimParams, TaskSpec};
use crate::tracker::{track, TrackerParams};
use crate::types::{Action, ActionSequence, Frame, Goal};
use crate::vlm::{OracleVlm, SceneUnderstanding, SwitchWeight, Vlm};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Task(#[from] sim::TaskError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("remote VLM requested but the `remote-http` feature is not enabled")]
    RemoteUnavailable,
    #[error("remote VLM configuration: {0}")]
    RemoteConfig(String),
}

/// Loop state carried between control steps.
#[derive(Debug, Clone)]
pub struct ControllerState {
    /// Completed control steps.
    pub t: u64,
    /// Mean of the previously selected plan's remaining actions.
    pub mu_sub: SamplingMean,
    /// Observation preceding the current one (duplicated at t = 0).
    pub last_frame: Frame,
    /// The two most recently executed actions (zero at t = 0).
    pub exec_prev: Action,
    pub exec_curr: Action,
    /// Set once any VLM query fell back during the episode.
    pub degraded: bool,
}

impl ControllerState {
    /// Initial state: zero history mean, frame history seeded by
    /// duplicating the first observation with zero actions.
    pub fn init(initial_obs: &Frame) -> Self {
        Self {
            t: 0,
            mu_sub: SamplingMean::zero(MeanSource::Sub),
            last_frame: initial_obs.clone(),
            exec_prev: Action::ZERO,
            exec_curr: Action::ZERO,
            degraded: false,
        }
    }
}

/// The componentwise mean of a plan's actions after the first: the history
/// mean fed into the next step's blend. Empty remainder (horizon 1) gives
/// the zero mean. The grasp component averages as a real number.
pub fn subsequent_mean(winner: &ActionSequence) -> SamplingMean {
    let rest = &winner.actions[1.min(winner.actions.len())..];
    if rest.is_empty() {
        return SamplingMean::zero(MeanSource::Sub);
    }
    let mut mu = [0.0; 7];
    for action in rest {
        for (acc, v) in mu.iter_mut().zip(action.as_array()) {
            *acc += v;
        }
    }
    for v in mu.iter_mut() {
        *v /= rest.len() as f64;
    }
    SamplingMean { mu, source: MeanSource::Sub }
}

/// External dependencies of one control step.
pub struct StepDeps<'a> {
    pub vlm: &'a mut dyn Vlm,
    pub predictor: &'a dyn Predictor,
    pub sampler_rng: &'a mut ChaCha8Rng,
}

/// Everything one control step produces.
pub struct StepOutcome {
    pub action: Action,
    pub next: ControllerState,
    pub record: StepRecord,
    pub winner_video: PredictedVideo,
    pub boxes: Option<SceneUnderstanding>,
}

#[cfg(not(target_arch = "wasm32"))]
fn now_ms() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[cfg(target_arch = "wasm32")]
fn now_ms() -> u64 {
    0
}

/// One pass of the decision loop over a live observation.
pub fn control_step(
    cs: &ControllerState,
    obs: &Frame,
    goal: &Goal,
    aux: Option<SimSnapshot>,
    cfg: &RunConfig,
    deps: &mut StepDeps<'_>,
) -> Result<StepOutcome, ControlError> {
    let started = now_ms();
    let mut degraded = false;

    // Switch weight; ablations pin it, and without a goal image the pixel
    // cost is undefined so the box cost carries the step alone.
    let mut switch = match cfg.ablation_mode {
        AblationMode::Pd => SwitchWeight::PixelOnly,
        AblationMode::Vs => SwitchWeight::VlmOnly,
        _ => {
            let ans = deps.vlm.query_switch(obs, goal);
            degraded |= ans.degraded;
            ans.value
        }
    };
    if goal.image().is_none() {
        switch = SwitchWeight::VlmOnly;
    }

    // Direction hint -> sampling mean, blended with history.
    let hint = deps.vlm.query_direction(obs, goal);
    degraded |= hint.degraded;
    let mu_vlm = sampler::hint_to_mean(&hint.value, cfg.w_m, cfg.w_r);
    let mean = if cfg.ablation_mode == AblationMode::Rs {
        SamplingMean::zero(MeanSource::Blended)
    } else {
        sampler::blend_means(&mu_vlm, &cs.mu_sub, cfg.w_vlm, cfg.w_sub)?
    };

    let candidates = sampler::sample_candidates(
        &mean,
        cfg.n_candidates,
        cfg.horizon,
        &cfg.sigma,
        &cfg.bounds(),
        deps.sampler_rng,
    );

    // Boxes are queried once per step on the live observation and shared
    // by every tracked video; skipped when nothing consumes them.
    let need_boxes = switch != SwitchWeight::PixelOnly || deps.predictor.needs_boxes();
    let boxes = if need_boxes {
        let ans = deps.vlm.query_boxes(obs, goal);
        degraded |= ans.degraded;
        Some(ans.value)
    } else {
        None
    };

    let ctx = PredictionContext {
        prev: cs.last_frame.clone(),
        curr: obs.clone(),
        a_prev: cs.exec_prev,
        a_curr: cs.exec_curr,
        aux,
        init_boxes: boxes.clone(),
    };
    let videos = deps.predictor.predict_batch(&ctx, &candidates)?;
    let n = videos.len();

    let mut pixel_totals = vec![0.0; n];
    let mut pixel_traces = vec![Vec::new(); n];
    if switch != SwitchWeight::VlmOnly {
        let goal_img = goal.image().expect("switch is pinned to box cost without a goal image");
        for (i, video) in videos.iter().enumerate() {
            let trace = cost::pixel_cost(video, goal_img)?;
            pixel_totals[i] = trace.total;
            pixel_traces[i] = trace.per_frame;
        }
    }

    let mut vlm_totals = vec![0.0; n];
    let mut vlm_traces = vec![Vec::new(); n];
    if switch != SwitchWeight::PixelOnly {
        let init = boxes.as_ref().expect("boxes were queried for the box cost");
        let params = TrackerParams {
            search_radius: cfg.search_radius as i32,
            min_correlation: cfg.min_correlation,
        };
        for (i, video) in videos.iter().enumerate() {
            let tracked = track(video, init, obs, &params);
            let per_frame: Vec<SceneUnderstanding> =
                tracked.into_iter().map(|tf| tf.boxes).collect();
            let trace = cost::vlm_cost(&per_frame);
            vlm_totals[i] = trace.total;
            vlm_traces[i] = trace.per_frame;
        }
    }

    let mut reports = cost::combine(&pixel_totals, &vlm_totals, switch)?;
    for (report, (pt, vt)) in reports
        .iter_mut()
        .zip(pixel_traces.into_iter().zip(vlm_traces.into_iter()))
    {
        report.pixel_trace = pt;
        report.vlm_trace = vt;
    }
    let best = cost::select_best(&reports)?;

    let winner = &candidates[best];
    let action = winner.actions[0];
    let record = StepRecord {
        step: cs.t,
        obs_digest: obs.digest(),
        mu: mean.mu,
        chosen: best,
        action,
        costs: reports,
        w_d: switch.value(),
        duration_ms: now_ms().saturating_sub(started),
        degraded,
    };
    let next = ControllerState {
        t: cs.t + 1,
        mu_sub: subsequent_mean(winner),
        last_frame: obs.clone(),
        exec_prev: cs.exec_curr,
        exec_curr: action,
        degraded: cs.degraded || degraded,
    };
    Ok(StepOutcome { action, next, record, winner_video: videos[best].clone(), boxes })
}

/// Owns one episode: simulator state, controller state, dependencies and
/// the growing log. Drives the loop one control step at a time so hosts
/// (CLI, browser demo) can interleave rendering.
pub struct EpisodeRunner {
    cfg: RunConfig,
    task: TaskSpec,
    goal: Goal,
    state: SceneState,
    obs: Frame,
    cs: ControllerState,
    vlm: Box<dyn Vlm>,
    predictor: Box<dyn Predictor>,
    sampler_rng: ChaCha8Rng,
    sim_params: SimParams,
    log: EpisodeLog,
    end: Option<EndSignal>,
    last_winner: Option<PredictedVideo>,
    last_boxes: Option<SceneUnderstanding>,
    collect_videos: bool,
    winner_videos: Vec<PredictedVideo>,
}

impl EpisodeRunner {
    /// Builds an episode with dependencies selected by the config.
    pub fn new(task: TaskSpec, cfg: RunConfig) -> Result<Self, RunError> {
        let vlm: Box<dyn Vlm> = match cfg.vlm_kind {
            VlmKind::Oracle => Box::new(OracleVlm::new(
                cfg.deadband,
                cfg.grasp_radius,
                cfg.press_radius,
            )),
            VlmKind::Remote => Self::remote_vlm(&cfg)?,
        };
        let predictor: Box<dyn Predictor> = match cfg.predictor_kind {
            PredictorKind::Oracle => Box::new(OraclePredictor),
            PredictorKind::Warp => Box::new(SpriteWarpPredictor::new(cfg.grasp_radius)),
            PredictorKind::Noisy => Box::new(NoisyOraclePredictor::new(
                cfg.noise_std,
                RngHub::new(cfg.seed).predictor_noise_seed(),
            )),
        };
        Self::with_deps(task, cfg, vlm, predictor)
    }

    #[cfg(feature = "remote-http")]
    fn remote_vlm(cfg: &RunConfig) -> Result<Box<dyn Vlm>, RunError> {
        use crate::vlm::remote::{http::HttpTransport, PromptSet, RemoteVlm};
        let transport =
            HttpTransport::from_env().map_err(|e| RunError::RemoteConfig(e.to_string()))?;
        let prompts = match std::env::var("VLM_PROMPT_DIR") {
            Ok(dir) => PromptSet::from_dir(&dir)
                .map_err(|e| RunError::RemoteConfig(format!("prompt dir {dir}: {e}")))?,
            Err(_) => PromptSet::default(),
        };
        let model = std::env::var("VLM_MODEL").unwrap_or_else(|_| "gpt-4o".to_string());
        Ok(Box::new(RemoteVlm::new(transport, prompts, model, cfg.vlm_retries)))
    }

    #[cfg(not(feature = "remote-http"))]
    fn remote_vlm(_cfg: &RunConfig) -> Result<Box<dyn Vlm>, RunError> {
        Err(RunError::RemoteUnavailable)
    }

    /// Builds an episode around caller-provided dependencies (stubs in
    /// tests, pre-configured clients elsewhere).
    pub fn with_deps(
        task: TaskSpec,
        cfg: RunConfig,
        vlm: Box<dyn Vlm>,
        predictor: Box<dyn Predictor>,
    ) -> Result<Self, RunError> {
        let hub = RngHub::new(cfg.seed);
        let reset = sim::reset(&task, cfg.seed, cfg.frame_size)?;
        let cs = ControllerState::init(&reset.observation);
        Ok(Self {
            sim_params: SimParams {
                grasp_radius: cfg.grasp_radius,
                press_radius: cfg.press_radius,
            },
            sampler_rng: hub.sampler(),
            goal: reset.goal,
            obs: reset.observation,
            state: reset.state,
            cs,
            vlm,
            predictor,
            cfg,
            task,
            log: EpisodeLog::new(),
            end: None,
            last_winner: None,
            last_boxes: None,
            collect_videos: false,
            winner_videos: Vec::new(),
        })
    }

    /// Keep every step's winning predicted video (for frame dumps).
    pub fn collect_winner_videos(&mut self, on: bool) {
        self.collect_videos = on;
    }

    fn finish(&mut self, end: EndSignal) -> EndSignal {
        self.end = Some(end.clone());
        self.log.set_end(end.clone());
        end
    }

    /// Runs one control step and one world step. Returns the end signal
    /// once the episode is over, `None` while it keeps going.
    pub fn step_once(&mut self) -> Result<Option<EndSignal>, RunError> {
        if let Some(end) = &self.end {
            return Ok(Some(end.clone()));
        }
        if self.task.success(&self.state) {
            return Ok(Some(self.finish(EndSignal::Success)));
        }
        if self.cs.t >= self.cfg.t_max as u64 {
            return Ok(Some(self.finish(EndSignal::BudgetExhausted)));
        }

        self.vlm.sync_ground_truth(&self.state, &self.task);
        let aux = Some(SimSnapshot { state: self.state.clone(), params: self.sim_params });
        let mut deps = StepDeps {
            vlm: self.vlm.as_mut(),
            predictor: self.predictor.as_ref(),
            sampler_rng: &mut self.sampler_rng,
        };
        let outcome = control_step(&self.cs, &self.obs, &self.goal, aux, &self.cfg, &mut deps)?;

        self.state = sim::step(&self.state, &outcome.action, &self.sim_params);
        self.obs = sim::render(&self.state, self.cfg.frame_size, self.cfg.frame_size);
        self.log.append_step(outcome.record)?;
        self.cs = outcome.next;
        self.last_boxes = outcome.boxes;
        if self.collect_videos {
            self.winner_videos.push(outcome.winner_video.clone());
        }
        self.last_winner = Some(outcome.winner_video);

        if self.task.violated(&self.state) {
            return Ok(Some(self.finish(EndSignal::Error("obstacle contact".into()))));
        }
        if self.task.success(&self.state) {
            return Ok(Some(self.finish(EndSignal::Success)));
        }
        Ok(None)
    }

    /// Drives the loop to termination. Dependency failures become an
    /// error terminal record instead of aborting the caller.
    pub fn run_to_end(&mut self) -> EndSignal {
        loop {
            match self.step_once() {
                Ok(Some(end)) => return end,
                Ok(None) => {}
                Err(e) => return self.finish(EndSignal::Error(e.to_string())),
            }
        }
    }

    pub fn observation(&self) -> &Frame {
        &self.obs
    }

    pub fn goal(&self) -> &Goal {
        &self.goal
    }

    pub fn scene_state(&self) -> &SceneState {
        &self.state
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn log(&self) -> &EpisodeLog {
        &self.log
    }

    pub fn end(&self) -> Option<&EndSignal> {
        self.end.as_ref()
    }

    pub fn reward(&self) -> f64 {
        self.task.reward(&self.state)
    }

    pub fn steps_taken(&self) -> u64 {
        self.cs.t
    }

    pub fn last_winner_video(&self) -> Option<&PredictedVideo> {
        self.last_winner.as_ref()
    }

    pub fn last_boxes(&self) -> Option<&SceneUnderstanding> {
        self.last_boxes.as_ref()
    }

    pub fn winner_videos(&self) -> &[PredictedVideo] {
        &self.winner_videos
    }

    pub fn into_log(self) -> EpisodeLog {
        self.log
    }
}

/// Convenience wrapper: reset, loop to termination, return the log.
pub fn run_episode(task: &TaskSpec, cfg: &RunConfig) -> Result<EpisodeLog, RunError> {
    let mut runner = EpisodeRunner::new(task.clone(), cfg.clone())?;
    runner.run_to_end();
    Ok(runner.into_log())
}
