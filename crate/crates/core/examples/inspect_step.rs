//! Dissects one control step: for every candidate, prints its net motion,
//! box-cost breakdown (attraction/repulsion sums over tracked frames) and
//! totals, to debug cost-shaping issues.
//!
//! Usage: cargo run --example inspect_step -- [task] [seed] [steps_before]

use lookahead_core::config::RunConfig;
use lookahead_core::controller::EpisodeRunner;
use lookahead_core::cost;
use lookahead_core::predictor::{OraclePredictor, PredictionContext, Predictor, SimSnapshot};
use lookahead_core::rng::RngHub;
use lookahead_core::sampler;
use lookahead_core::sim::{self, TaskSpec};
use lookahead_core::tracker::{track, TrackerParams};
use lookahead_core::types::Action;
use lookahead_core::vlm::{OracleVlm, Vlm};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let task_name = args.get(1).map(String::as_str).unwrap_or("wipe");
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let warmup: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10);

    let mut cfg = RunConfig::default();
    cfg.task_name = task_name.to_string();
    cfg.seed = seed;
    let task = TaskSpec::by_name(task_name).expect("task");

    // march the real episode forward to the step of interest
    let mut runner = EpisodeRunner::new(task.clone(), cfg.clone()).expect("episode");
    for _ in 0..warmup {
        if runner.step_once().expect("step").is_some() {
            break;
        }
    }
    let state = runner.scene_state().clone();
    let obs = runner.observation().clone();
    let goal = runner.goal().clone();
    println!(
        "state after {warmup} steps: ee=({:.3},{:.3}) held={:?}",
        state.ee_pose.x, state.ee_pose.y, state.held
    );

    let mut vlm = OracleVlm::new(cfg.deadband, cfg.grasp_radius, cfg.press_radius);
    vlm.sync_ground_truth(&state, &task);
    let hint = vlm.query_direction(&obs, &goal).value;
    let boxes = vlm.query_boxes(&obs, &goal).value;
    println!(
        "hint dx={:?} dy={:?} g={} | e=({:.1},{:.1}) s=({:.1},{:.1}) I={:?}",
        hint.dx,
        hint.dy,
        hint.g,
        boxes.e.cx,
        boxes.e.cy,
        boxes.s.cx,
        boxes.s.cy,
        boxes.interference.iter().map(|b| (b.cx, b.cy)).collect::<Vec<_>>()
    );

    let mu_vlm = sampler::hint_to_mean(&hint, cfg.w_m, cfg.w_r);
    let mean = sampler::blend_means(
        &mu_vlm,
        &sampler::SamplingMean::zero(sampler::MeanSource::Sub),
        cfg.w_vlm,
        cfg.w_sub,
    )
    .unwrap();
    let mut rng = RngHub::new(seed).sampler();
    let candidates = sampler::sample_candidates(
        &mean,
        cfg.n_candidates,
        cfg.horizon,
        &cfg.sigma,
        &cfg.bounds(),
        &mut rng,
    );

    let ctx = PredictionContext {
        prev: obs.clone(),
        curr: obs.clone(),
        a_prev: Action::ZERO,
        a_curr: Action::ZERO,
        aux: Some(SimSnapshot { state: state.clone(), params: Default::default() }),
        init_boxes: Some(boxes.clone()),
    };
    let videos = OraclePredictor.predict_batch(&ctx, &candidates).expect("predict");
    let params = TrackerParams {
        search_radius: cfg.search_radius as i32,
        min_correlation: cfg.min_correlation,
    };

    let mut v_totals = Vec::new();
    for (i, video) in videos.iter().enumerate() {
        let tracked = track(video, &boxes, &obs, &params);
        let per: Vec<_> = tracked.iter().map(|tf| tf.boxes.clone()).collect();
        let trace = cost::vlm_cost(&per);
        let net: (f64, f64) = candidates[i]
            .actions
            .iter()
            .fold((0.0, 0.0), |acc, a| (acc.0 + a.dx, acc.1 + a.dy));
        let attract: f64 = per
            .iter()
            .map(|su| {
                let (ex, ey) = su.e.center();
                let (sx, sy) = su.s.center();
                ((ex - sx).powi(2) + (ey - sy).powi(2)).sqrt()
            })
            .sum();
        let last = per.last().unwrap();
        let coasted = tracked.iter().filter(|tf| tf.low_confidence).count();
        println!(
            "cand {i:2} net=({:+.3},{:+.3}) c_vlm={:8.2} attract={attract:8.2} e_end=({:5.1},{:5.1}) s_end=({:5.1},{:5.1}) coasted={coasted}",
            net.0,
            net.1,
            trace.total,
            last.e.cx,
            last.e.cy,
            last.s.cx,
            last.s.cy,
        );
        v_totals.push(trace.total);
    }
    let reports = cost::combine(&vec![0.0; v_totals.len()], &v_totals, lookahead_core::vlm::SwitchWeight::VlmOnly).unwrap();
    let best = cost::select_best(&reports).unwrap();
    println!("selected candidate {best}");
}
