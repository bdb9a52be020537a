//! Step-by-step episode trace: prints the end-effector pose, the active
//! sub-goal, distances and the switch weight each control step.
//!
//! Usage: cargo run --example trace -- [task] [ablation] [seed]

use lookahead_core::config::RunConfig;
use lookahead_core::controller::EpisodeRunner;
use lookahead_core::sim::TaskSpec;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let task_name = args.get(1).map(String::as_str).unwrap_or("push_button");
    let ablation = args.get(2).map(String::as_str).unwrap_or("full");
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);

    let mut cfg = RunConfig::default();
    cfg.task_name = task_name.to_string();
    cfg.seed = seed;
    cfg.apply_override("ablation", ablation).expect("valid ablation");
    let task = TaskSpec::by_name(task_name).expect("built-in task");

    let mut runner = EpisodeRunner::new(task.clone(), cfg).expect("episode");
    println!("task={task_name} ablation={ablation} seed={seed}");
    loop {
        let state = runner.scene_state().clone();
        let active = task.active_subgoal(&state);
        let target = active.as_ref().and_then(|n| state.object(n)).map(|o| o.pose);
        let dist = target.map(|t| t.dist(state.ee_pose)).unwrap_or(f64::NAN);
        let step = runner.steps_taken();
        let outcome = runner.step_once().expect("step");
        let (w_d, chosen) = runner
            .log()
            .steps
            .last()
            .map(|r| (r.w_d, r.chosen as i64))
            .unwrap_or((f64::NAN, -1));
        println!(
            "t={step:3} ee=({:.3},{:.3}) held={:<8} active={:<8} dist={dist:.3} w_D={w_d} cand={chosen} reward={:.1}",
            state.ee_pose.x,
            state.ee_pose.y,
            state.held.as_deref().unwrap_or("-"),
            active.as_deref().unwrap_or("-"),
            runner.reward(),
        );
        if let Some(end) = outcome {
            println!("end: {end:?} steps={} reward={:.1}", runner.log().len(), runner.reward());
            break;
        }
    }
}
