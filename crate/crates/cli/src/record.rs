//! Dataset recording: per-step (frame, action) pairs for training future
//! learned predictors.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use lookahead_core::controller::EpisodeRunner;
use lookahead_core::rng::RngHub;
use lookahead_core::sampler::{draw_raw, finalize_action};
use lookahead_core::sim;

use crate::{resolve_task, save_frame_png, stamped_dir, ConfigArgs};

#[derive(Args)]
pub struct RecordArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Built-in task name or task file path
    #[arg(long)]
    task: String,
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    /// `oracle` (the full decision loop with oracle deps) or `random`
    /// (zero-mean Gaussian actions)
    #[arg(long, default_value = "oracle")]
    policy: String,
    /// Seed of the first episode; episode i uses seed_base + i
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long, default_value = "datasets")]
    out: PathBuf,
}

pub fn cmd_record(args: RecordArgs) -> Result<()> {
    let mut cfg = args.config.resolve()?;
    cfg.task_name = args.task.clone();
    let task = resolve_task(&args.task)?;
    if args.policy != "oracle" && args.policy != "random" {
        bail!("unknown policy `{}` (expected oracle or random)", args.policy);
    }

    let dir = stamped_dir(&args.out, &format!("{}_{}", task.name, args.policy))?;
    std::fs::write(dir.join("config.txt"), cfg.to_config_text())?;

    for i in 0..args.episodes {
        let seed = args.seed_base + i as u64;
        let ep_dir = dir.join(format!("ep{i:03}"));
        std::fs::create_dir_all(&ep_dir)?;
        let mut actions_file = std::fs::File::create(ep_dir.join("actions.jsonl"))?;
        let mut write_pair = |t: usize,
                              frame: &lookahead_core::types::Frame,
                              action: &lookahead_core::types::Action|
         -> Result<()> {
            save_frame_png(frame, &ep_dir.join(format!("frame_{t:05}.png")))?;
            use std::io::Write;
            writeln!(actions_file, "{}", serde_json::to_string(action)?)?;
            Ok(())
        };

        match args.policy.as_str() {
            "oracle" => {
                let mut ep_cfg = cfg.clone();
                ep_cfg.seed = seed;
                let mut runner = EpisodeRunner::new(task.clone(), ep_cfg)?;
                let mut t = 0usize;
                loop {
                    let before = runner.observation().clone();
                    match runner.step_once() {
                        Ok(None) => {
                            let action = runner.log().steps.last().expect("step recorded").action;
                            write_pair(t, &before, &action)?;
                            t += 1;
                        }
                        Ok(Some(_)) => {
                            // terminal checks may end the episode after the
                            // last recorded step; the final step (if any)
                            // was already written
                            if runner.log().len() > t {
                                let action = runner.log().steps[t].action;
                                write_pair(t, &before, &action)?;
                            }
                            break;
                        }
                        Err(e) => return Err(e).context("oracle policy episode"),
                    }
                }
            }
            "random" => {
                let reset = sim::reset(&task, seed, cfg.frame_size)?;
                let params = sim::SimParams {
                    grasp_radius: cfg.grasp_radius,
                    press_radius: cfg.press_radius,
                };
                let mut rng = RngHub::new(seed).sampler();
                let mut state = reset.state;
                let mut frame = reset.observation;
                for t in 0..cfg.t_max {
                    let action = finalize_action(
                        draw_raw(&[0.0; 7], &cfg.sigma, &mut rng),
                        &cfg.bounds(),
                    );
                    write_pair(t, &frame, &action)?;
                    state = sim::step(&state, &action, &params);
                    frame = sim::render(&state, cfg.frame_size, cfg.frame_size);
                }
            }
            _ => unreachable!("policy validated above"),
        }
    }

    println!(
        "recorded {} episode(s) of {} under the {} policy at {}",
        args.episodes,
        task.name,
        args.policy,
        dir.display()
    );
    Ok(())
}
