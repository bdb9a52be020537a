//! Single-episode runs.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use lookahead_core::controller::EpisodeRunner;
use lookahead_core::log::EndSignal;

use crate::{resolve_task, save_frame_png, stamped_dir, ConfigArgs};

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Built-in task name or task file path
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ablation variant: full | rs | pd | vs
    #[arg(long)]
    ablation: Option<String>,
    /// Dump each step's winning predicted video as PNG frames
    #[arg(long)]
    dump_frames: bool,
    /// Output root; artifacts land in a stamped subdirectory
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

pub fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = args.config.resolve()?;
    if let Some(task) = &args.task {
        cfg.task_name = task.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(ablation) = &args.ablation {
        cfg.apply_override("ablation", ablation)?;
    }
    let task = resolve_task(&cfg.task_name)?;

    let dir = stamped_dir(&args.out, &format!("seed{}", cfg.seed))?;
    std::fs::write(dir.join("config.txt"), cfg.to_config_text())?;

    let mut runner = EpisodeRunner::new(task, cfg.clone())?;
    runner.collect_winner_videos(args.dump_frames);
    let end = runner.run_to_end();
    let reward = runner.reward();
    let log = runner.log().clone();

    let log_path = dir.join("episode.jsonl");
    log.save(&log_path).context("writing episode log")?;

    if args.dump_frames {
        let frames_dir = dir.join("frames");
        std::fs::create_dir_all(&frames_dir)?;
        for (t, video) in runner.winner_videos().iter().enumerate() {
            let chosen = log.steps[t].chosen;
            for (k, frame) in video.frames.iter().enumerate() {
                let name = format!("ep0_t{t}_cand{chosen}_tau{k}.png");
                save_frame_png(frame, &frames_dir.join(name))?;
            }
        }
    }

    let end_text = match &end {
        EndSignal::Success => "success".to_string(),
        EndSignal::BudgetExhausted => "budget_exhausted".to_string(),
        EndSignal::Error(e) => format!("error: {e}"),
    };
    println!(
        "task={} seed={} ablation={} end={} steps={} reward={:.1} duration_ms={} log={}",
        cfg.task_name,
        cfg.seed,
        cfg.ablation_mode,
        end_text,
        log.len(),
        reward,
        log.total_duration_ms(),
        log_path.display(),
    );
    Ok(())
}
