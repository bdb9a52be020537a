//! Seeded benchmark sweeps over tasks and ablation variants.
//!
//! Determinism comes from an explicit seed list (resumable and diffable),
//! not from episode indices. Episodes run in parallel; aggregation is
//! order-independent and per-episode failures never abort the sweep.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use lookahead_core::config::RunConfig;
use lookahead_core::controller::EpisodeRunner;
use lookahead_core::log::EndSignal;
use rayon::prelude::*;
use serde::Serialize;

use crate::{resolve_task, stamped_dir, ConfigArgs};

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated tasks (default: the four built-ins)
    #[arg(long)]
    tasks: Option<String>,
    /// Episodes per (task, variant); ignored when --seeds is given
    #[arg(long, default_value_t = 30)]
    episodes: usize,
    /// Explicit comma-separated seed list
    #[arg(long)]
    seeds: Option<String>,
    /// First seed when deriving a list from --episodes
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Comma-separated ablation variants from full|rs|pd|vs (default: full)
    #[arg(long)]
    ablations: Option<String>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct EpisodeRow {
    task: String,
    variant: String,
    seed: u64,
    end: String,
    success: bool,
    steps: usize,
    duration_ms: u64,
    reward: f64,
}

#[derive(Debug, Serialize)]
struct MetricsRow {
    task: String,
    variant: String,
    success_rate: f64,
    mean_steps: f64,
    mean_duration: f64,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()
}

/// One benchmark episode; failures to even start are data, not errors.
fn run_one(base: &RunConfig, task_name: &str, variant: &str, seed: u64) -> EpisodeRow {
    let mut row = EpisodeRow {
        task: task_name.to_string(),
        variant: variant.to_string(),
        seed,
        end: String::new(),
        success: false,
        steps: 0,
        duration_ms: 0,
        reward: 0.0,
    };
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.task_name = task_name.to_string();
    if let Err(e) = cfg.apply_override("ablation", variant) {
        row.end = format!("error: {e}");
        return row;
    }
    let task = match resolve_task(task_name) {
        Ok(t) => t,
        Err(e) => {
            row.end = format!("error: {e}");
            return row;
        }
    };
    let mut runner = match EpisodeRunner::new(task, cfg) {
        Ok(r) => r,
        Err(e) => {
            row.end = format!("error: {e}");
            return row;
        }
    };
    let end = runner.run_to_end();
    row.end = match &end {
        EndSignal::Success => "success".into(),
        EndSignal::BudgetExhausted => "budget_exhausted".into(),
        EndSignal::Error(e) => format!("error: {e}"),
    };
    row.success = end == EndSignal::Success;
    row.steps = runner.log().len();
    row.duration_ms = runner.log().total_duration_ms();
    row.reward = runner.reward();
    row
}

pub fn seeds_from_args(seeds: &Option<String>, episodes: usize, base: u64) -> Result<Vec<u64>> {
    match seeds {
        Some(list) => split_list(list)
            .iter()
            .map(|s| s.parse::<u64>().with_context(|| format!("bad seed `{s}`")))
            .collect(),
        None => Ok((0..episodes as u64).map(|i| base + i).collect()),
    }
}

pub fn cmd_bench(args: BenchArgs) -> Result<()> {
    let base = args.config.resolve()?;
    let tasks = args
        .tasks
        .as_deref()
        .map(split_list)
        .unwrap_or_else(|| {
            ["push_button", "move_to_area", "pick_place", "wipe"]
                .iter()
                .map(|s| s.to_string())
                .collect()
        });
    let variants = args.ablations.as_deref().map(split_list).unwrap_or_else(|| vec!["full".into()]);
    let seeds = seeds_from_args(&args.seeds, args.episodes, args.seed_base)?;

    let dir = stamped_dir(&args.out, &format!("bench_seed{}", seeds.first().copied().unwrap_or(0)))?;
    std::fs::write(dir.join("config.txt"), base.to_config_text())?;
    std::fs::write(
        dir.join("seeds.txt"),
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join("\n") + "\n",
    )?;

    let mut jobs: Vec<(String, String, u64)> = Vec::new();
    for task in &tasks {
        for variant in &variants {
            for seed in &seeds {
                jobs.push((task.clone(), variant.clone(), *seed));
            }
        }
    }

    let rows: Vec<EpisodeRow> = jobs
        .par_iter()
        .map(|(task, variant, seed)| run_one(&base, task, variant, *seed))
        .collect();

    let mut episodes_csv = csv::Writer::from_path(dir.join("episodes.csv"))?;
    for row in &rows {
        episodes_csv.serialize(row)?;
    }
    episodes_csv.flush()?;

    let mut metrics_csv = csv::Writer::from_path(dir.join("metrics.csv"))?;
    println!("task,variant,success_rate,mean_steps,mean_duration");
    for task in &tasks {
        for variant in &variants {
            let group: Vec<&EpisodeRow> =
                rows.iter().filter(|r| &r.task == task && &r.variant == variant).collect();
            let n = group.len().max(1) as f64;
            let metrics = MetricsRow {
                task: task.clone(),
                variant: variant.clone(),
                success_rate: group.iter().filter(|r| r.success).count() as f64 / n,
                mean_steps: group.iter().map(|r| r.steps as f64).sum::<f64>() / n,
                mean_duration: group.iter().map(|r| r.duration_ms as f64).sum::<f64>() / n,
            };
            println!(
                "{},{},{:.3},{:.2},{:.1}",
                metrics.task,
                metrics.variant,
                metrics.success_rate,
                metrics.mean_steps,
                metrics.mean_duration
            );
            metrics_csv.serialize(&metrics)?;
        }
    }
    metrics_csv.flush()?;
    println!("metrics written to {}", dir.join("metrics.csv").display());
    Ok(())
}
