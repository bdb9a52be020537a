//! `lookahead` — episode runner, benchmark harness, and dataset recorder
//! for the sampling-based visual MPC engine.

mod bench;
mod record;
mod run;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lookahead_core::config::{load_config, RunConfig};
use lookahead_core::sim::TaskSpec;

#[derive(Parser)]
#[command(name = "lookahead", version, about = "Sampling-based visual MPC on a 2D tabletop")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode; writes its log (and optional frame dumps)
    Run(run::RunArgs),
    /// Run a seeded benchmark sweep; writes metrics and per-episode CSVs
    Bench(bench::BenchArgs),
    /// Record per-step (frame, action) datasets under a policy
    Record(record::RecordArgs),
}

/// Flags shared by every subcommand that builds a run configuration.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat `key = value` config file; built-in defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Predictor backend: oracle | warp | noisy
    #[arg(long)]
    predictor: Option<String>,
    /// VLM backend: oracle | remote
    #[arg(long)]
    vlm: Option<String>,
    /// Extra `key=value` config overrides (file-format keys), repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.predictor {
            cfg.apply_override("predictor", p)?;
        }
        if let Some(v) = &self.vlm {
            cfg.apply_override("vlm", v)?;
        }
        for pair in &self.set {
            let (key, value) = pair
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got `{pair}`"))?;
            cfg.apply_override(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Resolves a task: a built-in name, or a path to a task file.
fn resolve_task(name: &str) -> Result<TaskSpec> {
    if name.contains('/') || name.ends_with(".txt") {
        return Ok(TaskSpec::from_file(name)?);
    }
    match TaskSpec::by_name(name) {
        Ok(task) => Ok(task),
        Err(_) => bail!("unknown task `{name}` (built-ins: push_button, move_to_area, pick_place, wipe; or a task file path)"),
    }
}

/// `{out}/{YYYYmmdd-HHMMSS}_{label}` — every artifact of one invocation
/// lands under a single stamped directory.
fn stamped_dir(out: &PathBuf, label: &str) -> Result<PathBuf> {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let dir = out.join(format!("{stamp}_{label}"));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating run directory {}", dir.display()))?;
    Ok(dir)
}

fn save_frame_png(frame: &lookahead_core::types::Frame, path: &std::path::Path) -> Result<()> {
    image::save_buffer(
        path,
        &frame.pixels,
        frame.width,
        frame.height,
        image::ExtendedColorType::Rgb8,
    )
    .with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run::cmd_run(args),
        Command::Bench(args) => bench::cmd_bench(args),
        Command::Record(args) => record::cmd_record(args),
    }
}
