use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eicsim_core::pipeline::{main_scene, run_loop, write_scene, RunConfig, Task};
use eicsim_core::predict::PredictorTier;
use eicsim_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "eicsim",
    version,
    about = "Environment-aware wireless link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene and write it as JSON.
    GenScene(Common),
    /// Task 1: path-loss coverage maps.
    Coverage(Common),
    /// Task 2: path-loss and pilot-based channel prediction.
    PredictCsi(Common),
    /// Task 3: beam selection.
    Beam(Common),
    /// Task 4: max-min resource-block allocation.
    Allocate(Common),
    /// Every task, or the subset given by --tasks.
    RunAll(Common),
}

#[derive(Args)]
struct Common {
    /// Scene JSON to load instead of generating one.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receiver grid spacing in meters.
    #[arg(long, default_value_t = 2.0)]
    grid_gap: f64,
    /// Predictor tier for predicted-CSI decisions: stat, simple or wei.
    #[arg(long, default_value = "wei")]
    tier: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated task ids or names (run-all only).
    #[arg(long)]
    tasks: Option<String>,
    #[arg(long, default_value_t = 1e7)]
    exact_alloc_limit: f64,
}

impl Common {
    fn config(&self, tasks: Vec<Task>) -> Result<RunConfig> {
        let mut config = RunConfig {
            seed: self.seed,
            tasks,
            tier: PredictorTier::parse(&self.tier)?,
            scene_path: self.scene.clone(),
            out_dir: self.out.clone(),
            exact_alloc_limit: self.exact_alloc_limit,
            ..RunConfig::default()
        };
        if self.grid_gap.is_nan() || self.grid_gap <= 0.0 {
            return Err(Error::invalid("--grid-gap must be positive"));
        }
        config.scene.rx_gap = self.grid_gap;
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<()> {
    let (common, tasks) = match &cli.command {
        Command::GenScene(c) => (c, vec![]),
        Command::Coverage(c) => (c, vec![Task::Coverage]),
        Command::PredictCsi(c) => (c, vec![Task::PredictCsi]),
        Command::Beam(c) => (c, vec![Task::Beam]),
        Command::Allocate(c) => (c, vec![Task::Allocate]),
        Command::RunAll(c) => {
            let tasks = match &c.tasks {
                Some(t) => Task::parse_list(t)?,
                None => Task::ALL.to_vec(),
            };
            (c, tasks)
        }
    };
    if let Command::GenScene(c) = &cli.command {
        let config = c.config(vec![])?;
        let scene = main_scene(&config).map_err(|e| e.in_stage("sensing"))?;
        let path = if c.out.extension().is_some_and(|e| e == "json") {
            c.out.clone()
        } else {
            std::fs::create_dir_all(&c.out)?;
            c.out.join("scene.json")
        };
        write_scene(&config, &scene, &path).map_err(|e| e.in_stage("output"))?;
        println!("{}", path.display());
        return Ok(());
    }
    let config = common.config(tasks)?;
    let report = run_loop(&config)?;
    for record in &report.records {
        for (k, v) in &record.metrics {
            println!("{}\t{k}\t{v}", record.task.name());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
