use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use opdq::env::policies::{random_mean_score, tracker_mean_score};
use opdq::toolkit::{
    agent_from_checkpoint, gradcheck_suite, load_checkpoint, render_sequence, train_to_dir, write_histogram,
    RenderOptions, RunConfig, GRADCHECK_TOLERANCE,
};
use opdq::trainer::{evaluate, Phase, TrainConfig};

#[derive(Parser)]
#[command(name = "opdq", version, about = "Occluded-Pong deep Q-learning testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    FullyObservable,
    Occluded,
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::FullyObservable => Phase::FullyObservable,
            PhaseArg::Occluded => Phase::Occluded,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `train.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint and write its mask histogram.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run config supplying the environment and mask family.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "histogram.csv")]
        histogram: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Defaults to the checkpoint's phase.
        #[arg(long, value_enum)]
        phase: Option<PhaseArg>,
    },
    /// Write the agent's view of a greedy episode as PGM frames.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 4)]
        stride: usize,
        /// Decisions up to the agent's first point; 0 renders the whole episode.
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "frames")]
        out: PathBuf,
        #[arg(long, value_enum)]
        phase: Option<PhaseArg>,
    },
    /// Finite-difference verification of the network gradients.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Mean score of the scripted tracker paddle.
    Sanity {
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Mean score of a uniformly random policy.
    Baseline {
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            resume,
        } => {
            let mut cfg = load_config(Some(&config))?;
            if let Some(seed) = seed {
                cfg.train.seed = seed;
            }
            let resume = resume.map(|p| load_checkpoint(&p)).transpose()?;
            let outputs = train_to_dir(&cfg, &out, resume)?;
            let rewards: Vec<i32> = outputs.log.metrics.iter().map(|r| r.episode_reward).collect();
            println!("episodes: {}", rewards.len());
            if let Some(last) = outputs.log.evals.last() {
                println!(
                    "last eval (episode {}): mean score {:.2}",
                    last.episode,
                    last.evaluation.mean_score()
                );
            }
            println!("metrics: {}", outputs.metrics.display());
            if let Some(ckpt) = outputs.checkpoints.last() {
                println!("checkpoint: {}", ckpt.display());
            }
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
            config,
            histogram,
            epsilon,
            phase,
        } => {
            if episodes == 0 {
                bail!("--episodes must be >= 1");
            }
            let cfg = load_config(config.as_ref())?;
            let blob = load_checkpoint(&checkpoint)?;
            let agent = agent_from_checkpoint(&blob, cfg.train.combine_mode)?;
            let train = TrainConfig {
                eval_episodes: episodes,
                eval_epsilon: epsilon.unwrap_or(cfg.train.eval_epsilon),
                ..cfg.train.clone()
            };
            train.validate()?;
            let phase = phase.map_or(blob.phase, Phase::from);
            let result = evaluate(&agent, &cfg.env, &train, phase, seed, false)?;
            write_histogram(&histogram, &result.histogram)?;
            println!("mean score: {:.2}", result.mean_score());
            println!("histogram: {}", histogram.display());
        }
        Command::Render {
            checkpoint,
            stride,
            window,
            seed,
            config,
            out,
            phase,
        } => {
            let cfg = load_config(config.as_ref())?;
            let blob = load_checkpoint(&checkpoint)?;
            let opts = RenderOptions {
                env_seed: seed,
                stride,
                window: (window > 0).then_some(window),
                phase: phase.map(Phase::from),
            };
            let files = render_sequence(&blob, &cfg.env, &cfg.train, &opts, &out)?;
            println!("wrote {} frames to {}", files.len(), out.display());
        }
        Command::Gradcheck { seeds } => {
            if seeds < 10 {
                bail!("--seeds must be >= 10");
            }
            let report = gradcheck_suite(0..seeds)?;
            println!("checks: {}", report.entries.len());
            println!("max relative error: {:.3e}", report.worst());
            if !report.passed() {
                bail!("gradient check exceeded tolerance {GRADCHECK_TOLERANCE:e}");
            }
        }
        Command::Sanity { episodes, seed, config } => {
            let cfg = load_config(config.as_ref())?;
            println!("mean score: {:.2}", tracker_mean_score(&cfg.env, seed, episodes)?);
        }
        Command::Baseline { episodes, seed, config } => {
            let cfg = load_config(config.as_ref())?;
            println!("mean score: {:.2}", random_mean_score(&cfg.env, seed, episodes)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
