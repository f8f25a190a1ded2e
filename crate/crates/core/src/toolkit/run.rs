use std::path::{Path, PathBuf};

use super::checkpoint::{save_checkpoint, CheckpointBlob};
use super::config::RunConfig;
use super::csv::{write_evals, write_histogram, write_metrics, write_text};
use crate::error::{Error, Result};
use crate::trainer::{run_training, TrainLog, Trainer};

/// Files produced by [`train_to_dir`].
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub log: TrainLog,
    pub metrics: PathBuf,
    pub evals: PathBuf,
    /// Mask histogram of the last evaluation, if any ran.
    pub histogram: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
}

pub fn checkpoint_name(episode: u64) -> String {
    format!("episode_{episode:05}.opdq")
}

/// Trains (or resumes) a run and writes `config.txt`, `metrics.csv`,
/// `evals.csv`, `histogram.csv` and `checkpoints/` under `out`.
pub fn train_to_dir(config: &RunConfig, out: &Path, resume: Option<CheckpointBlob>) -> Result<RunOutputs> {
    let ckpt_dir = out.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    write_text(&out.join("config.txt"), &config.to_canonical_string())?;

    let c = config.clone();
    let mut trainer = match resume {
        Some(blob) => Trainer::resume(c.env, c.agent, c.curriculum, c.train, blob)?,
        None => Trainer::new(c.env, c.agent, c.curriculum, c.train)?,
    };
    let mut checkpoints = Vec::new();
    let log = run_training(&mut trainer, |t| {
        let path = ckpt_dir.join(checkpoint_name(t.episode()));
        save_checkpoint(&path, &t.checkpoint())?;
        checkpoints.push(path);
        Ok(())
    })?;

    let metrics = out.join("metrics.csv");
    write_metrics(&metrics, &log.metrics)?;
    let evals = out.join("evals.csv");
    write_evals(&evals, &log.evals)?;
    let histogram = match log.evals.last() {
        Some(last) => {
            let path = out.join("histogram.csv");
            write_histogram(&path, &last.evaluation.histogram)?;
            Some(path)
        }
        None => None,
    };
    Ok(RunOutputs {
        log,
        metrics,
        evals,
        histogram,
        checkpoints,
    })
}
