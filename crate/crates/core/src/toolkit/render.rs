use std::path::{Path, PathBuf};

use super::checkpoint::CheckpointBlob;
use super::pgm::write_pgm;
use crate::agent::{Agent, AgentConfig, CombineMode, QNetwork};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::trainer::{evaluate, Phase, TraceStep, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub env_seed: u64,
    pub stride: usize,
    /// Decisions leading up to and including the agent's first point; the
    /// whole episode when `None`.
    pub window: Option<usize>,
    /// Defaults to the checkpoint's phase.
    pub phase: Option<Phase>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            env_seed: 0,
            stride: 4,
            window: Some(100),
            phase: None,
        }
    }
}

/// Rebuilds an acting agent from checkpointed weights.
pub fn agent_from_checkpoint(blob: &CheckpointBlob, mode: CombineMode) -> Result<Agent> {
    let mut agent = Agent::new(QNetwork::dqn(), AgentConfig::default(), mode, 0)?;
    agent.online = blob.online.clone();
    agent.target = blob.target.clone();
    agent.adam = blob.adam.clone();
    Ok(agent)
}

/// Trace indices to emit. The window ends at the agent's first point, or at
/// the last decision when the agent never scores.
pub fn select_frames(trace: &[TraceStep], stride: usize, window: Option<usize>) -> Vec<usize> {
    if trace.is_empty() {
        return Vec::new();
    }
    let (start, end) = match window {
        None => (0, trace.len() - 1),
        Some(w) => {
            let end = trace.iter().position(|t| t.reward > 0).unwrap_or(trace.len() - 1);
            ((end + 1).saturating_sub(w), end)
        }
    };
    (start..=end).step_by(stride.max(1)).collect()
}

/// Replays one greedy episode and writes the selected observation frames as
/// `frame_0000.pgm`, `frame_0001.pgm`, ... into `out_dir`.
pub fn render_sequence(
    blob: &CheckpointBlob,
    env: &EnvConfig,
    train: &TrainConfig,
    opts: &RenderOptions,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if opts.stride == 0 {
        return Err(Error::Usage("stride must be >= 1".into()));
    }
    let agent = agent_from_checkpoint(blob, train.combine_mode)?;
    let replay = TrainConfig {
        eval_episodes: 1,
        eval_epsilon: 0.0,
        ..train.clone()
    };
    let phase = opts.phase.unwrap_or(blob.phase);
    let trace = evaluate(&agent, env, &replay, phase, opts.env_seed, true)?
        .trace
        .expect("trace requested");
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (n, i) in select_frames(&trace, opts.stride, opts.window).into_iter().enumerate() {
        let path = out_dir.join(format!("frame_{n:04}.pgm"));
        write_pgm(&path, &trace[i].frame)?;
        written.push(path);
    }
    Ok(written)
}
