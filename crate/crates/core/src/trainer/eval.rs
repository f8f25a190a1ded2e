use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::curriculum::{phase_mask_override, Phase};
use super::{derive_seed, TrainConfig, EVAL_ACT_STREAM, EVAL_ENV_STREAM};
use crate::agent::{Agent, CombinedAction, MASK_ACTIONS};
use crate::env::{EnvConfig, Pong};
use crate::error::Result;
use crate::observe::{apply_mask, preprocess, Frame84, MaskFamily, MaskId, ObsStack};

/// How often each mask of a family was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskHistogram {
    pub family: MaskFamily,
    /// In `family.masks()` order.
    pub counts: [u64; MASK_ACTIONS],
}

impl MaskHistogram {
    pub fn new(family: MaskFamily) -> Self {
        Self {
            family,
            counts: [0; MASK_ACTIONS],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &MaskHistogram) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
    }

    /// Most frequently chosen mask; ties go to the earlier mask.
    pub fn modal(&self) -> MaskId {
        let mut best = 0;
        for i in 1..MASK_ACTIONS {
            if self.counts[i] > self.counts[best] {
                best = i;
            }
        }
        self.family.masks()[best]
    }
}

/// One agent decision during evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub episode: usize,
    /// Newest frame of the observation the decision was made on.
    pub frame: Frame84,
    pub frame_mask: MaskId,
    pub action: CombinedAction,
    pub reward: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub scores: Vec<i32>,
    pub histogram: MaskHistogram,
    pub trace: Option<Vec<TraceStep>>,
}

impl Evaluation {
    pub fn mean_score(&self) -> f64 {
        self.scores.iter().map(|&s| s as f64).sum::<f64>() / self.scores.len().max(1) as f64
    }
}

/// Runs `train.eval_episodes` episodes with `train.eval_epsilon` exploration
/// and no learning. Episode `k` uses environment and exploration seeds
/// derived from `(seed, k)`, so repeated evaluations see the same games.
pub fn evaluate(
    agent: &Agent,
    env: &EnvConfig,
    train: &TrainConfig,
    phase: Phase,
    seed: u64,
    record_trace: bool,
) -> Result<Evaluation> {
    let masks = train.mask_family.masks();
    let mut histogram = MaskHistogram::new(train.mask_family);
    let mut scores = Vec::with_capacity(train.eval_episodes);
    let mut trace = record_trace.then(Vec::new);
    for k in 0..train.eval_episodes {
        let (mut pong, raw) = Pong::reset(env.clone(), derive_seed(seed, EVAL_ENV_STREAM, k as u64))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, EVAL_ACT_STREAM, k as u64));
        let mut obs = ObsStack::filled(preprocess(&raw), MaskId::Identity);
        loop {
            let (action, _) = agent.act(&obs, train.eval_epsilon, &mut rng)?;
            histogram.counts[action.mask_index] += 1;
            let step = pong.step(action.game)?;
            if let Some(t) = trace.as_mut() {
                t.push(TraceStep {
                    episode: k,
                    frame: obs.newest().clone(),
                    frame_mask: obs.provenance()[obs.provenance().len() - 1],
                    action,
                    reward: step.reward,
                });
            }
            if step.done {
                scores.push(step.agent_score as i32 - step.opponent_score as i32);
                break;
            }
            let mask = phase_mask_override(phase, masks[action.mask_index]);
            obs.push(apply_mask(&preprocess(&step.frame), mask), mask);
        }
    }
    Ok(Evaluation {
        scores,
        histogram,
        trace,
    })
}
