//! Episode orchestration: environment, observation pipeline and agent under
//! a two-phase curriculum, with periodic evaluation.

mod curriculum;
mod eval;

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use curriculum::{curriculum_update, phase_mask_override, CurriculumConfig, CurriculumTrigger, Phase};
pub use eval::{evaluate, Evaluation, MaskHistogram, TraceStep};

use crate::agent::{Agent, AgentConfig, CombineMode, QNetwork, ReplayBuffer, Transition};
use crate::env::{EnvConfig, Pong};
use crate::error::{Error, Result};
use crate::observe::{apply_mask, preprocess, MaskFamily, MaskId, ObsStack};
use crate::toolkit::CheckpointBlob;

/// Seed streams for [`derive_seed`].
pub const INIT_STREAM: u64 = 1;
pub const ENV_STREAM: u64 = 2;
pub const ACT_STREAM: u64 = 3;
pub const EVAL_ENV_STREAM: u64 = 4;
pub const EVAL_ACT_STREAM: u64 = 5;

/// Independent 64-bit seed for `(stream, index)` under a run seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_episodes: u64,
    pub mask_family: MaskFamily,
    pub combine_mode: CombineMode,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub eval_epsilon: f64,
    pub seed: u64,
    pub checkpoint_every: u64,
    /// Record real elapsed time in the metrics; off keeps logs reproducible.
    pub wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_episodes: 1000,
            mask_family: MaskFamily::Vertical,
            combine_mode: CombineMode::FlattenSum,
            eval_every: 25,
            eval_episodes: 10,
            eval_epsilon: 0.05,
            seed: 0,
            checkpoint_every: 100,
            wall_clock: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("train.total_episodes", self.total_episodes),
            ("train.eval_every", self.eval_every),
            ("train.eval_episodes", self.eval_episodes as u64),
            ("train.checkpoint_every", self.checkpoint_every),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be >= 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.eval_epsilon) {
            return Err(Error::config("train.eval_epsilon", format!("{} is outside [0, 1]", self.eval_epsilon)));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: u64,
    pub phase: Phase,
    pub episode_reward: i32,
    pub steps: u64,
    /// NaN when no learning step ran during the episode.
    pub mean_loss: f64,
    pub epsilon: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub episode: u64,
    pub phase: Phase,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone)]
pub struct EpisodeReport {
    pub row: MetricsRow,
    pub eval: Option<EvalRecord>,
    pub checkpoint_due: bool,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub metrics: Vec<MetricsRow>,
    pub evals: Vec<EvalRecord>,
}

#[derive(Debug, Clone)]
pub struct Trainer {
    env: EnvConfig,
    curriculum: CurriculumConfig,
    train: TrainConfig,
    agent: Agent,
    buffer: ReplayBuffer,
    phase: Phase,
    episode: u64,
    global_step: u64,
    eval_scores: Vec<f64>,
    clock: Instant,
}

impl Trainer {
    pub fn new(
        env: EnvConfig,
        agent: AgentConfig,
        curriculum: CurriculumConfig,
        train: TrainConfig,
    ) -> Result<Self> {
        env.validate()?;
        curriculum.validate()?;
        train.validate()?;
        let agent = Agent::new(
            QNetwork::dqn(),
            agent,
            train.combine_mode,
            derive_seed(train.seed, INIT_STREAM, 0),
        )?;
        Ok(Self {
            buffer: ReplayBuffer::new(agent.config.replay_capacity),
            phase: curriculum.initial_phase(),
            env,
            curriculum,
            train,
            agent,
            episode: 0,
            global_step: 0,
            eval_scores: Vec::new(),
            clock: Instant::now(),
        })
    }

    /// Continues a run from a checkpoint. The replay buffer and evaluation
    /// history start empty.
    pub fn resume(
        env: EnvConfig,
        agent: AgentConfig,
        curriculum: CurriculumConfig,
        mut train: TrainConfig,
        blob: CheckpointBlob,
    ) -> Result<Self> {
        train.seed = blob.seed;
        let mut t = Self::new(env, agent, curriculum, train)?;
        t.agent.online = blob.online;
        t.agent.target = blob.target;
        t.agent.adam = blob.adam;
        t.phase = blob.phase;
        t.episode = blob.episode;
        t.global_step = blob.global_step;
        Ok(t)
    }

    pub fn checkpoint(&self) -> CheckpointBlob {
        CheckpointBlob {
            seed: self.train.seed,
            phase: self.phase,
            episode: self.episode,
            global_step: self.global_step,
            online: self.agent.online.clone(),
            target: self.agent.target.clone(),
            adam: self.agent.adam.clone(),
        }
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Number of completed episodes.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.env
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train
    }

    pub fn is_finished(&self) -> bool {
        self.episode >= self.train.total_episodes
    }

    pub fn evaluate(&self, record_trace: bool) -> Result<Evaluation> {
        evaluate(&self.agent, &self.env, &self.train, self.phase, self.train.seed, record_trace)
    }

    pub fn run_episode(&mut self) -> Result<EpisodeReport> {
        let episode = self.episode + 1;
        self.phase = curriculum_update(self.phase, episode, &self.eval_scores, &self.curriculum);
        let seed = self.train.seed;
        let masks = self.train.mask_family.masks();
        let (mut pong, raw) = Pong::reset(self.env.clone(), derive_seed(seed, ENV_STREAM, episode))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ACT_STREAM, episode));
        let mut obs = ObsStack::filled(preprocess(&raw), MaskId::Identity);
        let (mut reward_sum, mut steps) = (0i32, 0u64);
        let (mut loss_sum, mut losses) = (0.0f64, 0u64);
        let mut epsilon;
        loop {
            epsilon = self.agent.config.epsilon(self.global_step);
            let (action, _) = self.agent.act(&obs, epsilon, &mut rng)?;
            let step = pong.step(action.game)?;
            let mask = phase_mask_override(self.phase, masks[action.mask_index]);
            let next_obs = obs.pushed(apply_mask(&preprocess(&step.frame), mask), mask);
            self.buffer.store(&Transition {
                obs,
                action,
                reward: step.reward,
                next_obs: next_obs.clone(),
                done: step.done,
            });
            obs = next_obs;
            reward_sum += step.reward;
            steps += 1;
            self.global_step += 1;

            let cfg = &self.agent.config;
            if self.buffer.len() >= cfg.learn_start && self.global_step.is_multiple_of(cfg.learn_every) {
                loss_sum += f64::from(self.agent.learn_step(&self.buffer, &mut rng)?);
                losses += 1;
            }
            if self.global_step.is_multiple_of(self.agent.config.target_sync) {
                self.agent.sync_target();
            }
            if step.done {
                break;
            }
        }
        self.episode = episode;

        let row = MetricsRow {
            episode,
            phase: self.phase,
            episode_reward: reward_sum,
            steps,
            mean_loss: if losses == 0 { f64::NAN } else { loss_sum / losses as f64 },
            epsilon,
            wall_seconds: if self.train.wall_clock {
                self.clock.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        let eval = if episode.is_multiple_of(self.train.eval_every) {
            let evaluation = self.evaluate(false)?;
            self.eval_scores.extend(evaluation.scores.iter().map(|&s| f64::from(s)));
            Some(EvalRecord {
                episode,
                phase: self.phase,
                evaluation,
            })
        } else {
            None
        };
        Ok(EpisodeReport {
            row,
            eval,
            checkpoint_due: episode.is_multiple_of(self.train.checkpoint_every) || self.is_finished(),
        })
    }
}

/// Runs the remaining episodes of `trainer`, calling `on_checkpoint` on the
/// checkpoint cadence and after the final episode.
pub fn run_training<F>(trainer: &mut Trainer, mut on_checkpoint: F) -> Result<TrainLog>
where
    F: FnMut(&Trainer) -> Result<()>,
{
    let mut log = TrainLog::default();
    while !trainer.is_finished() {
        let report = trainer.run_episode()?;
        log.metrics.push(report.row);
        log.evals.extend(report.eval);
        if report.checkpoint_due {
            on_checkpoint(trainer)?;
        }
    }
    Ok(log)
}
