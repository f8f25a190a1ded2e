use rand::Rng;

use super::action::{select_action, CombineMode, CombinedAction, QOutput, GAME_ACTIONS, MASK_ACTIONS};
use super::network::{q_output_row, NetParams, QNetwork};
use super::replay::{Batch, ReplayBuffer};
use crate::error::{Error, Result};
use crate::nn::{huber_loss, AdamConfig, AdamState, Tensor};
use crate::observe::{ObsStack, FRAME_SIZE, STACK_DEPTH};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub target_sync: u64,
    pub learn_start: usize,
    pub learn_every: u64,
    pub replay_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 100_000,
            learning_rate: 1e-4,
            batch_size: 32,
            target_sync: 1_000,
            learn_start: 5_000,
            learn_every: 4,
            replay_capacity: 100_000,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("agent.gamma", self.gamma),
            ("agent.epsilon_start", self.epsilon_start),
            ("agent.epsilon_end", self.epsilon_end),
        ];
        for (field, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, format!("{v} is outside [0, 1]")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("agent.learning_rate", "must be positive"));
        }
        let counts = [
            ("agent.epsilon_decay_steps", self.epsilon_decay_steps),
            ("agent.batch_size", self.batch_size as u64),
            ("agent.target_sync", self.target_sync),
            ("agent.learn_start", self.learn_start as u64),
            ("agent.learn_every", self.learn_every),
            ("agent.replay_capacity", self.replay_capacity as u64),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.batch_size > self.replay_capacity {
            return Err(Error::config("agent.batch_size", "exceeds agent.replay_capacity"));
        }
        if self.learn_start < self.batch_size {
            return Err(Error::config("agent.learn_start", "smaller than agent.batch_size"));
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`, then constant.
    pub fn epsilon(&self, step: u64) -> f64 {
        let frac = (step as f64 / self.epsilon_decay_steps as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TdTargets {
    /// One target per transition for `q9[flat_index]`.
    Flat(Vec<f32>),
    /// Separate targets for the game and mask branches.
    Branch { game: Vec<f32>, mask: Vec<f32> },
}

fn max3(v: &[f32; 3]) -> f32 {
    v.iter().copied().fold(f32::NEG_INFINITY, f32::max)
}

/// Bootstrapped targets from next-state Q-values of the target network.
///
/// In `FlattenSum` mode the bootstrap is `max q_game + max q_mask`, which
/// equals the max over the nine fused values.
pub fn td_targets(
    rewards: &[f32],
    dones: &[bool],
    next_q: &[QOutput],
    gamma: f64,
    mode: CombineMode,
) -> TdTargets {
    let gamma = gamma as f32;
    let boot = |i: usize, v: f32| {
        if dones[i] {
            rewards[i]
        } else {
            rewards[i] + gamma * v
        }
    };
    match mode {
        CombineMode::FlattenSum => TdTargets::Flat(
            next_q
                .iter()
                .enumerate()
                .map(|(i, q)| boot(i, max3(&q.q_game) + max3(&q.q_mask)))
                .collect(),
        ),
        CombineMode::IndependentBranch => TdTargets::Branch {
            game: next_q
                .iter()
                .enumerate()
                .map(|(i, q)| boot(i, max3(&q.q_game)))
                .collect(),
            mask: next_q
                .iter()
                .enumerate()
                .map(|(i, q)| boot(i, max3(&q.q_mask)))
                .collect(),
        },
    }
}

/// Online network, frozen target copy and optimizer state.
#[derive(Debug, Clone)]
pub struct Agent {
    pub net: QNetwork,
    pub online: NetParams<f32>,
    pub target: NetParams<f32>,
    pub adam: AdamState<f32>,
    pub config: AgentConfig,
    pub mode: CombineMode,
}

impl Agent {
    pub fn new(net: QNetwork, config: AgentConfig, mode: CombineMode, seed: u64) -> Result<Self> {
        config.validate()?;
        let online = net.init::<f32>(seed);
        let adam = AdamState::new(online.iter());
        Ok(Self {
            target: online.clone(),
            online,
            adam,
            net,
            config,
            mode,
        })
    }

    pub fn q_values(&self, obs: &ObsStack) -> Result<QOutput> {
        let q = self.net.q_forward(&self.online, obs)?;
        if !q.is_finite() {
            return Err(Error::Numeric("q values".into()));
        }
        Ok(q)
    }

    pub fn act<R: Rng>(&self, obs: &ObsStack, epsilon: f64, rng: &mut R) -> Result<(CombinedAction, QOutput)> {
        let q = self.q_values(obs)?;
        Ok((select_action(&q, epsilon, rng, self.mode), q))
    }

    /// Copies the online weights into the target network.
    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Samples a minibatch and applies one Adam step; returns the loss.
    pub fn learn_step<R: Rng>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<f32> {
        let batch = buffer.sample_batch(self.config.batch_size, rng)?;
        self.learn_on(&batch)
    }

    pub fn learn_on(&mut self, batch: &Batch) -> Result<f32> {
        let n = batch.len();
        let shape = [n, STACK_DEPTH, FRAME_SIZE, FRAME_SIZE];
        let next = Tensor::from_vec(&shape, batch.next_obs.clone())?;
        let (ng, nm) = self.net.infer(&self.target, &next)?;
        let next_q: Vec<QOutput> = (0..n).map(|i| q_output_row(&ng, &nm, i)).collect();
        let targets = td_targets(&batch.rewards, &batch.dones, &next_q, self.config.gamma, self.mode);

        let obs = Tensor::from_vec(&shape, batch.obs.clone())?;
        let (qg, qm, cache) = self.net.forward(&self.online, &obs)?;
        let mut d_game = Tensor::zeros(&[n, GAME_ACTIONS]);
        let mut d_mask = Tensor::zeros(&[n, MASK_ACTIONS]);
        let gi = |i: usize| i * GAME_ACTIONS + batch.actions[i].game.index();
        let mi = |i: usize| i * MASK_ACTIONS + batch.actions[i].mask_index;

        let loss = match targets {
            TdTargets::Flat(y) => {
                let pred: Vec<f32> = (0..n).map(|i| qg.data()[gi(i)] + qm.data()[mi(i)]).collect();
                let (loss, dpred) = huber_loss(
                    &Tensor::from_vec(&[n], pred)?,
                    &Tensor::from_vec(&[n], y)?,
                    1.0,
                )?;
                for i in 0..n {
                    d_game.data_mut()[gi(i)] = dpred.data()[i];
                    d_mask.data_mut()[mi(i)] = dpred.data()[i];
                }
                loss
            }
            TdTargets::Branch { game, mask } => {
                let pg: Vec<f32> = (0..n).map(|i| qg.data()[gi(i)]).collect();
                let pm: Vec<f32> = (0..n).map(|i| qm.data()[mi(i)]).collect();
                let (lg, dg) = huber_loss(&Tensor::from_vec(&[n], pg)?, &Tensor::from_vec(&[n], game)?, 1.0)?;
                let (lm, dm) = huber_loss(&Tensor::from_vec(&[n], pm)?, &Tensor::from_vec(&[n], mask)?, 1.0)?;
                for i in 0..n {
                    d_game.data_mut()[gi(i)] = 0.5 * dg.data()[i];
                    d_mask.data_mut()[mi(i)] = 0.5 * dm.data()[i];
                }
                0.5 * (lg + lm)
            }
        };
        if !loss.is_finite() {
            return Err(Error::Numeric("td loss".into()));
        }
        let grads = self.net.backward(&self.online, cache, d_game, d_mask)?.into_flat();
        let cfg = AdamConfig::with_lr(self.config.learning_rate);
        self.adam.update(self.online.iter_mut(), &grads, &cfg)?;
        Ok(loss)
    }
}
