//! Scripted agent policies used to bracket the learnable score range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvConfig, EnvState, GameAction, Pong, BALL_SIZE};
use crate::error::Result;

/// Moves the agent paddle toward the ball's vertical position, picking the
/// action whose paddle position at the end of the step is closest to where
/// the ball will be.
pub fn tracker(config: &EnvConfig, state: &EnvState) -> GameAction {
    let horizon = config.action_repeat as f64;
    let ball_y = state.ball_pos.1 + BALL_SIZE as f64 / 2.0 + horizon * state.ball_vel.1;
    let half = config.paddle_height as f64 / 2.0;
    let center = state.agent_paddle_y as f64 + half;
    let travel = (config.paddle_speed * config.action_repeat) as f64;
    let lowest = config.field_height as f64 - half;
    let distance = |shift: f64| (ball_y - (center + shift).clamp(half, lowest)).abs();
    [
        (GameAction::NoOp, 0.0),
        (GameAction::Up, -travel),
        (GameAction::Down, travel),
    ]
    .into_iter()
    .fold((GameAction::NoOp, f64::INFINITY), |best, (action, shift)| {
        let d = distance(shift);
        if d < best.1 {
            (action, d)
        } else {
            best
        }
    })
    .0
}

/// Keeps the paddle in the half of the field the ball is not in.
pub fn evader(config: &EnvConfig, state: &EnvState) -> GameAction {
    let ball_y = state.ball_pos.1 + BALL_SIZE as f64 / 2.0;
    if ball_y < config.field_height as f64 / 2.0 {
        GameAction::Down
    } else {
        GameAction::Up
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOutcome {
    pub agent_score: u32,
    pub opponent_score: u32,
    pub steps: u64,
    pub reward_sum: i32,
}

impl EpisodeOutcome {
    pub fn score(&self) -> i32 {
        self.agent_score as i32 - self.opponent_score as i32
    }
}

/// Plays one episode with a state-feedback policy.
pub fn play_episode<P>(config: &EnvConfig, seed: u64, mut policy: P) -> Result<EpisodeOutcome>
where
    P: FnMut(&EnvConfig, &EnvState) -> GameAction,
{
    let (mut env, _) = Pong::reset(config.clone(), seed)?;
    let mut reward_sum = 0;
    loop {
        let action = policy(env.config(), env.state());
        let r = env.step(action)?;
        reward_sum += r.reward;
        if r.done {
            let s = env.state();
            return Ok(EpisodeOutcome {
                agent_score: s.agent_score,
                opponent_score: s.opponent_score,
                steps: s.step_count,
                reward_sum,
            });
        }
    }
}

/// Mean final score of the tracker over seeds `seed..seed + episodes`.
pub fn tracker_mean_score(config: &EnvConfig, seed: u64, episodes: usize) -> Result<f64> {
    let mut total = 0i64;
    for i in 0..episodes as u64 {
        total += play_episode(config, seed + i, tracker)?.score() as i64;
    }
    Ok(total as f64 / episodes as f64)
}

/// Mean final score of a uniformly random game-action policy.
pub fn random_mean_score(config: &EnvConfig, seed: u64, episodes: usize) -> Result<f64> {
    let mut total = 0i64;
    for i in 0..episodes as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i) ^ 0x5eed_5eed);
        let outcome = play_episode(config, seed + i, |_, _| {
            GameAction::from_index(rng.gen_range(0..3)).expect("index < 3")
        })?;
        total += outcome.score() as i64;
    }
    Ok(total as f64 / episodes as f64)
}
