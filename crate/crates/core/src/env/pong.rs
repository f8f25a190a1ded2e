use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EnvConfig, GameAction, RawFrame, BALL_SIZE, PADDLE_WIDTH};
use crate::error::{Error, Result};

/// Half-width of the uniform noise added to the opponent's outgoing vertical
/// speed. Without it, centered returns settle into rallies that never end.
pub const OPPONENT_RETURN_JITTER: f64 = 0.5;

/// Which player a serve travels toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Agent,
    Opponent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Top-left corner of the ball, sub-pixel.
    pub ball_pos: (f64, f64),
    pub ball_vel: (f64, f64),
    pub agent_paddle_y: i32,
    pub opponent_paddle_y: i32,
    pub agent_score: u32,
    pub opponent_score: u32,
    pub step_count: u64,
    /// Set after a point; the next tick re-launches the ball toward this side.
    pub serve_pending: Option<Side>,
    pub done: bool,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub frame: RawFrame,
    pub reward: i32,
    pub done: bool,
    pub agent_score: u32,
    pub opponent_score: u32,
}

enum PointEvent {
    Agent,
    Opponent,
}

/// A Pong match: configuration plus the current world state.
#[derive(Debug, Clone)]
pub struct Pong {
    config: EnvConfig,
    state: EnvState,
}

impl Pong {
    pub fn reset(config: EnvConfig, seed: u64) -> Result<(Self, RawFrame)> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let toward = if rng.gen::<bool>() {
            Side::Agent
        } else {
            Side::Opponent
        };
        let paddle_y = config.max_paddle_y() / 2;
        let mut state = EnvState {
            ball_pos: ball_center(&config),
            ball_vel: (0.0, 0.0),
            agent_paddle_y: paddle_y,
            opponent_paddle_y: paddle_y,
            agent_score: 0,
            opponent_score: 0,
            step_count: 0,
            serve_pending: None,
            done: false,
            rng,
        };
        serve(&config, &mut state, toward);
        let frame = render(&config, &state);
        Ok((Self { config, state }, frame))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.done
    }

    pub fn render(&self) -> RawFrame {
        render(&self.config, &self.state)
    }

    /// Applies `action` for `action_repeat` ticks, stopping early at the
    /// first point event.
    pub fn step(&mut self, action: GameAction) -> Result<StepResult> {
        if self.state.done {
            return Err(Error::Usage("step called on a finished episode".into()));
        }
        let mut reward = 0;
        for _ in 0..self.config.action_repeat {
            match tick(&self.config, &mut self.state, action) {
                Some(PointEvent::Agent) => {
                    self.state.agent_score += 1;
                    reward = 1;
                    self.state.serve_pending = Some(Side::Opponent);
                }
                Some(PointEvent::Opponent) => {
                    self.state.opponent_score += 1;
                    reward = -1;
                    self.state.serve_pending = Some(Side::Agent);
                }
                None => continue,
            }
            // Park the ball at the center until the serve tick.
            self.state.ball_pos = ball_center(&self.config);
            self.state.ball_vel = (0.0, 0.0);
            break;
        }
        self.state.step_count += 1;
        let win = self.config.points_to_win;
        self.state.done = self.state.agent_score >= win
            || self.state.opponent_score >= win
            || self.state.step_count >= self.config.max_steps;
        Ok(StepResult {
            frame: self.render(),
            reward,
            done: self.state.done,
            agent_score: self.state.agent_score,
            opponent_score: self.state.opponent_score,
        })
    }
}

fn ball_center(config: &EnvConfig) -> (f64, f64) {
    (
        (config.field_width - BALL_SIZE) as f64 / 2.0,
        (config.field_height - BALL_SIZE) as f64 / 2.0,
    )
}

fn serve(config: &EnvConfig, state: &mut EnvState, toward: Side) {
    let vx = config.ball_speed_x as f64;
    let vx = match toward {
        Side::Agent => vx,
        Side::Opponent => -vx,
    };
    let sign = if state.rng.gen::<bool>() { 1.0 } else { -1.0 };
    let quarter: u32 = state.rng.gen_range(1..=3);
    let vy = sign * config.ball_speed_y_max as f64 * f64::from(quarter) / 4.0;
    state.ball_pos = ball_center(config);
    state.ball_vel = (vx, vy);
    state.serve_pending = None;
}

/// Opponent paddle displacement for one tick: chase the ball center at
/// `opponent_speed`, idle inside the deadzone.
pub fn opponent_policy(config: &EnvConfig, state: &EnvState) -> i32 {
    let ball_y = state.ball_pos.1 + BALL_SIZE as f64 / 2.0;
    let center = state.opponent_paddle_y as f64 + config.paddle_height as f64 / 2.0;
    let diff = ball_y - center;
    if diff.abs() <= config.opponent_deadzone as f64 {
        return 0;
    }
    let step = diff.abs().min(config.opponent_speed as f64).floor() as i32;
    if diff > 0.0 {
        step
    } else {
        -step
    }
}

fn tick(config: &EnvConfig, state: &mut EnvState, action: GameAction) -> Option<PointEvent> {
    let speed = config.paddle_speed as i32;
    let delta = match action {
        GameAction::NoOp => 0,
        GameAction::Up => -speed,
        GameAction::Down => speed,
    };
    let max_y = config.max_paddle_y();
    state.agent_paddle_y = (state.agent_paddle_y + delta).clamp(0, max_y);
    let opp = opponent_policy(config, state);
    state.opponent_paddle_y = (state.opponent_paddle_y + opp).clamp(0, max_y);

    if let Some(side) = state.serve_pending {
        serve(config, state, side);
        return None;
    }

    let size = BALL_SIZE as f64;
    let (px, _) = state.ball_pos;
    let (vx, mut vy) = state.ball_vel;
    let mut x = px + vx;
    let mut y = state.ball_pos.1 + vy;

    let floor = (config.field_height - BALL_SIZE) as f64;
    if y < 0.0 {
        y = -y;
        vy = vy.abs();
    } else if y > floor {
        y = 2.0 * floor - y;
        vy = -vy.abs();
    }

    let mut vx_out = vx;
    let agent_face = config.agent_paddle_x() as f64;
    let opponent_face = (config.opponent_paddle_x() + PADDLE_WIDTH) as f64;
    if vx > 0.0 && px + size <= agent_face && x + size > agent_face {
        if overlaps(y, state.agent_paddle_y, config) {
            x = agent_face - size;
            vx_out = -vx;
            vy = deflect(y, state.agent_paddle_y, config);
        }
    } else if vx < 0.0
        && px >= opponent_face
        && x < opponent_face
        && overlaps(y, state.opponent_paddle_y, config)
    {
        x = opponent_face;
        vx_out = -vx;
        let max = config.ball_speed_y_max as f64;
        let jitter = OPPONENT_RETURN_JITTER * (2.0 * state.rng.gen::<f64>() - 1.0);
        vy = (deflect(y, state.opponent_paddle_y, config) + jitter).clamp(-max, max);
    }

    state.ball_pos = (x, y);
    state.ball_vel = (vx_out, vy);

    if x < 0.0 {
        Some(PointEvent::Agent)
    } else if x + size > config.field_width as f64 {
        Some(PointEvent::Opponent)
    } else {
        None
    }
}

fn overlaps(ball_y: f64, paddle_y: i32, config: &EnvConfig) -> bool {
    let top = paddle_y as f64;
    ball_y < top + config.paddle_height as f64 && ball_y + BALL_SIZE as f64 > top
}

/// Outgoing vertical speed, proportional to the hit offset from the paddle
/// center and capped at `ball_speed_y_max`.
fn deflect(ball_y: f64, paddle_y: i32, config: &EnvConfig) -> f64 {
    let half = config.paddle_height as f64 / 2.0;
    let offset = ball_y + BALL_SIZE as f64 / 2.0 - (paddle_y as f64 + half);
    let max = config.ball_speed_y_max as f64;
    (max * offset / half).clamp(-max, max)
}

/// Paddles and ball at intensity 1.0 on a 0.0 background.
pub fn render(config: &EnvConfig, state: &EnvState) -> RawFrame {
    let mut frame = RawFrame::new(config.field_width, config.field_height);
    let ph = config.paddle_height;
    fill_rect(
        &mut frame,
        config.opponent_paddle_x() as i64,
        state.opponent_paddle_y as i64,
        PADDLE_WIDTH,
        ph,
    );
    fill_rect(
        &mut frame,
        config.agent_paddle_x() as i64,
        state.agent_paddle_y as i64,
        PADDLE_WIDTH,
        ph,
    );
    let (bx, by) = state.ball_pos;
    fill_rect(
        &mut frame,
        bx.floor() as i64,
        by.floor() as i64,
        BALL_SIZE,
        BALL_SIZE,
    );
    frame
}

fn fill_rect(frame: &mut RawFrame, x: i64, y: i64, w: usize, h: usize) {
    let x0 = x.max(0) as usize;
    let y0 = y.max(0) as usize;
    let x1 = ((x + w as i64).max(0) as usize).min(frame.width);
    let y1 = ((y + h as i64).max(0) as usize).min(frame.height);
    for row in y0..y1 {
        let base = row * frame.width;
        frame.pixels[base + x0..base + x1.max(x0)].fill(1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_env(seed: u64) -> (Pong, RawFrame) {
        Pong::reset(EnvConfig::default(), seed).unwrap()
    }

    #[test]
    fn reset_is_deterministic() {
        let (a, fa) = default_env(7);
        let (b, fb) = default_env(7);
        assert_eq!(a.state(), b.state());
        assert_eq!(fa.to_bytes(), fb.to_bytes());
        assert_eq!(a.state().agent_score, 0);
        assert_eq!(a.state().opponent_score, 0);
    }

    #[test]
    fn reset_centers_everything() {
        let (env, _) = default_env(3);
        let cfg = env.config();
        let s = env.state();
        assert_eq!(s.ball_pos, ball_center(cfg));
        assert_eq!(s.agent_paddle_y, cfg.max_paddle_y() / 2);
        assert_eq!(s.opponent_paddle_y, cfg.max_paddle_y() / 2);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = EnvConfig {
            paddle_height: 0,
            ..EnvConfig::default()
        };
        assert!(matches!(Pong::reset(cfg, 0), Err(Error::Config { .. })));
        let cfg = EnvConfig {
            opponent_speed: 4,
            ..EnvConfig::default()
        };
        assert!(matches!(Pong::reset(cfg, 0), Err(Error::Config { .. })));
    }

    #[test]
    fn midfield_noop_has_no_reward() {
        let (mut env, _) = default_env(1);
        let r = env.step(GameAction::NoOp).unwrap();
        assert_eq!(r.reward, 0);
        assert!(!r.done);
    }

    #[test]
    fn opponent_deadzone_and_pursuit() {
        let (env, _) = default_env(0);
        let cfg = env.config().clone();
        let mut s = env.state().clone();
        let center = s.opponent_paddle_y as f64 + cfg.paddle_height as f64 / 2.0;
        s.ball_pos.1 = center - BALL_SIZE as f64 / 2.0;
        assert_eq!(opponent_policy(&cfg, &s), 0);
        s.ball_pos.1 = (cfg.field_height - BALL_SIZE) as f64;
        assert_eq!(opponent_policy(&cfg, &s), cfg.opponent_speed as i32);
        s.ball_pos.1 = 0.0;
        assert_eq!(opponent_policy(&cfg, &s), -(cfg.opponent_speed as i32));
    }

    #[test]
    fn stepping_finished_episode_is_usage_error() {
        let cfg = EnvConfig {
            max_steps: 1,
            ..EnvConfig::default()
        };
        let (mut env, _) = Pong::reset(cfg, 5).unwrap();
        assert!(env.step(GameAction::NoOp).unwrap().done);
        assert!(matches!(env.step(GameAction::NoOp), Err(Error::Usage(_))));
    }

    #[test]
    fn render_counts_object_pixels() {
        let (env, frame) = default_env(11);
        let cfg = env.config();
        let lit = frame.pixels.iter().filter(|&&p| p != 0.0).count();
        assert_eq!(lit, BALL_SIZE * BALL_SIZE + 2 * PADDLE_WIDTH * cfg.paddle_height);
        assert!(frame.pixels.iter().all(|&p| p == 0.0 || p == 1.0));
        assert_eq!(render(cfg, env.state()), frame);
    }

    #[test]
    fn paddle_hit_at_center_is_flat_and_edge_is_capped() {
        let cfg = EnvConfig::default();
        let py = 50;
        let center_ball = py as f64 + 8.0 - 1.0;
        assert_eq!(deflect(center_ball, py, &cfg), 0.0);
        assert_eq!(deflect(py as f64 + 40.0, py, &cfg), 4.0);
        assert_eq!(deflect(py as f64 - 40.0, py, &cfg), -4.0);
    }

}
