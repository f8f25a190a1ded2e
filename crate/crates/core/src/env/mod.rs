//! Deterministic Pong.
//!
//! The agent controls the right paddle; a scripted opponent controls the left
//! one. Each agent step repeats the chosen [`GameAction`] for
//! `action_repeat` physics ticks and reports a ±1 reward on point events.

mod pong;
pub mod policies;

pub use pong::{opponent_policy, render, EnvState, Pong, Side, StepResult, OPPONENT_RETURN_JITTER};

use crate::error::{Error, Result};

/// Width of both paddles in raw pixels.
pub const PADDLE_WIDTH: usize = 4;
/// Distance between each paddle and its goal line.
pub const PADDLE_INSET: usize = 16;
/// Side length of the square ball.
pub const BALL_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GameAction {
    NoOp = 0,
    Up = 1,
    Down = 2,
}

impl GameAction {
    pub const ALL: [GameAction; 3] = [GameAction::NoOp, GameAction::Up, GameAction::Down];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvConfig {
    pub field_width: usize,
    pub field_height: usize,
    pub paddle_height: usize,
    pub paddle_speed: usize,
    pub ball_speed_x: usize,
    pub ball_speed_y_max: usize,
    pub opponent_speed: usize,
    pub opponent_deadzone: usize,
    pub points_to_win: u32,
    pub action_repeat: usize,
    pub max_steps: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            field_width: 160,
            field_height: 168,
            paddle_height: 16,
            paddle_speed: 4,
            ball_speed_x: 2,
            ball_speed_y_max: 4,
            opponent_speed: 2,
            opponent_deadzone: 4,
            points_to_win: 21,
            action_repeat: 4,
            max_steps: 10_000,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("env.field_width", self.field_width),
            ("env.field_height", self.field_height),
            ("env.paddle_height", self.paddle_height),
            ("env.paddle_speed", self.paddle_speed),
            ("env.ball_speed_x", self.ball_speed_x),
            ("env.ball_speed_y_max", self.ball_speed_y_max),
            ("env.opponent_speed", self.opponent_speed),
            ("env.action_repeat", self.action_repeat),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(Error::config(field, "must be > 0"));
            }
        }
        if self.points_to_win == 0 {
            return Err(Error::config("env.points_to_win", "must be >= 1"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("env.max_steps", "must be > 0"));
        }
        if self.opponent_speed >= self.ball_speed_y_max {
            return Err(Error::config(
                "env.opponent_speed",
                "must be smaller than env.ball_speed_y_max",
            ));
        }
        if self.paddle_height > self.field_height {
            return Err(Error::config("env.paddle_height", "taller than the field"));
        }
        // Both paddles, their insets and some room for the ball must fit.
        if self.field_width < 2 * (PADDLE_INSET + PADDLE_WIDTH) + 2 * BALL_SIZE {
            return Err(Error::config("env.field_width", "too narrow for the paddles"));
        }
        if self.field_height < 2 * BALL_SIZE {
            return Err(Error::config("env.field_height", "too short for the ball"));
        }
        Ok(())
    }

    /// Left x coordinate of the agent (right-hand) paddle.
    pub fn agent_paddle_x(&self) -> usize {
        self.field_width - PADDLE_INSET - PADDLE_WIDTH
    }

    /// Left x coordinate of the opponent (left-hand) paddle.
    pub fn opponent_paddle_x(&self) -> usize {
        PADDLE_INSET
    }

    pub fn max_paddle_y(&self) -> i32 {
        (self.field_height - self.paddle_height) as i32
    }
}

/// Grayscale frame at the environment's native resolution, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl RawFrame {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.to_le_bytes()).collect()
    }
}
