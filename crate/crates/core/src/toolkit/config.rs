//! Sectioned `section.key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. String values may be
//! wrapped in double quotes. Every key is optional; omitted keys take their
//! defaults. Unknown keys and repeated keys are rejected.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::agent::{AgentConfig, CombineMode};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::trainer::{CurriculumConfig, CurriculumTrigger, TrainConfig};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub curriculum: CurriculumConfig,
    pub train: TrainConfig,
}

/// Trigger parameters are collected separately because they may appear
/// before `curriculum.trigger` itself.
#[derive(Default)]
struct TriggerKeys {
    kind: Option<String>,
    episodes: Option<(usize, u64)>,
    threshold: Option<(usize, f64)>,
    window: Option<(usize, usize)>,
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::ConfigParse {
        line,
        reason: format!("`{key}`: cannot parse `{value}`"),
    })
}

fn parse_named<T: FromStr<Err = String>>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|e| Error::ConfigParse {
        line,
        reason: format!("`{key}`: {e}"),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut trigger = TriggerKeys::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::ConfigParse {
                line,
                reason: "expected `section.key = value`".into(),
            })?;
            let key = key.trim();
            let mut value = value.trim();
            if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
                value = &value[1..value.len() - 1];
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::ConfigParse {
                    line,
                    reason: format!("`{key}` given twice"),
                });
            }
            cfg.set(line, key, value, &mut trigger)?;
        }
        cfg.curriculum.trigger = trigger.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        self.curriculum.validate()?;
        self.train.validate()
    }

    fn set(&mut self, line: usize, key: &str, v: &str, trigger: &mut TriggerKeys) -> Result<()> {
        let (e, a, t) = (&mut self.env, &mut self.agent, &mut self.train);
        match key {
            "env.field_width" => e.field_width = parse_value(line, key, v)?,
            "env.field_height" => e.field_height = parse_value(line, key, v)?,
            "env.paddle_height" => e.paddle_height = parse_value(line, key, v)?,
            "env.paddle_speed" => e.paddle_speed = parse_value(line, key, v)?,
            "env.ball_speed_x" => e.ball_speed_x = parse_value(line, key, v)?,
            "env.ball_speed_y_max" => e.ball_speed_y_max = parse_value(line, key, v)?,
            "env.opponent_speed" => e.opponent_speed = parse_value(line, key, v)?,
            "env.opponent_deadzone" => e.opponent_deadzone = parse_value(line, key, v)?,
            "env.points_to_win" => e.points_to_win = parse_value(line, key, v)?,
            "env.action_repeat" => e.action_repeat = parse_value(line, key, v)?,
            "env.max_steps" => e.max_steps = parse_value(line, key, v)?,

            "agent.gamma" => a.gamma = parse_value(line, key, v)?,
            "agent.epsilon_start" => a.epsilon_start = parse_value(line, key, v)?,
            "agent.epsilon_end" => a.epsilon_end = parse_value(line, key, v)?,
            "agent.epsilon_decay_steps" => a.epsilon_decay_steps = parse_value(line, key, v)?,
            "agent.learning_rate" => a.learning_rate = parse_value(line, key, v)?,
            "agent.batch_size" => a.batch_size = parse_value(line, key, v)?,
            "agent.target_sync" => a.target_sync = parse_value(line, key, v)?,
            "agent.learn_start" => a.learn_start = parse_value(line, key, v)?,
            "agent.learn_every" => a.learn_every = parse_value(line, key, v)?,
            "agent.replay_capacity" => a.replay_capacity = parse_value(line, key, v)?,

            "curriculum.enabled" => self.curriculum.enabled = parse_value(line, key, v)?,
            "curriculum.trigger" => trigger.kind = Some(v.to_string()),
            "curriculum.episodes" => trigger.episodes = Some((line, parse_value(line, key, v)?)),
            "curriculum.threshold" => trigger.threshold = Some((line, parse_value(line, key, v)?)),
            "curriculum.window" => trigger.window = Some((line, parse_value(line, key, v)?)),

            "train.total_episodes" => t.total_episodes = parse_value(line, key, v)?,
            "train.mask_family" => t.mask_family = parse_named(line, key, v)?,
            "train.combine_mode" => t.combine_mode = parse_named::<CombineMode>(line, key, v)?,
            "train.eval_every" => t.eval_every = parse_value(line, key, v)?,
            "train.eval_episodes" => t.eval_episodes = parse_value(line, key, v)?,
            "train.eval_epsilon" => t.eval_epsilon = parse_value(line, key, v)?,
            "train.seed" => t.seed = parse_value(line, key, v)?,
            "train.checkpoint_every" => t.checkpoint_every = parse_value(line, key, v)?,
            "train.wall_clock" => t.wall_clock = parse_value(line, key, v)?,
            _ => {
                return Err(Error::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Every key in a fixed order; parsing the output yields `self` again.
    pub fn to_canonical_string(&self) -> String {
        let (e, a, c, t) = (&self.env, &self.agent, &self.curriculum, &self.train);
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("env.field_width", e.field_width.to_string());
        put("env.field_height", e.field_height.to_string());
        put("env.paddle_height", e.paddle_height.to_string());
        put("env.paddle_speed", e.paddle_speed.to_string());
        put("env.ball_speed_x", e.ball_speed_x.to_string());
        put("env.ball_speed_y_max", e.ball_speed_y_max.to_string());
        put("env.opponent_speed", e.opponent_speed.to_string());
        put("env.opponent_deadzone", e.opponent_deadzone.to_string());
        put("env.points_to_win", e.points_to_win.to_string());
        put("env.action_repeat", e.action_repeat.to_string());
        put("env.max_steps", e.max_steps.to_string());

        put("agent.gamma", a.gamma.to_string());
        put("agent.epsilon_start", a.epsilon_start.to_string());
        put("agent.epsilon_end", a.epsilon_end.to_string());
        put("agent.epsilon_decay_steps", a.epsilon_decay_steps.to_string());
        put("agent.learning_rate", a.learning_rate.to_string());
        put("agent.batch_size", a.batch_size.to_string());
        put("agent.target_sync", a.target_sync.to_string());
        put("agent.learn_start", a.learn_start.to_string());
        put("agent.learn_every", a.learn_every.to_string());
        put("agent.replay_capacity", a.replay_capacity.to_string());

        put("curriculum.enabled", c.enabled.to_string());
        match c.trigger {
            CurriculumTrigger::EpisodeCount(n) => {
                put("curriculum.trigger", "episode_count".into());
                put("curriculum.episodes", n.to_string());
            }
            CurriculumTrigger::ScoreThreshold { threshold, window } => {
                put("curriculum.trigger", "score_threshold".into());
                put("curriculum.threshold", threshold.to_string());
                put("curriculum.window", window.to_string());
            }
        }

        put("train.total_episodes", t.total_episodes.to_string());
        put("train.mask_family", t.mask_family.label().into());
        put("train.combine_mode", t.combine_mode.label().into());
        put("train.eval_every", t.eval_every.to_string());
        put("train.eval_episodes", t.eval_episodes.to_string());
        put("train.eval_epsilon", t.eval_epsilon.to_string());
        put("train.seed", t.seed.to_string());
        put("train.checkpoint_every", t.checkpoint_every.to_string());
        put("train.wall_clock", t.wall_clock.to_string());
        s
    }
}

impl TriggerKeys {
    fn resolve(self) -> Result<CurriculumTrigger> {
        let misplaced = |line: usize, key: &str, kind: &str| Error::ConfigParse {
            line,
            reason: format!("`{key}` only applies with curriculum.trigger = {kind}"),
        };
        match self.kind.as_deref().unwrap_or("episode_count") {
            "episode_count" => {
                if let Some((line, _)) = self.threshold {
                    return Err(misplaced(line, "curriculum.threshold", "score_threshold"));
                }
                if let Some((line, _)) = self.window {
                    return Err(misplaced(line, "curriculum.window", "score_threshold"));
                }
                Ok(CurriculumTrigger::EpisodeCount(self.episodes.map_or(500, |(_, n)| n)))
            }
            "score_threshold" => {
                if let Some((line, _)) = self.episodes {
                    return Err(misplaced(line, "curriculum.episodes", "episode_count"));
                }
                Ok(CurriculumTrigger::ScoreThreshold {
                    threshold: self.threshold.map_or(20.0, |(_, v)| v),
                    window: self.window.map_or(10, |(_, v)| v),
                })
            }
            other => Err(Error::config(
                "curriculum.trigger",
                format!("expected `episode_count` or `score_threshold`, got `{other}`"),
            )),
        }
    }
}
