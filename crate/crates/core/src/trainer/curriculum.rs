use crate::error::{Error, Result};
use crate::observe::MaskId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    FullyObservable,
    Occluded,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::FullyObservable => "fully_observable",
            Phase::Occluded => "occluded",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Phase::FullyObservable => 0,
            Phase::Occluded => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Phase::FullyObservable),
            1 => Some(Phase::Occluded),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurriculumTrigger {
    /// Occlusion starts with episode `n + 1`.
    EpisodeCount(u64),
    /// Occlusion starts once the mean of the last `window` evaluation
    /// episode scores reaches `threshold`.
    ScoreThreshold { threshold: f64, window: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumConfig {
    pub enabled: bool,
    pub trigger: CurriculumTrigger,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            trigger: CurriculumTrigger::EpisodeCount(500),
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if let CurriculumTrigger::ScoreThreshold { threshold, window } = self.trigger {
            if !(1.0..=21.0).contains(&threshold) {
                return Err(Error::config("curriculum.threshold", format!("{threshold} is outside [1, 21]")));
            }
            if window == 0 {
                return Err(Error::config("curriculum.window", "must be >= 1"));
            }
        }
        Ok(())
    }

    /// Phase of the very first episode.
    pub fn initial_phase(&self) -> Phase {
        if self.enabled {
            Phase::FullyObservable
        } else {
            Phase::Occluded
        }
    }
}

/// Phase in effect for `episode` (1-based), given every evaluation episode
/// score recorded so far. Never leaves `Occluded`.
pub fn curriculum_update(phase: Phase, episode: u64, eval_scores: &[f64], config: &CurriculumConfig) -> Phase {
    if phase == Phase::Occluded || !config.enabled {
        return Phase::Occluded;
    }
    let fire = match config.trigger {
        CurriculumTrigger::EpisodeCount(n) => episode > n,
        CurriculumTrigger::ScoreThreshold { threshold, window } => {
            eval_scores.len() >= window && {
                let recent = &eval_scores[eval_scores.len() - window..];
                recent.iter().sum::<f64>() / window as f64 >= threshold
            }
        }
    };
    if fire {
        Phase::Occluded
    } else {
        Phase::FullyObservable
    }
}

/// The mask that actually reaches the observation.
pub fn phase_mask_override(phase: Phase, chosen: MaskId) -> MaskId {
    match phase {
        Phase::FullyObservable => MaskId::Identity,
        Phase::Occluded => chosen,
    }
}
