use std::str::FromStr;

use rand::Rng;

use crate::env::GameAction;

pub const GAME_ACTIONS: usize = 3;
pub const MASK_ACTIONS: usize = 3;
pub const COMBINED_ACTIONS: usize = GAME_ACTIONS * MASK_ACTIONS;

/// Per-branch Q-values for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QOutput {
    pub q_game: [f32; GAME_ACTIONS],
    /// Ordered like `MaskFamily::masks()`.
    pub q_mask: [f32; MASK_ACTIONS],
}

impl QOutput {
    pub fn is_finite(&self) -> bool {
        self.q_game.iter().chain(&self.q_mask).all(|v| v.is_finite())
    }
}

/// A game action fused with a mask choice; `flat_index = 3·game + mask`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CombinedAction {
    pub game: GameAction,
    pub mask_index: usize,
}

impl CombinedAction {
    pub fn new(game: GameAction, mask_index: usize) -> Self {
        assert!(mask_index < MASK_ACTIONS, "mask index out of range");
        Self { game, mask_index }
    }

    pub fn flat_index(self) -> usize {
        MASK_ACTIONS * self.game.index() + self.mask_index
    }

    pub fn from_flat(index: usize) -> Option<Self> {
        if index >= COMBINED_ACTIONS {
            return None;
        }
        let game = GameAction::from_index(index / MASK_ACTIONS)?;
        Some(Self::new(game, index % MASK_ACTIONS))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CombineMode {
    /// One 9-way action space valued by `q_game[g] + q_mask[m]`.
    #[default]
    FlattenSum,
    /// Each branch is valued and trained against its own target.
    IndependentBranch,
}

impl CombineMode {
    pub fn label(self) -> &'static str {
        match self {
            CombineMode::FlattenSum => "flatten_sum",
            CombineMode::IndependentBranch => "independent_branch",
        }
    }
}

impl FromStr for CombineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flatten_sum" => Ok(CombineMode::FlattenSum),
            "independent_branch" => Ok(CombineMode::IndependentBranch),
            other => Err(format!(
                "expected `flatten_sum` or `independent_branch`, got `{other}`"
            )),
        }
    }
}

/// `q9[3g + m] = q_game[g] + q_mask[m]`.
pub fn combined_q(out: &QOutput) -> [f32; COMBINED_ACTIONS] {
    let mut q9 = [0.0; COMBINED_ACTIONS];
    for (g, &qg) in out.q_game.iter().enumerate() {
        for (m, &qm) in out.q_mask.iter().enumerate() {
            q9[MASK_ACTIONS * g + m] = qg + qm;
        }
    }
    q9
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_action(out: &QOutput, mode: CombineMode) -> CombinedAction {
    match mode {
        CombineMode::FlattenSum => {
            CombinedAction::from_flat(argmax(&combined_q(out))).expect("index < 9")
        }
        CombineMode::IndependentBranch => {
            let game = GameAction::from_index(argmax(&out.q_game)).expect("index < 3");
            CombinedAction::new(game, argmax(&out.q_mask))
        }
    }
}

/// Epsilon-greedy over the nine combined actions.
pub fn select_action<R: Rng>(out: &QOutput, epsilon: f64, rng: &mut R, mode: CombineMode) -> CombinedAction {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        CombinedAction::from_flat(rng.gen_range(0..COMBINED_ACTIONS)).expect("index < 9")
    } else {
        greedy_action(out, mode)
    }
}
