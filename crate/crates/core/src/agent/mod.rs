mod action;
mod learner;
mod network;
mod replay;

pub use action::{
    argmax, combined_q, greedy_action, select_action, CombineMode, CombinedAction, QOutput, COMBINED_ACTIONS,
    GAME_ACTIONS, MASK_ACTIONS,
};
pub use learner::{td_targets, Agent, AgentConfig, TdTargets};
pub use network::{two_head_grad_check, NetParams, QCache, QNetwork};
pub use replay::{Batch, ReplayBuffer, Transition};
