//! A partially observable Pong testbed for deep Q-learning agents that
//! choose, alongside each paddle move, which part of the screen they will
//! see next.

pub mod agent;
pub mod env;
pub mod error;
pub mod nn;
pub mod observe;
pub mod toolkit;
pub mod trainer;

pub use error::{CheckpointError, Error, Result};
