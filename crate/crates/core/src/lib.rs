//! Contextual reward shaping for cooperative multi-agent defense.
//!
//! A pitch-control field (who reaches each part of the pitch first) is
//! contracted with an expected-possession-value grid into a single
//! game-state EPV. That number, subtracted from the sparse goal reward,
//! gives defenders dense feedback while a value-decomposition learner
//! trains one Q-network per defender in a 2D football simulator.

pub mod epv;
pub mod error;
pub mod geom;
pub mod par;
pub mod pitch_control;
pub mod render;
pub mod reward;
pub mod sim;
pub mod trainer;
pub mod vdn;

pub use error::{Error, Result};
