//! Path planning and skill execution.

pub mod astar;
pub mod skills;

pub use astar::{a_star, path_len, NoPath};
pub use skills::{reach_region, FailReason, Phase, SkillExecution};
