//! Episode runner, experiment matrix, transcripts and replay.

pub mod config;
pub mod episode;
pub mod matrix;
pub mod replay;
pub mod scripted;
pub mod transcript;

pub use config::{BackendConfig, ConfigError, OutputPaths, RunConfig, Variant};
pub use episode::{default_agents, run_episode, run_world, world_from_header, EpisodeError, EpisodeOptions, EpisodeOutcome, EpisodeSpec};
pub use matrix::{run_matrix, EpisodeResult, MatrixReport, MatrixRow, MatrixRun};
pub use replay::{replay, Divergence, ReplayError, ReplayReport};
pub use transcript::{Transcript, TranscriptError, TranscriptRecord};
