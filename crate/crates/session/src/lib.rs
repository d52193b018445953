//! Hosts live episodes in which one agent is driven by a human over HTTP and
//! WebSocket, while the rest of the team runs the cooperative agent.

pub mod server;
pub mod session;

pub use server::{router, serve, AppState, Created};
pub use session::{HumanInput, KnownRoom, Outcome, Session, SessionConfig, SessionError, SessionPhase, Snapshot, StepResult, SubmitError};
