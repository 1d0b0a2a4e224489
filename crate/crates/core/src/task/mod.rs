//! The reaching protocol: balanced trial generation, the per-tick phase
//! machine and simulated human partners for headless runs.

mod human;
mod session;
mod trial;

pub use human::*;
pub use session::*;
pub use trial::*;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("trials_per_session = {0} is not a positive multiple of 9")]
    UnbalancedConfig(usize),
    #[error("invalid session config: {0}")]
    InvalidConfig(&'static str),
    #[error("unknown session mode '{0}'")]
    UnknownMode(String),
    #[error("session complete")]
    SessionComplete,
    #[error("non-finite force or state")]
    NonFiniteForce,
}
