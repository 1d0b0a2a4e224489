//! Real-time gateway between the reaching task and a live operator: a
//! 1 kHz tick owner, a websocket state stream at display rate, cursor
//! input, and headless runs with a simulated person.

pub mod config;
pub mod hub;
pub mod input;
pub mod session;
pub mod wire;

pub use config::{ConfigError, ServiceConfig};
pub use hub::Hub;
pub use input::{map_cursor_to_force, InputMapping, LiveHuman, StaleGuard};
pub use session::{persist, run_session, Pacing, RunOptions, ServiceError, SessionOutput};
pub use wire::{Body, WireMessage};
