//! JSON wire protocol: one [`WireMessage`] per websocket text frame.
//!
//! ```json
//! {"kind":"tick_state","seq":12,"t":3.217,"payload":{...}}
//! ```

use serde::{Deserialize, Serialize};

use coreach::geometry::Vec2;
use coreach::metrics::{Factor, SessionSummary};
use coreach::task::{CompletedTrial, SessionConfig, SessionMode, SessionSnapshot, TrialPhase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    /// Strictly increasing per connection, from 0 at `hello`.
    pub seq: u64,
    /// Simulation seconds.
    pub t: f64,
    #[serde(flatten)]
    pub body: Body,
}

impl WireMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire message serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Body {
    Hello(Hello),
    SessionStart(SessionStart),
    TickState(TickState),
    Input(Input),
    TrialEvent(TrialEvent),
    TlxSubmit(TlxSubmit),
    SessionSummary(SessionSummary),
    Error(ErrorPayload),
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::Hello(_) => "hello",
            Body::SessionStart(_) => "session_start",
            Body::TickState(_) => "tick_state",
            Body::Input(_) => "input",
            Body::TrialEvent(_) => "trial_event",
            Body::TlxSubmit(_) => "tlx_submit",
            Body::SessionSummary(_) => "session_summary",
            Body::Error(_) => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetView {
    pub center: Vec2,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleView {
    pub a: Vec2,
    pub b: Vec2,
}

/// What the display draws: the point, the start, and the target and
/// obstacle while they are on screen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub start: Vec2,
    pub target: Option<TargetView>,
    pub obstacle: Option<ObstacleView>,
    pub phase: TrialPhase,
    pub trial_id: Option<u32>,
    pub trial_index: usize,
    /// Robot partner force applied on the last tick, N.
    pub robot_force: Vec2,
    pub human_force: Vec2,
}

impl From<&SessionSnapshot> for TickState {
    fn from(s: &SessionSnapshot) -> Self {
        Self {
            position: s.position,
            velocity: s.velocity,
            start: s.start,
            target: s.target.map(|(center, width)| TargetView { center, width }),
            obstacle: s.obstacle.map(|o| ObstacleView {
                a: o.endpoint_a,
                b: o.endpoint_b,
            }),
            phase: s.phase,
            trial_id: s.trial_id,
            trial_index: s.trial_index,
            robot_force: s.robot_force,
            human_force: s.human_force,
        }
    }
}

/// First message on every connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub session_id: String,
    pub mode: SessionMode,
    /// Connection number; a reconnect gets a new epoch and restarts `seq`.
    pub epoch: u64,
    pub trials_total: usize,
    pub complete: bool,
    pub state: TickState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStart {
    pub session_id: String,
    pub mode: SessionMode,
    pub config: SessionConfig,
}

/// Client cursor in world metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Input {
    pub cursor: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcomeView {
    pub success: bool,
    pub collided: bool,
    pub movement_time: Option<f64>,
}

/// A phase change. Carries the outcome when the trial has just finished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEvent {
    pub trial_id: u32,
    pub from: TrialPhase,
    pub to: TrialPhase,
    pub outcome: Option<TrialOutcomeView>,
}

impl TrialOutcomeView {
    pub fn of(done: &CompletedTrial) -> Self {
        Self {
            success: done.outcome.success,
            collided: done.outcome.collided,
            movement_time: done.outcome.movement_time,
        }
    }
}

/// Ratings in `Factor::ALL` order and the winner of each of the fifteen
/// pairs in `tlx_pairs()` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlxSubmit {
    pub ratings: [f64; 6],
    pub choices: Vec<Factor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub message: String,
}
