//! The trial phase machine driven one plant tick at a time.

use serde::{Deserialize, Serialize};

use super::{generate_session, SessionConfig, TaskError, TrialSpec};
use crate::geometry::{swept_collision, Obstacle, Vec2};
use crate::plant::{step_plant, BodyState, PlantParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialPhase {
    AtStart,
    TargetShown,
    Moving,
    Dwelling,
    Success,
    FailedCollision,
    Returning,
}

impl TrialPhase {
    /// Target and obstacle are on screen in these phases.
    pub fn target_visible(self) -> bool {
        matches!(self, TrialPhase::TargetShown | TrialPhase::Moving | TrialPhase::Dwelling)
    }

    pub fn can_transition_to(self, next: TrialPhase) -> bool {
        use TrialPhase::*;
        matches!(
            (self, next),
            (AtStart, TargetShown)
                | (TargetShown, Moving)
                | (TargetShown, FailedCollision)
                | (Moving, Dwelling)
                | (Moving, FailedCollision)
                | (Dwelling, Moving)
                | (Dwelling, Success)
                | (Dwelling, FailedCollision)
                | (Success, Returning)
                | (FailedCollision, Returning)
                | (Returning, AtStart)
        )
    }
}

/// One recorded tick of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub position: Vec2,
    pub velocity: Vec2,
    pub human_force: Vec2,
    pub robot_force: Vec2,
}

impl PathSample {
    pub fn body_state(&self) -> BodyState {
        BodyState {
            position: self.position,
            velocity: self.velocity,
            time: self.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub success: bool,
    pub collided: bool,
    /// Present iff `success`.
    pub movement_time: Option<f64>,
    pub path: Vec<PathSample>,
}

/// A finished trial with its protocol timestamps (simulation seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedTrial {
    pub spec: TrialSpec,
    pub outcome: TrialOutcome,
    /// Target appearance.
    pub onset_time: f64,
    /// First tick above the onset speed after the target appeared.
    pub movement_start: Option<f64>,
    /// Target entry that began the successful dwell.
    pub target_entry: Option<f64>,
    /// Success or collision time.
    pub end_time: f64,
}

/// Per-tick forces applied to the plant, in newtons.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Forces {
    pub human: Vec2,
    pub robot: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Phase {
        trial_id: u32,
        from: TrialPhase,
        to: TrialPhase,
        t: f64,
    },
    TrialCompleted(Box<CompletedTrial>),
    SessionComplete,
}

#[derive(Debug, Clone, Default)]
struct TrialTiming {
    onset: Option<f64>,
    movement_start: Option<f64>,
    entry: Option<f64>,
    end: Option<f64>,
    success: bool,
    collided: bool,
}

/// Read-only view of the live session for renderers and agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub t: f64,
    pub trial_index: usize,
    pub trial_id: Option<u32>,
    pub phase: TrialPhase,
    pub position: Vec2,
    pub velocity: Vec2,
    pub start: Vec2,
    pub target: Option<(Vec2, f64)>,
    pub obstacle: Option<Obstacle>,
    pub robot_force: Vec2,
    pub human_force: Vec2,
    pub complete: bool,
}

/// Single-owner session state; advanced only through [`Session::tick`].
#[derive(Debug, Clone)]
pub struct Session {
    cfg: SessionConfig,
    plant: PlantParams,
    trials: Vec<TrialSpec>,
    index: usize,
    phase: TrialPhase,
    state: BodyState,
    path: Vec<PathSample>,
    timing: TrialTiming,
    last_forces: Forces,
    complete: bool,
}

impl Session {
    pub fn new(cfg: SessionConfig, plant: PlantParams) -> Result<Self, TaskError> {
        let trials = generate_session(&cfg)?;
        Self::with_trials(cfg, plant, trials)
    }

    pub fn with_trials(cfg: SessionConfig, plant: PlantParams, trials: Vec<TrialSpec>) -> Result<Self, TaskError> {
        plant.validate().map_err(|_| TaskError::InvalidConfig("plant parameters"))?;
        if trials.is_empty() {
            return Err(TaskError::InvalidConfig("no trials"));
        }
        let state = BodyState::at_rest(cfg.start, 0.0);
        let mut s = Self {
            cfg,
            plant,
            trials,
            index: 0,
            phase: TrialPhase::AtStart,
            state,
            path: Vec::new(),
            timing: TrialTiming::default(),
            last_forces: Forces::default(),
            complete: false,
        };
        s.record(Forces::default());
        Ok(s)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn plant(&self) -> &PlantParams {
        &self.plant
    }

    pub fn trials(&self) -> &[TrialSpec] {
        &self.trials
    }

    pub fn state(&self) -> &BodyState {
        &self.state
    }

    pub fn phase(&self) -> TrialPhase {
        self.phase
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn current_trial(&self) -> Option<&TrialSpec> {
        self.trials.get(self.index)
    }

    pub fn onset_time(&self) -> Option<f64> {
        self.timing.onset
    }

    /// Obstacle currently on screen, if any.
    pub fn live_obstacle(&self) -> Option<&Obstacle> {
        if self.phase.target_visible() {
            self.current_trial().and_then(|t| t.obstacle.as_ref())
        } else {
            None
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let visible = self.phase.target_visible();
        let trial = self.current_trial();
        SessionSnapshot {
            t: self.state.time,
            trial_index: self.index,
            trial_id: trial.map(|t| t.trial_id),
            phase: self.phase,
            position: self.state.position,
            velocity: self.state.velocity,
            start: self.cfg.start,
            target: trial.filter(|_| visible).map(|t| (t.target_center, t.target_width)),
            obstacle: self.live_obstacle().copied(),
            robot_force: self.last_forces.robot,
            human_force: self.last_forces.human,
            complete: self.complete,
        }
    }

    fn in_start(&self) -> bool {
        self.state.position.distance(self.cfg.start) <= self.cfg.start_radius
    }

    fn record(&mut self, forces: Forces) {
        self.path.push(PathSample {
            t: self.state.time,
            position: self.state.position,
            velocity: self.state.velocity,
            human_force: forces.human,
            robot_force: forces.robot,
        });
    }

    fn transition(&mut self, to: TrialPhase, events: &mut Vec<SessionEvent>) {
        debug_assert!(self.phase.can_transition_to(to), "{:?} -> {:?}", self.phase, to);
        let trial_id = self.current_trial().map(|t| t.trial_id).unwrap_or_default();
        events.push(SessionEvent::Phase {
            trial_id,
            from: self.phase,
            to,
            t: self.state.time,
        });
        self.phase = to;
    }

    /// Sums and clamps the forces, steps the plant, checks the swept motion
    /// against the live obstacle and advances the phase machine.
    pub fn tick(&mut self, forces: Forces) -> Result<Vec<SessionEvent>, TaskError> {
        if self.complete {
            return Err(TaskError::SessionComplete);
        }
        let total = (forces.human + forces.robot).clamp_norm(self.plant.force_cap);
        let prev = self.state.position;
        self.state = step_plant(&self.state, total, &self.plant).map_err(|_| TaskError::NonFiniteForce)?;
        self.last_forces = forces;
        let now = self.state.time;
        let mut events = Vec::new();

        let collided = self
            .live_obstacle()
            .is_some_and(|o| swept_collision(prev, self.state.position, o));
        if collided {
            self.timing.collided = true;
            self.timing.end = Some(now);
            self.transition(TrialPhase::FailedCollision, &mut events);
            self.transition(TrialPhase::Returning, &mut events);
            self.record(forces);
            return Ok(events);
        }

        let trial = self.trials[self.index].clone();
        match self.phase {
            TrialPhase::AtStart => {
                if self.in_start() && self.state.speed() < self.cfg.onset_speed {
                    self.timing.onset = Some(now);
                    self.transition(TrialPhase::TargetShown, &mut events);
                }
            }
            TrialPhase::TargetShown => {
                if self.state.speed() > self.cfg.onset_speed {
                    self.timing.movement_start = Some(now);
                    self.transition(TrialPhase::Moving, &mut events);
                    if trial.contains(self.state.position) {
                        self.timing.entry = Some(now);
                        self.transition(TrialPhase::Dwelling, &mut events);
                    }
                }
            }
            TrialPhase::Moving => {
                if trial.contains(self.state.position) {
                    self.timing.entry = Some(now);
                    self.transition(TrialPhase::Dwelling, &mut events);
                }
            }
            TrialPhase::Dwelling => {
                let entry = self.timing.entry.unwrap_or(now);
                if !trial.contains(self.state.position) {
                    self.timing.entry = None;
                    self.transition(TrialPhase::Moving, &mut events);
                } else if now - entry >= self.cfg.dwell_time - 1e-9 {
                    self.timing.success = true;
                    self.timing.end = Some(now);
                    self.transition(TrialPhase::Success, &mut events);
                    self.transition(TrialPhase::Returning, &mut events);
                }
            }
            TrialPhase::Returning => {
                if self.in_start() {
                    self.record(forces);
                    self.finish_trial(&mut events);
                    return Ok(events);
                }
            }
            TrialPhase::Success | TrialPhase::FailedCollision => {
                self.transition(TrialPhase::Returning, &mut events);
            }
        }
        self.record(forces);
        Ok(events)
    }

    fn finish_trial(&mut self, events: &mut Vec<SessionEvent>) {
        let timing = std::mem::take(&mut self.timing);
        let movement_time = match (timing.success, timing.entry, timing.movement_start) {
            (true, Some(entry), Some(start)) => Some(entry - start),
            _ => None,
        };
        let last = *self.path.last().expect("path has the current sample");
        let outcome = TrialOutcome {
            success: timing.success,
            collided: timing.collided,
            movement_time,
            path: std::mem::replace(&mut self.path, vec![last]),
        };
        let done = CompletedTrial {
            spec: self.trials[self.index].clone(),
            outcome,
            onset_time: timing.onset.unwrap_or(f64::NAN),
            movement_start: timing.movement_start,
            target_entry: if timing.success { timing.entry } else { None },
            end_time: timing.end.unwrap_or(self.state.time),
        };
        events.push(SessionEvent::TrialCompleted(Box::new(done)));

        self.transition(TrialPhase::AtStart, events);
        self.index += 1;
        if self.index >= self.trials.len() {
            self.complete = true;
            self.path.clear();
            events.push(SessionEvent::SessionComplete);
        }
    }
}
