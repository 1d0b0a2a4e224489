//! The closed loop of one session: human force plus robot partner force
//! into the task engine, one plant tick at a time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::model::PersonModel;
use crate::partner::{robot_force, PartnerState, RobotPartnerConfig, Role};
use crate::plant::PlantParams;
use crate::task::{
    CompletedTrial, Forces, HumanAgent, Observation, Session, SessionConfig, SessionEvent, SessionMode, TaskError,
    TrialPhase,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("mode {0} needs a person model for the robot partner")]
    MissingPersonModel(SessionMode),
    #[error("session did not finish within {0} ticks")]
    TickLimit(u64),
}

/// Role the robot plays in each session mode, if any.
pub fn mode_role(mode: SessionMode) -> Option<Role> {
    match mode {
        SessionMode::RobotFollower => Some(Role::Follower),
        SessionMode::RobotEqual => Some(Role::Equal),
        SessionMode::RobotLeader => Some(Role::Leader),
        SessionMode::Individual | SessionMode::HumanPairReplay => None,
    }
}

/// Robot partner settings for a session. The role is taken from the mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartnerSetup {
    pub config: RobotPartnerConfig,
    pub model: PersonModel,
}

#[derive(Debug, Clone)]
struct PartnerLoop {
    config: RobotPartnerConfig,
    model: PersonModel,
    state: PartnerState,
}

/// Session plus robot partner. The human force is supplied per tick by the
/// caller, so the same runner serves headless agents and live input.
#[derive(Debug, Clone)]
pub struct SessionRunner {
    session: Session,
    partner: Option<PartnerLoop>,
    completed: Vec<CompletedTrial>,
}

impl SessionRunner {
    pub fn new(cfg: SessionConfig, plant: PlantParams, partner: Option<PartnerSetup>) -> Result<Self, RunError> {
        let mode = cfg.mode;
        let session = Session::new(cfg, plant)?;
        let partner = match (mode_role(mode), partner) {
            (Some(role), Some(setup)) => Some(PartnerLoop {
                config: RobotPartnerConfig {
                    role,
                    ..setup.config
                },
                model: setup.model,
                state: PartnerState::default(),
            }),
            (Some(_), None) => return Err(RunError::MissingPersonModel(mode)),
            (None, _) => None,
        };
        Ok(Self {
            session,
            partner,
            completed: Vec::new(),
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn completed(&self) -> &[CompletedTrial] {
        &self.completed
    }

    pub fn into_completed(self) -> Vec<CompletedTrial> {
        self.completed
    }

    pub fn is_complete(&self) -> bool {
        self.session.is_complete()
    }

    pub fn partner_state(&self) -> Option<&PartnerState> {
        self.partner.as_ref().map(|p| &p.state)
    }

    pub fn observation(&self) -> Observation<'_> {
        Observation {
            now: self.session.state().time,
            state: self.session.state(),
            phase: self.session.phase(),
            trial: self.session.current_trial(),
            onset_time: self.session.onset_time(),
            start: self.session.config().start,
        }
    }

    /// Robot force the next tick will apply.
    pub fn robot_force(&self) -> Vec2 {
        self.partner
            .as_ref()
            .map(|p| robot_force(&p.state, self.session.state(), &p.config))
            .unwrap_or(Vec2::ZERO)
    }

    /// Advances one plant tick with the given human force. The partner
    /// replans when a target appears and lets go when the trial ends.
    pub fn step(&mut self, human: Vec2) -> Result<Vec<SessionEvent>, RunError> {
        let forces = Forces {
            human,
            robot: self.robot_force(),
        };
        let events = self.session.tick(forces)?;
        let dt = self.session.plant().dt;
        if let Some(p) = &mut self.partner {
            p.state.advance(dt);
        }
        for e in &events {
            match e {
                SessionEvent::Phase { to, t, .. } => match to {
                    TrialPhase::TargetShown => {
                        if let (Some(p), Some(trial)) = (&mut self.partner, self.session.current_trial()) {
                            p.state = p.state.retarget(trial, &p.model, *t, &p.config);
                        }
                    }
                    TrialPhase::Success | TrialPhase::FailedCollision => {
                        if let Some(p) = &mut self.partner {
                            p.state = p.state.cleared();
                        }
                    }
                    _ => {}
                },
                SessionEvent::TrialCompleted(done) => self.completed.push((**done).clone()),
                SessionEvent::SessionComplete => {}
            }
        }
        Ok(events)
    }

    /// Steps with forces from `human` until the session completes.
    pub fn run(&mut self, human: &mut dyn HumanAgent, tick_limit: u64) -> Result<(), RunError> {
        let mut ticks = 0;
        while !self.is_complete() {
            if ticks >= tick_limit {
                return Err(RunError::TickLimit(tick_limit));
            }
            let f = human.force(&self.observation());
            self.step(f)?;
            ticks += 1;
        }
        Ok(())
    }
}

/// Generous per-trial allowance for headless runs, in ticks.
pub const TICKS_PER_TRIAL: u64 = 60_000;

/// Runs a whole session headless and returns its completed trials.
pub fn run_headless(
    cfg: SessionConfig,
    plant: PlantParams,
    partner: Option<PartnerSetup>,
    human: &mut dyn HumanAgent,
) -> Result<Vec<CompletedTrial>, RunError> {
    let limit = TICKS_PER_TRIAL * cfg.trials_per_session as u64;
    let mut runner = SessionRunner::new(cfg, plant, partner)?;
    runner.run(human, limit)?;
    Ok(runner.into_completed())
}
