//! The virtual robot partner: a servo that pulls the point along the plan
//! the person's own model would produce, scaled by its leader-follower
//! coefficient.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::model::{ModelError, PersonModel, PlannedTrajectory, RolloutSettings};
use crate::plant::BodyState;
use crate::task::TrialSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartnerError {
    #[error("kp must be > 0, got {0}")]
    NonPositiveKp(f64),
    #[error("kd must be >= 0, got {0}")]
    NegativeKd(f64),
    #[error("force cap must be > 0, got {0}")]
    NonPositiveCap(f64),
    #[error("plan horizon must be > 0, got {0}")]
    NonPositiveHorizon(f64),
    #[error("unknown role '{0}'")]
    UnknownRole(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Follower,
    Equal,
    Leader,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Follower, Role::Equal, Role::Leader];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Follower => "follower",
            Role::Equal => "equal",
            Role::Leader => "leader",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = PartnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| PartnerError::UnknownRole(s.to_string()))
    }
}

/// Leader-follower coefficient `K_l`.
pub fn role_coefficient(role: Role) -> f64 {
    match role {
        Role::Follower => 0.75,
        Role::Equal => 1.0,
        Role::Leader => 1.25,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotPartnerConfig {
    /// N/m.
    pub kp: f64,
    /// N s/m.
    pub kd: f64,
    pub role: Role,
    /// N.
    pub force_cap: f64,
    /// Length of each plan, s.
    pub plan_horizon: f64,
    pub rollout: RolloutSettings,
}

impl Default for RobotPartnerConfig {
    fn default() -> Self {
        Self {
            kp: 100.0,
            kd: 20.0,
            role: Role::Equal,
            force_cap: 60.0,
            plan_horizon: 4.0,
            rollout: RolloutSettings::default(),
        }
    }
}

impl RobotPartnerConfig {
    pub fn with_role(role: Role) -> Self {
        Self {
            role,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PartnerError> {
        if !(self.kp > 0.0) {
            return Err(PartnerError::NonPositiveKp(self.kp));
        }
        if !(self.kd >= 0.0) {
            return Err(PartnerError::NegativeKd(self.kd));
        }
        if !(self.force_cap > 0.0) {
            return Err(PartnerError::NonPositiveCap(self.force_cap));
        }
        if !(self.plan_horizon > 0.0) {
            return Err(PartnerError::NonPositiveHorizon(self.plan_horizon));
        }
        Ok(())
    }
}

/// The partner's current reference. Replaced wholesale on retarget.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartnerState {
    pub plan: Option<PlannedTrajectory>,
    /// Seconds since the plan started, clamped to its horizon.
    pub plan_clock: f64,
    /// Simulation time the plan was made.
    pub planned_at: Option<f64>,
    /// Why the last retarget produced no plan.
    pub last_error: Option<ModelError>,
}

impl PartnerState {
    /// Fresh plan for `trial` from the person's fitted laws. A colliding or
    /// invalid plan leaves the partner without a plan (zero force) and the
    /// error in `last_error`.
    pub fn retarget(&self, trial: &TrialSpec, model: &PersonModel, now: f64, cfg: &RobotPartnerConfig) -> PartnerState {
        match model.plan(trial, cfg.plan_horizon, &cfg.rollout) {
            Ok(plan) => PartnerState {
                plan: Some(plan),
                plan_clock: 0.0,
                planned_at: Some(now),
                last_error: None,
            },
            Err(e) => PartnerState {
                plan: None,
                plan_clock: 0.0,
                planned_at: Some(now),
                last_error: Some(e),
            },
        }
    }

    /// Drops the plan; the partner applies no force until the next
    /// retarget.
    pub fn cleared(&self) -> PartnerState {
        PartnerState {
            last_error: self.last_error.clone(),
            ..PartnerState::default()
        }
    }

    pub fn advance(&mut self, dt: f64) {
        if let Some(plan) = &self.plan {
            self.plan_clock = (self.plan_clock + dt).min(plan.horizon());
        }
    }
}

/// `K_l (K_p (p_t - p) + K_d (v_t - v))` towards the plan sample at the
/// partner's clock, clamped to the force cap; zero without a plan.
pub fn robot_force(partner: &PartnerState, point: &BodyState, cfg: &RobotPartnerConfig) -> Vec2 {
    let Some(plan) = &partner.plan else {
        return Vec2::ZERO;
    };
    let target = plan.sample_at(partner.plan_clock);
    let servo = (target.position - point.position) * cfg.kp + (target.velocity - point.velocity) * cfg.kd;
    (servo * role_coefficient(cfg.role)).clamp_norm(cfg.force_cap)
}
