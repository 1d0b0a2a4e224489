//! Sources of the human force: a simulated person for headless runs and a
//! replay of recorded forces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{TrialPhase, TrialSpec};
use crate::geometry::Vec2;
use crate::model::{
    rollout, DmpParams, FieldLawCoeffs, GainLawCoeffs, PersonModel, PlannedTrajectory, RolloutSettings,
};
use crate::plant::BodyState;

/// What a human agent sees at a tick boundary.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub now: f64,
    pub state: &'a BodyState,
    pub phase: TrialPhase,
    pub trial: Option<&'a TrialSpec>,
    pub onset_time: Option<f64>,
    pub start: Vec2,
}

pub trait HumanAgent {
    /// Force applied by the human during the coming tick, in newtons.
    fn force(&mut self, obs: &Observation<'_>) -> Vec2;
}

/// Zero force, always.
#[derive(Debug, Clone, Copy, Default)]
pub struct Passive;

impl HumanAgent for Passive {
    fn force(&mut self, _: &Observation<'_>) -> Vec2 {
        Vec2::ZERO
    }
}

/// Leaves the reach entirely to others and only brings the point back to
/// the start between trials, with a damped spring.
#[derive(Debug, Clone, Copy)]
pub struct HomingOnly {
    pub stiffness: f64,
    pub damping: f64,
}

impl Default for HomingOnly {
    fn default() -> Self {
        Self {
            stiffness: 100.0,
            damping: 20.0,
        }
    }
}

impl HumanAgent for HomingOnly {
    fn force(&mut self, obs: &Observation<'_>) -> Vec2 {
        if obs.phase.target_visible() {
            return Vec2::ZERO;
        }
        (obs.start - obs.state.position) * self.stiffness - obs.state.velocity * self.damping
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimHumanParams {
    pub gain_laws: GainLawCoeffs,
    pub field_laws: FieldLawCoeffs,
    pub tau: f64,
    /// s, from target onset to the first applied force.
    pub reaction_delay: f64,
    /// N per m of tracking error.
    pub force_gain: f64,
    /// Standard deviation of the per-axis force noise, N.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Horizon of the person's own reaching plan, s.
    pub plan_horizon: f64,
}

impl SimHumanParams {
    /// The obstacle-avoidance laws this simulated person moves by.
    pub fn person_model(&self) -> PersonModel {
        PersonModel {
            gain_laws: self.gain_laws,
            field_laws: Some(self.field_laws),
            tau: self.tau,
        }
    }
}

/// Reference laws of the default simulated person. Gains grow with the
/// index of difficulty (slower, more damped motion for harder targets);
/// the field is stronger for obstacles close to the start.
pub fn default_gain_laws() -> GainLawCoeffs {
    GainLawCoeffs {
        k1: 10.0,
        k2: 2.0,
        k3: 4.5,
    }
}

pub fn default_field_laws() -> FieldLawCoeffs {
    FieldLawCoeffs {
        l1: 5e-4,
        l2: 0.01,
        b3: 100.0,
        b4: -20.0,
        b5: 4.0,
    }
}

impl Default for SimHumanParams {
    fn default() -> Self {
        Self {
            gain_laws: default_gain_laws(),
            field_laws: default_field_laws(),
            tau: 1.0,
            reaction_delay: 0.2,
            force_gain: 500.0,
            noise_sigma: 0.5,
            seed: 0,
            plan_horizon: 4.0,
        }
    }
}

/// Return movement back to the start: a critically damped attractor.
const RETURN_STIFFNESS: f64 = 25.0;

#[derive(Debug, Clone)]
struct ActivePlan {
    trial_id: u32,
    returning: bool,
    origin_time: f64,
    plan: PlannedTrajectory,
}

/// A person who, after a reaction delay, pulls the point along their own
/// obstacle-avoiding plan with a spring and seeded Gaussian force noise.
#[derive(Debug, Clone)]
pub struct SimHuman {
    params: SimHumanParams,
    settings: RolloutSettings,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    active: Option<ActivePlan>,
}

impl SimHuman {
    pub fn new(params: SimHumanParams, settings: RolloutSettings) -> Self {
        let noise = (params.noise_sigma > 0.0).then(|| Normal::new(0.0, params.noise_sigma).expect("finite sigma"));
        Self {
            params,
            settings,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            noise,
            active: None,
        }
    }

    pub fn params(&self) -> &SimHumanParams {
        &self.params
    }

    fn noise(&mut self) -> Vec2 {
        match &self.noise {
            Some(n) => Vec2::new(n.sample(&mut self.rng), n.sample(&mut self.rng)),
            None => Vec2::ZERO,
        }
    }

    /// Plans from wherever the point is when the person starts acting, so a
    /// reach a partner has already begun is continued rather than restarted.
    fn reach_plan(&self, trial: &TrialSpec, from: &BodyState) -> PlannedTrajectory {
        let model = self.params.person_model();
        let horizon = self.params.plan_horizon;
        match model.plan_from(trial, from, horizon, &self.settings) {
            Ok(plan) => plan,
            // A person whose own plan would collide still heads for the
            // target; the task engine will judge the outcome.
            Err(_) => model
                .plan_from(&trial.without_obstacle(), from, horizon, &self.settings)
                .expect("obstacle-free plan"),
        }
    }

    fn return_plan(&self, from: &BodyState, start: Vec2) -> PlannedTrajectory {
        let dmp = DmpParams::critically_damped(RETURN_STIFFNESS, 1.0);
        let steps = (self.params.plan_horizon / self.settings.dt).round() as usize;
        let samples = rollout(&BodyState::at_rest(from.position, 0.0), start, &dmp, None, &self.settings, steps)
            .expect("obstacle-free rollout");
        PlannedTrajectory {
            dt: self.settings.dt,
            samples,
        }
    }

    /// Force for this tick. Zero before `reaction_delay` has elapsed since
    /// target onset; afterwards `force_gain (p_t - p)` plus noise.
    pub fn sim_human_force(&mut self, obs: &Observation<'_>) -> Vec2 {
        let p = obs.state.position;
        match obs.phase {
            TrialPhase::AtStart => (obs.start - p) * self.params.force_gain + self.noise(),
            TrialPhase::TargetShown | TrialPhase::Moving | TrialPhase::Dwelling => {
                let (Some(trial), Some(onset)) = (obs.trial, obs.onset_time) else {
                    return Vec2::ZERO;
                };
                let since = obs.now - onset - self.params.reaction_delay;
                if since < 0.0 {
                    return Vec2::ZERO;
                }
                let stale = self
                    .active
                    .as_ref()
                    .is_none_or(|a| a.returning || a.trial_id != trial.trial_id);
                if stale {
                    self.active = Some(ActivePlan {
                        trial_id: trial.trial_id,
                        returning: false,
                        origin_time: obs.now,
                        plan: self.reach_plan(trial, obs.state),
                    });
                }
                let a = self.active.as_ref().expect("plan set above");
                let target = a.plan.sample_at(obs.now - a.origin_time).position;
                (target - p) * self.params.force_gain + self.noise()
            }
            TrialPhase::Success | TrialPhase::FailedCollision | TrialPhase::Returning => {
                let trial_id = obs.trial.map(|t| t.trial_id).unwrap_or_default();
                let stale = self
                    .active
                    .as_ref()
                    .is_none_or(|a| !a.returning || a.trial_id != trial_id);
                if stale {
                    self.active = Some(ActivePlan {
                        trial_id,
                        returning: true,
                        origin_time: obs.now,
                        plan: self.return_plan(obs.state, obs.start),
                    });
                }
                let a = self.active.as_ref().expect("plan set above");
                let target = a.plan.sample_at(obs.now - a.origin_time).position;
                (target - p) * self.params.force_gain + self.noise()
            }
        }
    }
}

impl HumanAgent for SimHuman {
    fn force(&mut self, obs: &Observation<'_>) -> Vec2 {
        self.sim_human_force(obs)
    }
}

/// Plays back a recorded sequence of human forces, one per tick, then zero.
#[derive(Debug, Clone)]
pub struct ReplayHuman {
    forces: std::vec::IntoIter<Vec2>,
}

impl ReplayHuman {
    pub fn new(forces: Vec<Vec2>) -> Self {
        Self {
            forces: forces.into_iter(),
        }
    }
}

impl HumanAgent for ReplayHuman {
    fn force(&mut self, _: &Observation<'_>) -> Vec2 {
        self.forces.next().unwrap_or(Vec2::ZERO)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::SizeClass;

    fn trial() -> TrialSpec {
        TrialSpec::along_axis(3, Vec2::ZERO, Vec2::new(1.0, 0.0), 0.15, SizeClass::Medium, 0.02, Some(0.04)).unwrap()
    }

    fn obs<'a>(state: &'a BodyState, trial: &'a TrialSpec, now: f64) -> Observation<'a> {
        Observation {
            now,
            state,
            phase: TrialPhase::Moving,
            trial: Some(trial),
            onset_time: Some(1.0),
            start: Vec2::ZERO,
        }
    }

    #[test]
    fn silent_during_reaction_delay() {
        let mut h = SimHuman::new(SimHumanParams::default(), RolloutSettings::default());
        let t = trial();
        let s = BodyState::at_rest(Vec2::new(0.01, 0.0), 1.1);
        assert_eq!(h.force(&obs(&s, &t, 1.1)), Vec2::ZERO);
    }

    #[test]
    fn on_reference_without_noise_is_zero() {
        let params = SimHumanParams {
            noise_sigma: 0.0,
            ..Default::default()
        };
        let mut h = SimHuman::new(params, RolloutSettings::default());
        let t = trial();
        let plan = params.person_model().plan(&t, params.plan_horizon, &RolloutSettings::default()).unwrap();
        let now = 1.0 + params.reaction_delay + 0.3;
        let s = BodyState {
            position: plan.sample_at(0.3).position,
            velocity: Vec2::ZERO,
            time: now,
        };
        assert_eq!(h.force(&obs(&s, &t, now)), Vec2::ZERO);
    }

    #[test]
    fn noise_is_seeded() {
        let t = trial();
        let s = BodyState::at_rest(Vec2::ZERO, 2.0);
        let run = |seed| {
            let mut h = SimHuman::new(SimHumanParams { seed, ..Default::default() }, RolloutSettings::default());
            (0..5).map(|_| h.force(&obs(&s, &t, 2.0))).collect::<Vec<_>>()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn replay_then_zero() {
        let mut r = ReplayHuman::new(vec![Vec2::new(1.0, 2.0)]);
        let t = trial();
        let s = BodyState::default();
        assert_eq!(r.force(&obs(&s, &t, 0.0)), Vec2::new(1.0, 2.0));
        assert_eq!(r.force(&obs(&s, &t, 0.0)), Vec2::ZERO);
    }
}
