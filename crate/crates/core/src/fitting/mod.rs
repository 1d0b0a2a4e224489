//! Identification of a person's model from recorded reaches: per-trial
//! simplex fits of `(K, D)` and `(lambda, beta)`, then least-squares
//! regression onto the difficulty and obstacle-distance laws.

mod simplex;

pub use simplex::{minimize, minimize_restarted, SimplexOptions, SimplexResult};

/// Restarts of the simplex from its converged point.
pub const RESTARTS: usize = 3;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{segment_distance, swept_collision, Vec2};
use crate::model::{
    rollout, DmpParams, FieldLawCoeffs, FieldParams, GainLawCoeffs, ModelError, PassSide, PersonModel,
    RolloutSettings,
};
use crate::plant::BodyState;
use crate::task::{CompletedTrial, TrialOutcome, TrialSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("recording spans {0:.3} s; at least {MIN_DURATION} s is needed")]
    TrajectoryTooShort(f64),
    #[error("simplex used {evals} evaluations without converging (spread {spread:e})")]
    FitDiverged { evals: usize, spread: f64 },
    #[error("trial {0} collided and cannot be fitted")]
    CollidedTrialRejected(u32),
    #[error("{found} distinct conditions; at least 3 are needed")]
    InsufficientConditions { found: usize },
    #[error("trial {0} has no obstacle")]
    MissingObstacle(u32),
    #[error("trial {0} has an obstacle; gains are fitted on obstacle-free trials")]
    UnexpectedObstacle(u32),
    #[error("inconsistent recording: {0}")]
    InconsistentRecording(&'static str),
    #[error("regressed laws are invalid: {0}")]
    InvalidLaws(ModelError),
}

/// Shortest recording a fit accepts, s.
pub const MIN_DURATION: f64 = 0.3;

/// Initial guess for the field fit.
pub const LAMBDA_0: f64 = 0.01;
pub const BETA_0: f64 = 4.0;

/// One trial's measured movement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedTrial {
    pub trial: TrialSpec,
    pub states: Vec<BodyState>,
    pub outcome: TrialOutcome,
}

impl RecordedTrial {
    /// Checks uniform sampling and that the collision flag agrees with a
    /// swept check of the states against the trial's obstacle.
    pub fn new(trial: TrialSpec, states: Vec<BodyState>, outcome: TrialOutcome) -> Result<Self, FitError> {
        if states.is_empty() {
            return Err(FitError::InconsistentRecording("no states"));
        }
        if states.iter().any(|s| !s.position.is_finite() || !s.velocity.is_finite()) {
            return Err(FitError::InconsistentRecording("non-finite state"));
        }
        if states.len() > 1 {
            let dt = states[1].time - states[0].time;
            if !(dt > 0.0) {
                return Err(FitError::InconsistentRecording("time must increase"));
            }
            let uniform = states
                .windows(2)
                .all(|w| ((w[1].time - w[0].time) - dt).abs() <= 1e-9 * dt.max(1.0));
            if !uniform {
                return Err(FitError::InconsistentRecording("non-uniform sampling"));
            }
        }
        let swept = trial.obstacle.is_some_and(|o| {
            states
                .windows(2)
                .any(|w| swept_collision(w[0].position, w[1].position, &o))
        });
        if swept != outcome.collided {
            return Err(FitError::InconsistentRecording("collision flag disagrees with states"));
        }
        Ok(Self { trial, states, outcome })
    }

    /// The reaching part of a completed session trial: from the first tick
    /// above the onset speed up to success or collision.
    pub fn from_completed(done: &CompletedTrial) -> Result<Self, FitError> {
        let Some(from) = done.movement_start else {
            return Err(FitError::TrajectoryTooShort(0.0));
        };
        let half_tick = 0.5 * (done.outcome.path.get(1).map(|s| s.t).unwrap_or(0.0)
            - done.outcome.path.first().map(|s| s.t).unwrap_or(0.0))
        .abs();
        let states: Vec<BodyState> = done
            .outcome
            .path
            .iter()
            .filter(|s| s.t >= from - half_tick && s.t <= done.end_time + half_tick)
            .map(|s| s.body_state())
            .collect();
        let outcome = TrialOutcome {
            path: Vec::new(),
            ..done.outcome.clone()
        };
        Self::new(done.spec.clone(), states, outcome)
    }

    pub fn duration(&self) -> f64 {
        match (self.states.first(), self.states.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    pub fn dt(&self) -> f64 {
        if self.states.len() > 1 {
            self.states[1].time - self.states[0].time
        } else {
            0.0
        }
    }

    /// Side of the start-goal line the recording passes the obstacle on,
    /// read where the path comes closest to the obstacle.
    pub fn pass_side(&self) -> PassSide {
        let start = self.trial.start;
        let (Some(dir), Some(obstacle)) = ((self.trial.goal() - start).normalized(), self.trial.obstacle) else {
            return PassSide::Left;
        };
        let nearest = self.states.iter().min_by(|a, b| {
            segment_distance(a.position, &obstacle)
                .distance
                .total_cmp(&segment_distance(b.position, &obstacle).distance)
        });
        match nearest {
            Some(s) if dir.cross(s.position - start) < 0.0 => PassSide::Right,
            _ => PassSide::Left,
        }
    }

    fn net_displacement(&self) -> f64 {
        self.states
            .iter()
            .map(|s| s.position.distance(self.states[0].position))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmpFit {
    pub spring_k: f64,
    pub damping_d: f64,
    /// m.
    pub rmse: f64,
    pub evals: usize,
    /// The recording did not move, or the objective ignored the parameters.
    pub ill_conditioned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldFit {
    pub lambda: f64,
    pub beta: f64,
    pub rmse: f64,
    pub evals: usize,
    pub ill_conditioned: bool,
}

/// Objective value for parameters outside the model's domain or rollouts
/// that fail; graded by how far out they are so the simplex can walk back.
fn penalty(violation: f64) -> f64 {
    1.0 + violation.abs().min(1e6)
}

/// Position RMSE of the model rollout against the recording.
fn position_rmse(
    rec: &RecordedTrial,
    dmp: &DmpParams,
    field: Option<&FieldParams>,
    settings: &RolloutSettings,
) -> Result<f64, ModelError> {
    let steps = rec.states.len() - 1;
    let field = match (rec.trial.obstacle.as_ref(), field) {
        (Some(o), Some(f)) => Some((o, f)),
        _ => None,
    };
    let sim = rollout(&rec.states[0], rec.trial.goal(), dmp, field, settings, steps)?;
    let sse: f64 = sim
        .iter()
        .zip(&rec.states)
        .map(|(a, b)| (a.position - b.position).norm_squared())
        .sum();
    Ok((sse / rec.states.len() as f64).sqrt())
}

fn rollout_settings(rec: &RecordedTrial) -> RolloutSettings {
    RolloutSettings {
        dt: rec.dt(),
        pass_side: rec.pass_side(),
        ..RolloutSettings::default()
    }
}

fn check_length(rec: &RecordedTrial) -> Result<(), FitError> {
    let d = rec.duration();
    if d < MIN_DURATION - 1e-9 || rec.states.len() < 2 {
        return Err(FitError::TrajectoryTooShort(d));
    }
    Ok(())
}

fn converged(r: &SimplexResult) -> Result<(), FitError> {
    if r.converged {
        Ok(())
    } else {
        Err(FitError::FitDiverged {
            evals: r.evals,
            spread: r.trace.last().copied().unwrap_or(f64::NAN),
        })
    }
}

/// Fits `(K, D)` to an obstacle-free recording by Nelder-Mead on position
/// RMSE, starting from the critically damped guess `K0 = 25 / tau²`,
/// `D0 = 2 sqrt(K0)`.
pub fn fit_dmp_trial(rec: &RecordedTrial, tau: f64) -> Result<DmpFit, FitError> {
    if rec.trial.obstacle.is_some() {
        return Err(FitError::UnexpectedObstacle(rec.trial.trial_id));
    }
    check_length(rec)?;
    DmpParams::new(1.0, 0.0, tau).map_err(FitError::InvalidLaws)?;
    let settings = rollout_settings(rec);
    let k0 = 25.0 / (tau * tau);
    let d0 = 2.0 * k0.sqrt();
    let objective = |x: &[f64]| match DmpParams::new(x[0], x[1], tau) {
        Ok(dmp) => position_rmse(rec, &dmp, None, &settings).unwrap_or_else(|_| penalty(0.0)),
        Err(_) => penalty(x[0].min(0.0) + x[1].min(0.0)),
    };
    let r = minimize_restarted(objective, &[k0, d0], &SimplexOptions::default(), RESTARTS);
    converged(&r)?;
    Ok(DmpFit {
        spring_k: r.x[0],
        damping_d: r.x[1],
        rmse: r.fun,
        evals: r.evals,
        ill_conditioned: r.initial_spread == 0.0 || rec.net_displacement() < 1e-6,
    })
}

/// Fits `(lambda, beta)` to a successful obstacle recording with `K`, `D`
/// fixed by `gains` at the trial's difficulty index.
pub fn fit_field_trial(rec: &RecordedTrial, gains: &GainLawCoeffs, tau: f64) -> Result<FieldFit, FitError> {
    if rec.trial.obstacle.is_none() {
        return Err(FitError::MissingObstacle(rec.trial.trial_id));
    }
    if rec.outcome.collided {
        return Err(FitError::CollidedTrialRejected(rec.trial.trial_id));
    }
    check_length(rec)?;
    let dmp = gains.dmp_params(rec.trial.id_bits, tau).map_err(FitError::InvalidLaws)?;
    let settings = rollout_settings(rec);
    let objective = |x: &[f64]| match FieldParams::new(x[0], x[1]) {
        Ok(field) => match position_rmse(rec, &dmp, Some(&field), &settings) {
            Ok(v) => v,
            Err(ModelError::PlanCollision { time, .. }) => penalty(rec.duration() - time),
            Err(_) => penalty(0.0),
        },
        Err(_) => penalty(x[0].min(0.0) + (x[1] - 1.0).min(0.0)),
    };
    let r = minimize_restarted(objective, &[LAMBDA_0, BETA_0], &SimplexOptions::default(), RESTARTS);
    converged(&r)?;
    Ok(FieldFit {
        lambda: r.x[0],
        beta: r.x[1],
        rmse: r.fun,
        evals: r.evals,
        ill_conditioned: r.initial_spread == 0.0 || rec.net_displacement() < 1e-6,
    })
}

fn distinct_count(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1e-12));
    v.len()
}

fn least_squares(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Vec<f64> {
    let cols = rows[0].len();
    let a = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let b = DVector::from_vec(y);
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-14).expect("U and V were computed");
    x.iter().copied().collect()
}

fn value_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Ordinary least squares of `K = k1 ID + k2` and `D = k3 ID` (no
/// intercept) over `(ID, K, D)` points.
pub fn regress_gain_laws(points: &[(f64, f64, f64)]) -> Result<GainLawCoeffs, FitError> {
    let found = distinct_count(points.iter().map(|p| p.0));
    if found < 3 {
        return Err(FitError::InsufficientConditions { found });
    }
    let k = least_squares(points.iter().map(|p| vec![p.0, 1.0]).collect(), points.iter().map(|p| p.1).collect());
    let sxy: f64 = points.iter().map(|p| p.0 * p.2).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let range = value_range(points.iter().map(|p| p.0));
    GainLawCoeffs::new(k[0], k[1], sxy / sxx, range).map_err(FitError::InvalidLaws)
}

/// Least squares of `lambda` on `(1/o, 1)` and `beta` on `(o², o, 1)` over
/// `(o, lambda, beta)` points.
pub fn regress_field_laws(points: &[(f64, f64, f64)]) -> Result<FieldLawCoeffs, FitError> {
    let found = distinct_count(points.iter().map(|p| p.0));
    if found < 3 {
        return Err(FitError::InsufficientConditions { found });
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0)) {
        return Err(FitError::InvalidLaws(ModelError::ZeroObstacleDistance(p.0)));
    }
    let l = least_squares(
        points.iter().map(|p| vec![1.0 / p.0, 1.0]).collect(),
        points.iter().map(|p| p.1).collect(),
    );
    let b = least_squares(
        points.iter().map(|p| vec![p.0 * p.0, p.0, 1.0]).collect(),
        points.iter().map(|p| p.2).collect(),
    );
    let range = value_range(points.iter().map(|p| p.0));
    FieldLawCoeffs::new(l[0], l[1], b[0], b[1], b[2], range).map_err(FitError::InvalidLaws)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFit {
    pub trial_id: u32,
    pub id_bits: f64,
    pub obstacle_distance: Option<f64>,
    /// Fitted for obstacle-free trials; taken from the gain laws otherwise.
    pub spring_k: f64,
    pub damping_d: f64,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub rmse: f64,
    pub evals: usize,
    pub ill_conditioned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub trial_id: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub count: usize,
    pub mean_rmse: f64,
    pub max_rmse: f64,
}

impl ResidualSummary {
    fn of<'a>(fits: impl Iterator<Item = &'a TrialFit>) -> Self {
        let rmse: Vec<f64> = fits.map(|f| f.rmse).collect();
        if rmse.is_empty() {
            return Self::default();
        }
        Self {
            count: rmse.len(),
            mean_rmse: rmse.iter().sum::<f64>() / rmse.len() as f64,
            max_rmse: rmse.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub gain_residuals: ResidualSummary,
    pub field_residuals: ResidualSummary,
    pub rejected: Vec<Rejection>,
    pub ill_conditioned: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub tau: f64,
    pub per_trial: Vec<TrialFit>,
    pub gain_laws: GainLawCoeffs,
    /// Present only with at least three distinct obstacle distances among
    /// the successfully fitted obstacle trials.
    pub field_laws: Option<FieldLawCoeffs>,
    pub diagnostics: FitDiagnostics,
}

impl FitReport {
    pub fn person_model(&self) -> PersonModel {
        PersonModel {
            gain_laws: self.gain_laws,
            field_laws: self.field_laws,
            tau: self.tau,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Two-stage identification over a whole session: gains from the
/// obstacle-free trials, then the field from successful obstacle trials
/// with the gains frozen. Trials that cannot be fitted are listed in the
/// diagnostics; the per-trial fits run in parallel.
pub fn fit_session(records: &[RecordedTrial], tau: f64) -> Result<FitReport, FitError> {
    let mut diagnostics = FitDiagnostics::default();
    let reject = |d: &mut FitDiagnostics, id: u32, e: &FitError| {
        d.rejected.push(Rejection {
            trial_id: id,
            reason: e.to_string(),
        })
    };

    let free: Vec<&RecordedTrial> = records.iter().filter(|r| r.trial.obstacle.is_none()).collect();
    let gain_results: Vec<_> = free.par_iter().map(|r| fit_dmp_trial(r, tau)).collect();
    let mut per_trial = Vec::new();
    for (rec, res) in free.iter().zip(gain_results) {
        match res {
            Ok(f) => per_trial.push(TrialFit {
                trial_id: rec.trial.trial_id,
                id_bits: rec.trial.id_bits,
                obstacle_distance: None,
                spring_k: f.spring_k,
                damping_d: f.damping_d,
                lambda: None,
                beta: None,
                rmse: f.rmse,
                evals: f.evals,
                ill_conditioned: f.ill_conditioned,
            }),
            Err(e) => reject(&mut diagnostics, rec.trial.trial_id, &e),
        }
    }
    let gain_points: Vec<_> = per_trial
        .iter()
        .filter(|f| !f.ill_conditioned)
        .map(|f| (f.id_bits, f.spring_k, f.damping_d))
        .collect();
    let gain_laws = regress_gain_laws(&gain_points)?;

    let obstructed: Vec<&RecordedTrial> = records.iter().filter(|r| r.trial.obstacle.is_some()).collect();
    let field_results: Vec<_> = obstructed
        .par_iter()
        .map(|r| fit_field_trial(r, &gain_laws, tau))
        .collect();
    let first_field = per_trial.len();
    for (rec, res) in obstructed.iter().zip(field_results) {
        match res {
            Ok(f) => {
                let dmp = gain_laws.dmp_params(rec.trial.id_bits, tau).map_err(FitError::InvalidLaws)?;
                per_trial.push(TrialFit {
                    trial_id: rec.trial.trial_id,
                    id_bits: rec.trial.id_bits,
                    obstacle_distance: rec.trial.obstacle_distance(),
                    spring_k: dmp.spring_k,
                    damping_d: dmp.damping_d,
                    lambda: Some(f.lambda),
                    beta: Some(f.beta),
                    rmse: f.rmse,
                    evals: f.evals,
                    ill_conditioned: f.ill_conditioned,
                })
            }
            Err(e) => reject(&mut diagnostics, rec.trial.trial_id, &e),
        }
    }
    let field_points: Vec<_> = per_trial[first_field..]
        .iter()
        .filter(|f| !f.ill_conditioned)
        .filter_map(|f| Some((f.obstacle_distance?, f.lambda?, f.beta?)))
        .collect();
    let field_laws = match regress_field_laws(&field_points) {
        Ok(l) => Some(l),
        Err(FitError::InsufficientConditions { .. }) => None,
        Err(e) => return Err(e),
    };

    diagnostics.gain_residuals = ResidualSummary::of(per_trial[..first_field].iter());
    diagnostics.field_residuals = ResidualSummary::of(per_trial[first_field..].iter());
    diagnostics.ill_conditioned = per_trial.iter().filter(|f| f.ill_conditioned).map(|f| f.trial_id).collect();
    Ok(FitReport {
        tau,
        per_trial,
        gain_laws,
        field_laws,
        diagnostics,
    })
}

/// Samples of an obstacle-free or obstacle rollout as a recording, for
/// synthetic data.
pub fn recording_from_rollout(
    trial: &TrialSpec,
    samples: &[crate::model::PlanSample],
    dt: f64,
) -> Result<RecordedTrial, FitError> {
    let states: Vec<BodyState> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| BodyState {
            position: s.position,
            velocity: s.velocity,
            time: i as f64 * dt,
        })
        .collect();
    let collided = trial.obstacle.is_some_and(|o| {
        states
            .windows(2)
            .any(|w| swept_collision(w[0].position, w[1].position, &o))
    });
    let outcome = TrialOutcome {
        success: !collided && trial.contains(states.last().map(|s| s.position).unwrap_or(Vec2::ZERO)),
        collided,
        movement_time: None,
        path: Vec::new(),
    };
    RecordedTrial::new(trial.clone(), states, outcome)
}

/// Noise-free recordings of a person who moves exactly by `model`, one per
/// trial, each `secs` long.
pub fn synthetic_recordings(
    trials: &[TrialSpec],
    model: &PersonModel,
    secs: f64,
    settings: &RolloutSettings,
) -> Result<Vec<RecordedTrial>, FitError> {
    trials
        .par_iter()
        .map(|t| {
            let plan = model.plan(t, secs, settings).map_err(FitError::InvalidLaws)?;
            recording_from_rollout(t, &plan.samples, plan.dt)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlannedTrajectory;
    use crate::task::SizeClass;

    fn free_trial(distance: f64, size: SizeClass, width: f64) -> TrialSpec {
        TrialSpec::along_axis(1, Vec2::ZERO, Vec2::new(1.0, 0.0), distance, size, width, None).unwrap()
    }

    fn obstacle_trial(distance: f64) -> TrialSpec {
        TrialSpec::along_axis(2, Vec2::ZERO, Vec2::new(1.0, 0.0), distance, SizeClass::Medium, 0.02, Some(0.04)).unwrap()
    }

    fn synth(trial: &TrialSpec, k: f64, d: f64, field: Option<FieldParams>, secs: f64) -> RecordedTrial {
        let settings = RolloutSettings::default();
        let dmp = DmpParams::new(k, d, 1.0).unwrap();
        let samples = rollout(
            &BodyState::at_rest(trial.start, 0.0),
            trial.goal(),
            &dmp,
            trial.obstacle.as_ref().zip(field.as_ref()),
            &settings,
            (secs / settings.dt).round() as usize,
        )
        .unwrap();
        recording_from_rollout(trial, &samples, settings.dt).unwrap()
    }

    #[test]
    fn recovers_known_gains() {
        let rec = synth(&free_trial(0.15, SizeClass::Medium, 0.02), 30.0, 11.0, None, 1.5);
        let f = fit_dmp_trial(&rec, 1.0).unwrap();
        assert!((f.spring_k / 30.0 - 1.0).abs() < 0.02, "{f:?}");
        assert!((f.damping_d / 11.0 - 1.0).abs() < 0.02, "{f:?}");
        assert!(f.rmse < 1e-6);
        assert!(!f.ill_conditioned);
    }

    #[test]
    fn initial_guess_is_returned() {
        let rec = synth(&free_trial(0.15, SizeClass::Medium, 0.02), 25.0, 10.0, None, 1.5);
        let f = fit_dmp_trial(&rec, 1.0).unwrap();
        assert_eq!((f.spring_k, f.damping_d), (25.0, 10.0));
        assert_eq!(f.rmse, 0.0);
    }

    #[test]
    fn still_recording_is_flagged() {
        let trial = free_trial(0.15, SizeClass::Medium, 0.02);
        let states = (0..600).map(|i| BodyState::at_rest(Vec2::ZERO, i as f64 * 0.001)).collect();
        let outcome = TrialOutcome {
            success: false,
            collided: false,
            movement_time: None,
            path: Vec::new(),
        };
        let rec = RecordedTrial::new(trial, states, outcome).unwrap();
        match fit_dmp_trial(&rec, 1.0) {
            Ok(f) => assert!(f.ill_conditioned),
            Err(e) => assert!(matches!(e, FitError::FitDiverged { .. })),
        }
    }

    #[test]
    fn short_recording_rejected() {
        let rec = synth(&free_trial(0.15, SizeClass::Medium, 0.02), 30.0, 11.0, None, 0.2);
        assert!(matches!(fit_dmp_trial(&rec, 1.0), Err(FitError::TrajectoryTooShort(_))));
    }

    #[test]
    fn recovers_known_field() {
        let trial = obstacle_trial(0.15);
        let gains = GainLawCoeffs {
            k1: 10.0,
            k2: 2.0,
            k3: 4.5,
        };
        let dmp = gains.dmp_params(trial.id_bits, 1.0).unwrap();
        let rec = synth(&trial, dmp.spring_k, dmp.damping_d, Some(FieldParams::new(0.02, 3.0).unwrap()), 2.0);
        let f = fit_field_trial(&rec, &gains, 1.0).unwrap();
        assert!((f.lambda / 0.02 - 1.0).abs() < 0.1, "{f:?}");
        assert!((f.beta / 3.0 - 1.0).abs() < 0.1, "{f:?}");
        assert!(f.rmse < 1e-5, "{f:?}");
    }

    #[test]
    fn null_field_gives_small_lambda() {
        let trial = obstacle_trial(0.25);
        let gains = GainLawCoeffs {
            k1: 10.0,
            k2: 2.0,
            k3: 4.5,
        };
        let dmp = gains.dmp_params(trial.id_bits, 1.0).unwrap();
        // Aim beside the obstacle so the field-free reach does not hit it.
        let mut trial = trial;
        trial.target_center = Vec2::new(0.25, 0.06);
        let rec = synth(&trial, dmp.spring_k, dmp.damping_d, None, 2.0);
        let f = fit_field_trial(&rec, &gains, 1.0).unwrap();
        assert!(f.lambda < 1e-4, "{f:?}");
    }

    #[test]
    fn collided_recording_rejected() {
        let trial = obstacle_trial(0.15);
        let plan = PlannedTrajectory {
            dt: 0.001,
            samples: (0..=1000)
                .map(|i| crate::model::PlanSample {
                    position: Vec2::new(0.15 * i as f64 / 1000.0, 0.0),
                    velocity: Vec2::new(0.15, 0.0),
                })
                .collect(),
        };
        let rec = recording_from_rollout(&trial, &plan.samples, plan.dt).unwrap();
        assert!(rec.outcome.collided);
        let gains = GainLawCoeffs {
            k1: 10.0,
            k2: 2.0,
            k3: 4.5,
        };
        assert_eq!(fit_field_trial(&rec, &gains, 1.0), Err(FitError::CollidedTrialRejected(2)));
    }

    #[test]
    fn inconsistent_collision_flag_rejected() {
        let trial = obstacle_trial(0.15);
        let states = (0..=10)
            .map(|i| BodyState::at_rest(Vec2::new(0.015 * i as f64, 0.0), i as f64 * 0.001))
            .collect();
        let outcome = TrialOutcome {
            success: true,
            collided: false,
            movement_time: None,
            path: Vec::new(),
        };
        assert!(matches!(
            RecordedTrial::new(trial, states, outcome),
            Err(FitError::InconsistentRecording(_))
        ));
    }

    #[test]
    fn exact_gain_regression() {
        let pts: Vec<_> = [1.0, 2.0, 3.0, 2.5].iter().map(|&i| (i, 2.0 * i + 1.0, 3.0 * i)).collect();
        let g = regress_gain_laws(&pts).unwrap();
        assert!((g.k1 - 2.0).abs() < 1e-9 && (g.k2 - 1.0).abs() < 1e-9 && (g.k3 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn repeated_id_is_insufficient() {
        let pts = vec![(2.0, 5.0, 6.0); 10];
        assert_eq!(regress_gain_laws(&pts), Err(FitError::InsufficientConditions { found: 1 }));
    }

    #[test]
    fn exact_field_regression() {
        let pts: Vec<_> = [0.025, 0.075, 0.125]
            .iter()
            .map(|&o| (o, 0.001 / o + 0.05, 10.0 * o * o - 2.0 * o + 4.0))
            .collect();
        let f = regress_field_laws(&pts).unwrap();
        let want = [0.001, 0.05, 10.0, -2.0, 4.0];
        let got = [f.l1, f.l2, f.b3, f.b4, f.b5];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-9, "{got:?}");
        }
    }

    #[test]
    fn duplicate_obstacle_distances_insufficient() {
        let pts = vec![(0.075, 0.02, 3.0), (0.075, 0.02, 3.0), (0.125, 0.01, 3.0)];
        assert_eq!(regress_field_laws(&pts), Err(FitError::InsufficientConditions { found: 2 }));
    }

    #[test]
    fn fitting_is_deterministic() {
        let rec = synth(&free_trial(0.25, SizeClass::Small, 0.01), 40.0, 14.0, None, 1.5);
        assert_eq!(fit_dmp_trial(&rec, 1.0), fit_dmp_trial(&rec, 1.0));
    }
}
