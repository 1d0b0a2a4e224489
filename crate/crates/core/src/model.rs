//! The obstacle avoidance model: a linear point-attractor DMP whose gains
//! follow the target's index of difficulty, coupled to a velocity-dependent
//! repulsive potential field around a line obstacle whose strength and
//! exponent follow the obstacle distance.
//!
//! The transformation system is
//!
//! ```text
//! tau * v' = K (g - x) - D v + phi(x, v)
//! tau * x' = v
//! ```
//!
//! with `K = k1 ID + k2`, `D = k3 ID`, `lambda = l1 / o + l2` and
//! `beta = b3 o^2 + b4 o + b5`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{segment_distance, swept_collision, Obstacle, SegmentDistance, Vec2};
use crate::plant::BodyState;
use crate::task::TrialSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("stiffness K = {0} must be positive")]
    NonPositiveStiffness(f64),
    #[error("damping D = {0} must be non-negative")]
    NegativeDamping(f64),
    #[error("obstacle distance o = {0} must be positive")]
    ZeroObstacleDistance(f64),
    #[error("field exponent beta = {0} must exceed 1")]
    BetaOutOfRange(f64),
    #[error("field strength lambda = {0} must be non-negative")]
    NegativeLambda(f64),
    #[error("tau = {0} must be positive")]
    NonPositiveTau(f64),
    #[error("point is on the obstacle; the field is singular")]
    CollisionState,
    #[error("planned path collides with the obstacle at t = {time:.4} s")]
    PlanCollision { time: f64, position: Vec2 },
    #[error("invalid planning setting: {0}")]
    InvalidSettings(&'static str),
}

/// Spring, damping and time constant of the transformation system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmpParams {
    /// K, 1/s²
    pub spring_k: f64,
    /// D, 1/s
    pub damping_d: f64,
    /// tau, s
    pub tau: f64,
}

impl DmpParams {
    pub fn new(spring_k: f64, damping_d: f64, tau: f64) -> Result<Self, ModelError> {
        if !(spring_k > 0.0) {
            return Err(ModelError::NonPositiveStiffness(spring_k));
        }
        if !(damping_d >= 0.0) {
            return Err(ModelError::NegativeDamping(damping_d));
        }
        if !(tau > 0.0) {
            return Err(ModelError::NonPositiveTau(tau));
        }
        Ok(Self {
            spring_k,
            damping_d,
            tau,
        })
    }

    /// Gains giving a critically damped response for the given `tau`.
    pub fn critically_damped(spring_k: f64, tau: f64) -> Self {
        Self {
            spring_k,
            damping_d: 2.0 * spring_k.sqrt(),
            tau,
        }
    }
}

/// Coefficients of `K = k1 ID + k2` and `D = k3 ID`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainLawCoeffs {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl GainLawCoeffs {
    /// Builds the laws and checks `K > 0`, `D >= 0` over `id_range` (bits).
    /// Both laws are affine so checking the interval ends suffices.
    pub fn new(k1: f64, k2: f64, k3: f64, id_range: (f64, f64)) -> Result<Self, ModelError> {
        let c = Self { k1, k2, k3 };
        for id in [id_range.0, id_range.1] {
            stiffness_from_id(id, &c)?;
            damping_from_id(id, &c)?;
        }
        Ok(c)
    }

    pub fn dmp_params(&self, id_bits: f64, tau: f64) -> Result<DmpParams, ModelError> {
        DmpParams::new(stiffness_from_id(id_bits, self)?, damping_from_id(id_bits, self)?, tau)
    }
}

pub fn stiffness_from_id(id_bits: f64, coeffs: &GainLawCoeffs) -> Result<f64, ModelError> {
    let k = coeffs.k1 * id_bits + coeffs.k2;
    if !(k > 0.0) {
        return Err(ModelError::NonPositiveStiffness(k));
    }
    Ok(k)
}

pub fn damping_from_id(id_bits: f64, coeffs: &GainLawCoeffs) -> Result<f64, ModelError> {
    let d = coeffs.k3 * id_bits;
    if !(d >= 0.0) {
        return Err(ModelError::NegativeDamping(d));
    }
    Ok(d)
}

/// Strength and exponent of the dynamic potential field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub lambda: f64,
    pub beta: f64,
}

impl FieldParams {
    pub fn new(lambda: f64, beta: f64) -> Result<Self, ModelError> {
        if !(lambda >= 0.0) {
            return Err(ModelError::NegativeLambda(lambda));
        }
        if !(beta > 1.0) {
            return Err(ModelError::BetaOutOfRange(beta));
        }
        Ok(Self { lambda, beta })
    }
}

/// Coefficients of `lambda = l1 / o + l2` and `beta = b3 o² + b4 o + b5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldLawCoeffs {
    pub l1: f64,
    pub l2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
}

impl FieldLawCoeffs {
    /// Builds the laws and checks `lambda >= 0` and `beta > 1` over
    /// `o_range` (m), including the interior vertex of the beta parabola.
    pub fn new(l1: f64, l2: f64, b3: f64, b4: f64, b5: f64, o_range: (f64, f64)) -> Result<Self, ModelError> {
        let c = Self { l1, l2, b3, b4, b5 };
        let (lo, hi) = o_range;
        for o in [lo, hi] {
            let lambda = lambda_from_obstacle(o, &c)?;
            if lambda < 0.0 {
                return Err(ModelError::NegativeLambda(lambda));
            }
            beta_from_obstacle(o, &c)?;
        }
        if b3 != 0.0 {
            let vertex = -b4 / (2.0 * b3);
            if vertex > lo && vertex < hi {
                beta_from_obstacle(vertex, &c)?;
            }
        }
        Ok(c)
    }

    pub fn field_params(&self, o: f64) -> Result<FieldParams, ModelError> {
        FieldParams::new(lambda_from_obstacle(o, self)?, beta_from_obstacle(o, self)?)
    }
}

pub fn lambda_from_obstacle(o: f64, coeffs: &FieldLawCoeffs) -> Result<f64, ModelError> {
    if !(o > 0.0) {
        return Err(ModelError::ZeroObstacleDistance(o));
    }
    Ok(coeffs.l1 / o + coeffs.l2)
}

pub fn beta_from_obstacle(o: f64, coeffs: &FieldLawCoeffs) -> Result<f64, ModelError> {
    if !(o > 0.0) {
        return Err(ModelError::ZeroObstacleDistance(o));
    }
    let beta = coeffs.b3 * o * o + coeffs.b4 * o + coeffs.b5;
    if !(beta > 1.0) {
        return Err(ModelError::BetaOutOfRange(beta));
    }
    Ok(beta)
}

/// Guards around the `p -> 0` singularity of the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldLimits {
    /// The field is switched off at distances `>= cutoff` (m).
    pub cutoff: f64,
    /// Magnitude cap on the field acceleration (m/s²).
    pub accel_cap: f64,
}

impl Default for FieldLimits {
    fn default() -> Self {
        Self {
            cutoff: 0.1,
            accel_cap: 50.0,
        }
    }
}

impl FieldLimits {
    /// No cutoff and no cap; exposes the raw field.
    pub const UNBOUNDED: FieldLimits = FieldLimits {
        cutoff: f64::INFINITY,
        accel_cap: f64::INFINITY,
    };
}

/// Point-attractor acceleration `(K (g - x) - D v) / tau`.
pub fn dmp_accel(state: &BodyState, goal: Vec2, params: &DmpParams) -> Vec2 {
    ((goal - state.position) * params.spring_k - state.velocity * params.damping_d) / params.tau
}

/// Repulsive coupling term, or `None` while the field is inactive.
fn field_term(
    position: Vec2,
    velocity: Vec2,
    obstacle: &Obstacle,
    field: &FieldParams,
    limits: &FieldLimits,
) -> Result<Option<Vec2>, ModelError> {
    let SegmentDistance { distance: p, closest } = segment_distance(position, obstacle);
    if p == 0.0 {
        return Err(ModelError::CollisionState);
    }
    let speed = velocity.norm();
    if speed == 0.0 || p >= limits.cutoff || field.lambda == 0.0 {
        return Ok(None);
    }
    let offset = position - closest;
    let grad_p = offset / p;
    let cos_theta = velocity.dot(grad_p) / speed;
    if cos_theta >= 0.0 {
        return Ok(None);
    }
    // Closest point held fixed while differentiating.
    let grad_cos = velocity / (speed * p) - offset * (cos_theta / (p * p));
    let scale = field.lambda * (-cos_theta).powf(field.beta - 1.0) * speed / p;
    let phi = (grad_cos * field.beta - grad_p * (cos_theta / p)) * scale;
    Ok(Some(phi.clamp_norm(limits.accel_cap)))
}

/// The coupling term `phi(x, v)`: negative gradient of the dynamic potential
/// `U = lambda (-cos theta)^beta |v| / p`, active only while moving towards
/// the obstacle (`cos theta = v . grad p / |v| < 0`) and inside the cutoff.
pub fn field_accel(
    state: &BodyState,
    obstacle: &Obstacle,
    field: &FieldParams,
    limits: &FieldLimits,
) -> Result<Vec2, ModelError> {
    Ok(field_term(state.position, state.velocity, obstacle, field, limits)?.unwrap_or(Vec2::ZERO))
}

/// Which side of the obstacle a perfectly head-on approach is steered to,
/// relative to the start-to-goal direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassSide {
    #[default]
    Left,
    Right,
}

impl PassSide {
    fn sign(self) -> f64 {
        match self {
            PassSide::Left => 1.0,
            PassSide::Right => -1.0,
        }
    }
}

/// Integration settings shared by planning and fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutSettings {
    /// Sample spacing (s); equal to the plant step.
    pub dt: f64,
    pub limits: FieldLimits,
    /// Lateral speed (m/s) injected once, the first time the field is active
    /// within `seed_distance` of the obstacle. A symmetric head-on approach
    /// is an unstable equilibrium of the field; the kick picks the side:
    /// that of the lateral motion already present if it exceeds
    /// `follow_speed`, otherwise `pass_side`.
    pub lateral_seed: f64,
    /// Obstacle distance (m) inside which the kick may fire. Kicked further
    /// out, the transformation system's spring pulls the offset back before
    /// the field dominates and the point can end up passing on the other
    /// side.
    pub seed_distance: f64,
    /// Lateral speed (m/s) below which existing motion is treated as noise.
    pub follow_speed: f64,
    pub pass_side: PassSide,
}

impl Default for RolloutSettings {
    fn default() -> Self {
        Self {
            dt: 0.001,
            limits: FieldLimits::default(),
            lateral_seed: 0.01,
            seed_distance: 0.04,
            follow_speed: 0.005,
            pass_side: PassSide::Left,
        }
    }
}

/// One planned reference sample. `velocity` is the physical rate `dx/dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanSample {
    pub position: Vec2,
    pub velocity: Vec2,
}

/// Time-indexed reference trajectory, equally spaced at `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrajectory {
    pub dt: f64,
    pub samples: Vec<PlanSample>,
}

impl PlannedTrajectory {
    pub fn horizon(&self) -> f64 {
        self.samples.len().saturating_sub(1) as f64 * self.dt
    }

    /// Sample at time `t` since plan start; the final sample is held past
    /// the horizon.
    pub fn sample_at(&self, t: f64) -> PlanSample {
        let last = self.samples.len() - 1;
        let idx = if t <= 0.0 { 0 } else { ((t / self.dt).round() as usize).min(last) };
        self.samples[idx]
    }

    pub fn final_sample(&self) -> PlanSample {
        *self.samples.last().expect("plan has at least one sample")
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.samples.iter().map(|s| s.position)
    }

    /// Largest distance of any sample from the straight start-goal line.
    pub fn max_lateral_excursion(&self, start: Vec2, goal: Vec2) -> f64 {
        let Some(dir) = (goal - start).normalized() else {
            return 0.0;
        };
        self.positions()
            .map(|p| (p - start).cross(dir).abs())
            .fold(0.0, f64::max)
    }
}

/// A person's fitted laws: what the robot partner plans with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonModel {
    pub gain_laws: GainLawCoeffs,
    pub field_laws: Option<FieldLawCoeffs>,
    pub tau: f64,
}

impl PersonModel {
    pub fn plan(&self, trial: &TrialSpec, horizon: f64, settings: &RolloutSettings) -> Result<PlannedTrajectory, ModelError> {
        plan_trajectory_with(trial, &self.gain_laws, self.field_laws.as_ref(), self.tau, horizon, settings)
    }

    /// Plan for the rest of `trial` from a state already under way.
    pub fn plan_from(
        &self,
        trial: &TrialSpec,
        from: &BodyState,
        horizon: f64,
        settings: &RolloutSettings,
    ) -> Result<PlannedTrajectory, ModelError> {
        plan_trajectory_from(trial, from, &self.gain_laws, self.field_laws.as_ref(), self.tau, horizon, settings)
    }
}

#[derive(Clone, Copy)]
struct Derivative {
    dx: Vec2,
    dv: Vec2,
}

struct Transform<'a> {
    goal: Vec2,
    dmp: &'a DmpParams,
    field: Option<(&'a Obstacle, &'a FieldParams)>,
    limits: &'a FieldLimits,
}

impl Transform<'_> {
    fn phi(&self, x: Vec2, v: Vec2) -> Result<Option<Vec2>, ModelError> {
        match self.field {
            Some((obstacle, field)) => field_term(x, v, obstacle, field, self.limits),
            None => Ok(None),
        }
    }

    fn eval(&self, x: Vec2, v: Vec2) -> Result<Derivative, ModelError> {
        let mut force = (self.goal - x) * self.dmp.spring_k - v * self.dmp.damping_d;
        if let Some(phi) = self.phi(x, v)? {
            force += phi;
        }
        Ok(Derivative {
            dx: v / self.dmp.tau,
            dv: force / self.dmp.tau,
        })
    }

    fn rk4(&self, x: Vec2, v: Vec2, h: f64) -> Result<(Vec2, Vec2), ModelError> {
        let k1 = self.eval(x, v)?;
        let k2 = self.eval(x + k1.dx * (0.5 * h), v + k1.dv * (0.5 * h))?;
        let k3 = self.eval(x + k2.dx * (0.5 * h), v + k2.dv * (0.5 * h))?;
        let k4 = self.eval(x + k3.dx * h, v + k3.dv * h)?;
        let w = h / 6.0;
        Ok((
            x + (k1.dx + k2.dx * 2.0 + k3.dx * 2.0 + k4.dx) * w,
            v + (k1.dv + k2.dv * 2.0 + k3.dv * 2.0 + k4.dv) * w,
        ))
    }
}

/// Integrates the model for `steps` steps from `start` (physical velocity)
/// with fourth-order Runge-Kutta, returning `steps + 1` samples. Fails with
/// [`ModelError::PlanCollision`] if any step sweeps through the obstacle.
pub fn rollout(
    start: &BodyState,
    goal: Vec2,
    dmp: &DmpParams,
    field: Option<(&Obstacle, &FieldParams)>,
    settings: &RolloutSettings,
    steps: usize,
) -> Result<Vec<PlanSample>, ModelError> {
    if !(settings.dt > 0.0) {
        return Err(ModelError::InvalidSettings("dt must be > 0"));
    }
    let sys = Transform {
        goal,
        dmp,
        field,
        limits: &settings.limits,
    };
    let left = (goal - start.position)
        .normalized()
        .map(Vec2::perp)
        .unwrap_or(Vec2::new(0.0, 1.0));
    let mut seeded = settings.lateral_seed == 0.0 || field.is_none();
    let within = |x: Vec2, d: f64| field.is_some_and(|(o, _)| segment_distance(x, o).distance < d);

    let mut x = start.position;
    let mut v = start.velocity * dmp.tau;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(PlanSample {
        position: x,
        velocity: start.velocity,
    });
    for i in 0..steps {
        if !seeded && within(x, settings.seed_distance) && sys.phi(x, v)?.is_some() {
            let lateral = v.dot(left) / dmp.tau;
            let side = if lateral.abs() > settings.follow_speed {
                lateral.signum()
            } else {
                settings.pass_side.sign()
            };
            v += left * (side * settings.lateral_seed * dmp.tau);
            seeded = true;
        }
        let time = (i + 1) as f64 * settings.dt;
        let (nx, nv) = sys.rk4(x, v, settings.dt).map_err(|e| match e {
            ModelError::CollisionState => ModelError::PlanCollision { time, position: x },
            other => other,
        })?;
        if let Some((obstacle, _)) = field {
            if swept_collision(x, nx, obstacle) {
                return Err(ModelError::PlanCollision { time, position: nx });
            }
        }
        x = nx;
        v = nv;
        samples.push(PlanSample {
            position: x,
            velocity: v / dmp.tau,
        });
    }
    Ok(samples)
}

/// Plans the trial with default rollout settings.
pub fn plan_trajectory(
    trial: &TrialSpec,
    gains: &GainLawCoeffs,
    field_laws: Option<&FieldLawCoeffs>,
    tau: f64,
    horizon: f64,
) -> Result<PlannedTrajectory, ModelError> {
    plan_trajectory_with(trial, gains, field_laws, tau, horizon, &RolloutSettings::default())
}

/// Plans from the trial start at rest. `K`/`D` come from the trial's
/// difficulty index; `lambda`/`beta` from its obstacle distance. Without an
/// obstacle or field laws the coupling term is identically zero.
pub fn plan_trajectory_with(
    trial: &TrialSpec,
    gains: &GainLawCoeffs,
    field_laws: Option<&FieldLawCoeffs>,
    tau: f64,
    horizon: f64,
    settings: &RolloutSettings,
) -> Result<PlannedTrajectory, ModelError> {
    plan_trajectory_from(trial, &BodyState::at_rest(trial.start, 0.0), gains, field_laws, tau, horizon, settings)
}

/// As [`plan_trajectory_with`], starting from `from` instead of rest at the
/// trial start.
pub fn plan_trajectory_from(
    trial: &TrialSpec,
    from: &BodyState,
    gains: &GainLawCoeffs,
    field_laws: Option<&FieldLawCoeffs>,
    tau: f64,
    horizon: f64,
    settings: &RolloutSettings,
) -> Result<PlannedTrajectory, ModelError> {
    if !(horizon >= 0.0) {
        return Err(ModelError::InvalidSettings("horizon must be >= 0"));
    }
    let dmp = gains.dmp_params(trial.id_bits, tau)?;
    let field = match (trial.obstacle, field_laws, trial.obstacle_distance()) {
        (Some(obstacle), Some(laws), Some(o)) => Some((obstacle, laws.field_params(o)?)),
        _ => None,
    };
    let steps = (horizon / settings.dt).round() as usize;
    let samples = rollout(
        from,
        trial.goal(),
        &dmp,
        field.as_ref().map(|(o, f)| (o, f)),
        settings,
        steps,
    )?;
    Ok(PlannedTrajectory {
        dt: settings.dt,
        samples,
    })
}
