//! The controlled point: a damped point mass driven by the summed human and
//! robot forces, integrated with fixed-step semi-implicit Euler.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

/// Largest step accepted by [`PlantParams::new`].
pub const MAX_PLANT_DT: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("non-finite plant input")]
    NonFiniteInput,
    #[error("invalid plant parameter: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub time: f64,
}

impl BodyState {
    pub fn at_rest(position: Vec2, time: f64) -> Self {
        Self {
            position,
            velocity: Vec2::ZERO,
            time,
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    /// kg
    pub mass: f64,
    /// N·s/m
    pub viscous_damping: f64,
    /// N
    pub force_cap: f64,
    /// s
    pub dt: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            viscous_damping: 10.0,
            force_cap: 60.0,
            dt: 0.001,
        }
    }
}

impl PlantParams {
    pub fn new(mass: f64, viscous_damping: f64, force_cap: f64, dt: f64) -> Result<Self, PlantError> {
        let p = Self {
            mass,
            viscous_damping,
            force_cap,
            dt,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(PlantError::InvalidParams("mass must be > 0"));
        }
        if !(self.viscous_damping >= 0.0 && self.viscous_damping.is_finite()) {
            return Err(PlantError::InvalidParams("viscous_damping must be >= 0"));
        }
        if !(self.force_cap > 0.0) {
            return Err(PlantError::InvalidParams("force_cap must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_PLANT_DT) {
            return Err(PlantError::InvalidParams("dt must lie in (0, 0.01] s"));
        }
        Ok(())
    }
}

/// One step of `m a = F - b v`. The caller is responsible for summing and
/// clamping `total_force`.
pub fn step_plant(state: &BodyState, total_force: Vec2, params: &PlantParams) -> Result<BodyState, PlantError> {
    if !total_force.is_finite() || !state.position.is_finite() || !state.velocity.is_finite() {
        return Err(PlantError::NonFiniteInput);
    }
    let accel = (total_force - state.velocity * params.viscous_damping) / params.mass;
    let velocity = state.velocity + accel * params.dt;
    let position = state.position + velocity * params.dt;
    Ok(BodyState {
        position,
        velocity,
        time: state.time + params.dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn equilibrium_is_fixed() {
        let s = BodyState::at_rest(Vec2::new(0.1, -0.2), 0.0);
        let n = step_plant(&s, Vec2::ZERO, &PlantParams::default()).unwrap();
        assert_eq!(n.position, s.position);
        assert_eq!(n.velocity, Vec2::ZERO);
        assert_abs_diff_eq!(n.time, 0.001);
    }

    #[test]
    fn unit_force_single_step() {
        let p = PlantParams::new(1.0, 0.0, 60.0, 0.001).unwrap();
        let n = step_plant(&BodyState::default(), Vec2::new(1.0, 0.0), &p).unwrap();
        assert_abs_diff_eq!(n.velocity.x, 0.001, epsilon = 1e-18);
        assert_abs_diff_eq!(n.position.x, 1e-6, epsilon = 1e-20);
        assert_eq!(n.velocity.y, 0.0);
    }

    #[test]
    fn terminal_velocity_is_force_over_damping() {
        let p = PlantParams::default();
        let mut s = BodyState::default();
        for _ in 0..5000 {
            s = step_plant(&s, Vec2::new(1.0, 0.0), &p).unwrap();
        }
        assert_abs_diff_eq!(s.velocity.norm(), 0.1, epsilon = 1e-4);
    }

    #[test]
    fn rejects_non_finite() {
        let r = step_plant(&BodyState::default(), Vec2::new(f64::NAN, 0.0), &PlantParams::default());
        assert_eq!(r, Err(PlantError::NonFiniteInput));
    }

    #[test]
    fn rejects_large_dt() {
        assert!(PlantParams::new(1.0, 10.0, 60.0, 0.02).is_err());
        assert!(PlantParams::new(0.0, 10.0, 60.0, 0.001).is_err());
    }

    proptest! {
        #[test]
        fn unforced_energy_non_increasing(
            vx in -2.0f64..2.0, vy in -2.0f64..2.0, b in 0.0f64..50.0
        ) {
            let p = PlantParams::new(1.0, b, 60.0, 0.001).unwrap();
            let mut s = BodyState { position: Vec2::ZERO, velocity: Vec2::new(vx, vy), time: 0.0 };
            for _ in 0..200 {
                let n = step_plant(&s, Vec2::ZERO, &p).unwrap();
                prop_assert!(n.velocity.norm_squared() <= s.velocity.norm_squared());
                prop_assert!(n.time >= s.time);
                s = n;
            }
        }

        #[test]
        fn deterministic(fx in -60.0f64..60.0, fy in -60.0f64..60.0) {
            let s = BodyState { position: Vec2::new(0.01, 0.02), velocity: Vec2::new(0.3, -0.1), time: 1.0 };
            let p = PlantParams::default();
            let a = step_plant(&s, Vec2::new(fx, fy), &p).unwrap();
            let b = step_plant(&s, Vec2::new(fx, fy), &p).unwrap();
            prop_assert_eq!(a.position.x.to_bits(), b.position.x.to_bits());
            prop_assert_eq!(a.velocity.y.to_bits(), b.velocity.y.to_bits());
        }
    }
}
