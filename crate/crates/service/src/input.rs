//! Live human input: the cursor spring that stands in for a force-measured
//! handle, and the guard against a silent client.

use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use coreach::geometry::Vec2;
use coreach::plant::BodyState;
use coreach::task::{HumanAgent, Observation, TrialPhase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputMapping {
    /// N/m
    pub cursor_spring_k: f64,
    /// N·s/m
    pub cursor_damping: f64,
    /// N
    pub cursor_force_cap: f64,
}

impl Default for InputMapping {
    fn default() -> Self {
        Self {
            cursor_spring_k: 100.0,
            cursor_damping: 5.0,
            cursor_force_cap: 20.0,
        }
    }
}

impl InputMapping {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.cursor_spring_k >= 0.0 && self.cursor_damping >= 0.0) {
            return Err("cursor_spring_k and cursor_damping must be >= 0");
        }
        if !(self.cursor_force_cap > 0.0) {
            return Err("cursor_force_cap must be > 0");
        }
        Ok(())
    }
}

/// `k (cursor - p) - c v`, clamped to the cap.
pub fn map_cursor_to_force(cursor: Vec2, point: &BodyState, mapping: &InputMapping) -> Vec2 {
    let f = (cursor - point.position) * mapping.cursor_spring_k - point.velocity * mapping.cursor_damping;
    f.clamp_norm(mapping.cursor_force_cap)
}

/// Fades the human force out when input stops arriving mid-reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StaleGuard {
    /// Silence (s) tolerated before the fade starts.
    pub timeout: f64,
    /// Fade length (s).
    pub decay: f64,
}

impl Default for StaleGuard {
    fn default() -> Self {
        Self {
            timeout: 0.25,
            decay: 0.1,
        }
    }
}

impl StaleGuard {
    /// Force multiplier after `silence` seconds without input.
    pub fn scale(&self, silence: f64, phase: TrialPhase) -> f64 {
        if phase != TrialPhase::Moving || silence <= self.timeout {
            return 1.0;
        }
        if self.decay <= 0.0 {
            return 0.0;
        }
        (1.0 - (silence - self.timeout) / self.decay).clamp(0.0, 1.0)
    }
}

/// Latest-value mailbox for cursor positions: newest wins, and the tick
/// owner reads it only at tick boundaries.
pub fn cursor_mailbox() -> (watch::Sender<Option<Vec2>>, watch::Receiver<Option<Vec2>>) {
    watch::channel(None)
}

/// Human force from a live cursor.
#[derive(Debug)]
pub struct LiveHuman {
    mapping: InputMapping,
    guard: StaleGuard,
    mailbox: watch::Receiver<Option<Vec2>>,
    cursor: Option<Vec2>,
    last_input: f64,
}

impl LiveHuman {
    pub fn new(mapping: InputMapping, guard: StaleGuard, mailbox: watch::Receiver<Option<Vec2>>) -> Self {
        Self {
            mapping,
            guard,
            mailbox,
            cursor: None,
            last_input: 0.0,
        }
    }
}

impl HumanAgent for LiveHuman {
    fn force(&mut self, obs: &Observation<'_>) -> Vec2 {
        if self.mailbox.has_changed().unwrap_or(false) {
            if let Some(c) = *self.mailbox.borrow_and_update() {
                self.cursor = Some(c);
                self.last_input = obs.now;
            }
        }
        let Some(cursor) = self.cursor else {
            return Vec2::ZERO;
        };
        let f = map_cursor_to_force(cursor, obs.state, &self.mapping);
        f * self.guard.scale(obs.now - self.last_input, obs.phase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rest(x: f64) -> BodyState {
        BodyState::at_rest(Vec2::new(x, 0.0), 0.0)
    }

    #[test]
    fn cursor_force_examples() {
        let m = InputMapping {
            cursor_spring_k: 100.0,
            cursor_damping: 0.0,
            cursor_force_cap: 20.0,
        };
        assert_eq!(map_cursor_to_force(Vec2::ZERO, &rest(0.0), &m), Vec2::ZERO);
        let f = map_cursor_to_force(Vec2::new(0.01, 0.0), &rest(0.0), &m);
        assert!((f.x - 1.0).abs() < 1e-12 && f.y == 0.0);
        let f = map_cursor_to_force(Vec2::new(100.0, 100.0), &rest(0.0), &m);
        assert!((f.norm() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn guard_fades_only_while_moving() {
        let g = StaleGuard::default();
        assert_eq!(g.scale(0.2, TrialPhase::Moving), 1.0);
        assert!((g.scale(0.3, TrialPhase::Moving) - 0.5).abs() < 1e-12);
        assert!(g.scale(0.35, TrialPhase::Moving) < 1e-12);
        assert_eq!(g.scale(0.4, TrialPhase::Moving), 0.0);
        assert_eq!(g.scale(5.0, TrialPhase::AtStart), 1.0);
    }

    #[test]
    fn newest_cursor_wins() {
        let (tx, rx) = cursor_mailbox();
        let mut h = LiveHuman::new(
            InputMapping {
                cursor_damping: 0.0,
                ..Default::default()
            },
            StaleGuard::default(),
            rx,
        );
        let state = rest(0.0);
        let obs = |now| Observation {
            now,
            state: &state,
            phase: TrialPhase::Moving,
            trial: None,
            onset_time: None,
            start: Vec2::ZERO,
        };
        assert_eq!(h.force(&obs(0.0)), Vec2::ZERO);
        tx.send_replace(Some(Vec2::new(0.05, 0.0)));
        tx.send_replace(Some(Vec2::new(0.01, 0.0)));
        assert!((h.force(&obs(0.0)).x - 1.0).abs() < 1e-12);
        // No news for 0.3 s while moving: half strength.
        assert!((h.force(&obs(0.3)).x - 0.5).abs() < 1e-12);
    }
}
