//! Trial geometry, session configuration and balanced session generation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TaskError;
use crate::geometry::{Obstacle, Vec2};
use crate::metrics::fitts::index_of_difficulty;

/// Target distances from the start, in metres.
pub const TARGET_DISTANCES: [f64; 3] = [0.05, 0.15, 0.25];

/// Number of distinct (distance × size) conditions.
pub const CONDITION_COUNT: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    pub const ALL: [SizeClass; 3] = [SizeClass::Small, SizeClass::Medium, SizeClass::Large];
}

/// Target diameters per size class, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetWidths {
    pub small: f64,
    pub medium: f64,
    pub large: f64,
}

impl Default for TargetWidths {
    fn default() -> Self {
        Self {
            small: 0.01,
            medium: 0.02,
            large: 0.03,
        }
    }
}

impl TargetWidths {
    pub fn width(&self, size: SizeClass) -> f64 {
        match size {
            SizeClass::Small => self.small,
            SizeClass::Medium => self.medium,
            SizeClass::Large => self.large,
        }
    }
}

/// One of the nine (distance, size) conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    /// Index into [`TARGET_DISTANCES`].
    pub distance_index: u8,
    pub size: SizeClass,
}

impl Condition {
    pub fn all() -> Vec<Condition> {
        (0..TARGET_DISTANCES.len() as u8)
            .flat_map(|d| {
                SizeClass::ALL.into_iter().map(move |size| Condition {
                    distance_index: d,
                    size,
                })
            })
            .collect()
    }

    pub fn distance(&self) -> f64 {
        TARGET_DISTANCES[self.distance_index as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    Individual,
    RobotFollower,
    RobotEqual,
    RobotLeader,
    HumanPairReplay,
}

impl SessionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionMode::Individual => "individual",
            SessionMode::RobotFollower => "robot_follower",
            SessionMode::RobotEqual => "robot_equal",
            SessionMode::RobotLeader => "robot_leader",
            SessionMode::HumanPairReplay => "human_pair_replay",
        }
    }

    pub fn has_robot(&self) -> bool {
        matches!(
            self,
            SessionMode::RobotFollower | SessionMode::RobotEqual | SessionMode::RobotLeader
        )
    }
}

impl fmt::Display for SessionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SessionMode {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "individual" => SessionMode::Individual,
            "robot_follower" => SessionMode::RobotFollower,
            "robot_equal" => SessionMode::RobotEqual,
            "robot_leader" => SessionMode::RobotLeader,
            "human_pair_replay" => SessionMode::HumanPairReplay,
            other => return Err(TaskError::UnknownMode(other.to_string())),
        })
    }
}

/// One reaching trial's geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub trial_id: u32,
    pub start: Vec2,
    pub target_center: Vec2,
    pub target_distance: f64,
    /// Target diameter, used as W in the difficulty index.
    pub target_width: f64,
    pub size: SizeClass,
    pub obstacle: Option<Obstacle>,
    pub id_bits: f64,
}

impl TrialSpec {
    /// Builds a trial along `direction` from `start`, with an optional
    /// perpendicular obstacle of `obstacle_length` centred midway.
    pub fn along_axis(
        trial_id: u32,
        start: Vec2,
        direction: Vec2,
        target_distance: f64,
        size: SizeClass,
        target_width: f64,
        obstacle_length: Option<f64>,
    ) -> Result<Self, TaskError> {
        let dir = direction.normalized().ok_or(TaskError::InvalidConfig("zero target direction"))?;
        let target_center = start + dir * target_distance;
        let obstacle = match obstacle_length {
            Some(len) => Some(
                Obstacle::perpendicular_to(start + dir * (0.5 * target_distance), dir, len)
                    .map_err(|_| TaskError::InvalidConfig("obstacle length must be > 0"))?,
            ),
            None => None,
        };
        let id_bits = index_of_difficulty(target_distance, target_width)
            .map_err(|_| TaskError::InvalidConfig("target width must be > 0"))?;
        Ok(Self {
            trial_id,
            start,
            target_center,
            target_distance,
            target_width,
            size,
            obstacle,
            id_bits,
        })
    }

    pub fn goal(&self) -> Vec2 {
        self.target_center
    }

    /// Distance `o` from the start to the obstacle midpoint.
    pub fn obstacle_distance(&self) -> Option<f64> {
        self.obstacle.map(|o| self.start.distance(o.midpoint()))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.distance(self.target_center) <= 0.5 * self.target_width
    }

    pub fn condition(&self) -> Option<Condition> {
        let distance_index = TARGET_DISTANCES
            .iter()
            .position(|d| (d - self.target_distance).abs() < 1e-9)? as u8;
        Some(Condition {
            distance_index,
            size: self.size,
        })
    }

    /// The same trial without its obstacle.
    pub fn without_obstacle(&self) -> Self {
        Self {
            obstacle: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub mode: SessionMode,
    pub trials_per_session: usize,
    /// s
    pub dwell_time: f64,
    /// m
    pub start_radius: f64,
    pub seed: u64,
    pub obstacle_enabled: bool,
    pub widths: TargetWidths,
    pub start: Vec2,
    /// Direction from the start towards every target.
    pub direction: Vec2,
    /// m
    pub obstacle_length: f64,
    /// Speed (m/s) that marks movement onset and settling at the start.
    pub onset_speed: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            mode: SessionMode::Individual,
            trials_per_session: 45,
            dwell_time: 0.5,
            start_radius: 0.005,
            seed: 0,
            obstacle_enabled: true,
            widths: TargetWidths::default(),
            start: Vec2::ZERO,
            direction: Vec2::new(1.0, 0.0),
            obstacle_length: 0.04,
            onset_speed: 0.02,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.trials_per_session == 0 || self.trials_per_session % CONDITION_COUNT != 0 {
            return Err(TaskError::UnbalancedConfig(self.trials_per_session));
        }
        if !(self.dwell_time >= 0.0) {
            return Err(TaskError::InvalidConfig("dwell_time must be >= 0"));
        }
        if !(self.start_radius > 0.0) {
            return Err(TaskError::InvalidConfig("start_radius must be > 0"));
        }
        if !(self.onset_speed > 0.0) {
            return Err(TaskError::InvalidConfig("onset_speed must be > 0"));
        }
        for s in SizeClass::ALL {
            if !(self.widths.width(s) > 0.0) {
                return Err(TaskError::InvalidConfig("target widths must be > 0"));
            }
        }
        if self.direction.normalized().is_none() {
            return Err(TaskError::InvalidConfig("zero target direction"));
        }
        if self.obstacle_enabled && !(self.obstacle_length > 0.0) {
            return Err(TaskError::InvalidConfig("obstacle_length must be > 0"));
        }
        Ok(())
    }

    /// Stable identifier used for log file names.
    pub fn session_id(&self) -> String {
        let free = if self.obstacle_enabled { "" } else { "-free" };
        format!("{}{}-s{}", self.mode, free, self.seed)
    }

    pub fn trial_for(&self, trial_id: u32, condition: Condition) -> Result<TrialSpec, TaskError> {
        TrialSpec::along_axis(
            trial_id,
            self.start,
            self.direction,
            condition.distance(),
            condition.size,
            self.widths.width(condition.size),
            self.obstacle_enabled.then_some(self.obstacle_length),
        )
    }
}

/// Balanced, seeded-shuffle trial list: every condition appears
/// `trials_per_session / 9` times.
pub fn generate_session(cfg: &SessionConfig) -> Result<Vec<TrialSpec>, TaskError> {
    cfg.validate()?;
    let repeats = cfg.trials_per_session / CONDITION_COUNT;
    let mut conditions: Vec<Condition> = Condition::all()
        .into_iter()
        .flat_map(|c| std::iter::repeat_n(c, repeats))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    conditions.shuffle(&mut rng);
    conditions
        .into_iter()
        .enumerate()
        .map(|(i, c)| cfg.trial_for(i as u32, c))
        .collect()
}

/// Order of the four evaluation sets: individual first, the three robot
/// roles in a seeded permutation.
pub fn evaluation_order(seed: u64) -> [SessionMode; 4] {
    let mut robots = [
        SessionMode::RobotFollower,
        SessionMode::RobotEqual,
        SessionMode::RobotLeader,
    ];
    robots.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    [SessionMode::Individual, robots[0], robots[1], robots[2]]
}
