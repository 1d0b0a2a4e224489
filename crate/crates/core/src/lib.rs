//! Collaborative reaching workbench: an obstacle-avoiding point-attractor
//! model, a leader/follower robot partner, the trial protocol with a
//! simulated human, parameter identification and Fitts' law analytics.

pub mod fitting;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod partner;
pub mod plant;
pub mod runner;
pub mod task;

pub use geometry::{Obstacle, Vec2};
pub use plant::{BodyState, PlantParams};
