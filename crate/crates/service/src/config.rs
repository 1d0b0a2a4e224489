//! Service configuration, read from a TOML file.
//!
//! ```toml
//! port = 8765
//! out_dir = "logs"
//! model_file = "fit.json"
//!
//! [session]
//! mode = "robot_leader"
//! seed = 4
//!
//! [mapping]
//! cursor_spring_k = 120.0
//! ```
//!
//! Every table and key is optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use coreach::fitting::FitReport;
use coreach::model::PersonModel;
use coreach::partner::RobotPartnerConfig;
use coreach::plant::PlantParams;
use coreach::task::{default_field_laws, default_gain_laws, SessionConfig, SimHumanParams};

use crate::input::{InputMapping, StaleGuard};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("model file {path} is neither a fit report nor a person model: {message}")]
    Model { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    pub broadcast_hz: f64,
    pub out_dir: PathBuf,
    /// Fit report or person model (JSON) the robot partner plans with.
    /// Without one the partner uses the default person's laws.
    pub model_file: Option<PathBuf>,
    /// Seconds a live session waits for the TLX form after the last trial.
    pub tlx_wait: f64,
    pub session: SessionConfig,
    pub plant: PlantParams,
    pub partner: RobotPartnerConfig,
    pub mapping: InputMapping,
    pub stale_guard: StaleGuard,
    /// The simulated person of headless runs.
    pub human: SimHumanParams,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8765,
            broadcast_hz: 60.0,
            out_dir: PathBuf::from("logs"),
            model_file: None,
            tlx_wait: 300.0,
            session: SessionConfig::default(),
            plant: PlantParams::default(),
            partner: RobotPartnerConfig::default(),
            mapping: InputMapping::default(),
            stale_guard: StaleGuard::default(),
            human: SimHumanParams::default(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.session.validate().map_err(|e| invalid(&e))?;
        self.plant.validate().map_err(|e| invalid(&e))?;
        self.partner.validate().map_err(|e| invalid(&e))?;
        self.mapping.validate().map_err(|e| invalid(&e))?;
        if !(self.broadcast_hz > 0.0) {
            return Err(ConfigError::Invalid("broadcast_hz must be > 0".into()));
        }
        Ok(())
    }

    /// The laws the robot partner plans with.
    pub fn person_model(&self) -> Result<PersonModel, ConfigError> {
        let Some(path) = &self.model_file else {
            return Ok(PersonModel {
                gain_laws: default_gain_laws(),
                field_laws: Some(default_field_laws()),
                tau: 1.0,
            });
        };
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.clone(),
            source,
        })?;
        if let Ok(report) = FitReport::from_json(&text) {
            return Ok(report.person_model());
        }
        serde_json::from_str(&text).map_err(|e| ConfigError::Model {
            path: path.clone(),
            message: e.to_string(),
        })
    }
}
