//! Configuration file: every tunable constant plus named noise profiles.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::NoiseProfile;
use crate::planner::PlannerConfig;

/// Name of the built-in noise-free profile.
pub const NOISE_OFF: &str = "off";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown noise profile `{0}`")]
    UnknownProfile(String),
    #[error("profile name `off` is reserved for the noise-free profile")]
    ReservedProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSettings {
    /// Profile used when noise is switched on.
    pub active: String,
    pub profiles: BTreeMap<String, NoiseProfile>,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        let mut profiles = BTreeMap::new();
        profiles.insert("default".to_string(), default_noise());
        Self {
            active: "default".into(),
            profiles,
        }
    }
}

/// Sensor noise used by the shipped experiments.
pub fn default_noise() -> NoiseProfile {
    NoiseProfile {
        x: 0.5,
        y: 0.3,
        vx: 0.5,
        vy: 0.1,
        length: 0.2,
        width: 0.1,
        heading: 0.02,
        obstacle_x: 0.5,
        obstacle_y: 0.3,
        obstacle_length: 0.2,
        obstacle_width: 0.1,
        obstacle_heading: 0.02,
        lane_width: 0.1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Root of all derived episode seeds.
    pub master_seed: u64,
    pub planner: PlannerConfig,
    pub noise: NoiseSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            master_seed: 20_210_301,
            planner: PlannerConfig::default(),
            noise: NoiseSettings::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let config: Config = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source,
        })?;
        if config.noise.profiles.contains_key(NOISE_OFF) {
            return Err(ConfigError::ReservedProfile);
        }
        config.noise_profile(&config.noise.active)?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Looks up a profile by name; `off` is always available.
    pub fn noise_profile(&self, name: &str) -> Result<NoiseProfile, ConfigError> {
        if name == NOISE_OFF {
            return Ok(NoiseProfile::off());
        }
        self.noise
            .profiles
            .get(name)
            .copied()
            .ok_or_else(|| ConfigError::UnknownProfile(name.to_string()))
    }

    /// The profile used when noise is on.
    pub fn active_noise(&self) -> NoiseProfile {
        self.noise_profile(&self.noise.active)
            .expect("active profile validated at load")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_json() {
        let config = Config::default();
        let back = Config::from_json(&config.to_json(), "inline").unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let config = Config::from_json(r#"{"planner": {"iterations": 250, "risk": {"alpha": 0.1}}}"#, "inline").unwrap();
        assert_eq!(config.planner.iterations, 250);
        assert_eq!(config.planner.risk.alpha, 0.1);
        assert_eq!(config.planner.risk.c_m, 0.5);
        assert_eq!(config.planner.reward.collision, -100.0);
    }

    #[test]
    fn off_profile_is_builtin_and_reserved() {
        let config = Config::default();
        assert!(config.noise_profile("off").unwrap().is_off());
        assert!(matches!(config.noise_profile("loud"), Err(ConfigError::UnknownProfile(_))));
        let reserved = r#"{"noise": {"active": "off", "profiles": {"off": {}}}}"#;
        assert!(matches!(Config::from_json(reserved, "inline"), Err(ConfigError::ReservedProfile)));
        let bad_active = r#"{"noise": {"active": "loud"}}"#;
        assert!(Config::from_json(bad_active, "inline").is_err());
    }
}
