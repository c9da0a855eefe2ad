//! Server configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use posemap_core::avatar::PredictorConfig;

use crate::protocol::PayloadKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarEntry {
    pub id: String,
    /// Directory holding `manifest.json`.
    pub path: PathBuf,
}

/// ```toml
/// bind = "127.0.0.1"
/// port = 8080
/// assets = "assets"            # every subdirectory with a manifest.json is an avatar
/// idle_timeout_secs = 600
/// max_sessions = 64
/// payload = "points"           # or "splats"
///
/// [defaults]
/// predictor = "kinematic"      # or "ddim"
/// use_basis = true
///
/// [defaults.ddim]
/// guidance = 1.0
/// seed = 0
/// denoiser = "kinematic-target"
///
/// [defaults.ddim.schedule]
/// train_steps = 1000
/// beta_start = 0.0001
/// beta_end = 0.02
/// sampling_steps = 10
///
/// [[avatars]]
/// id = "humanoid"
/// path = "assets/humanoid"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub assets: Option<PathBuf>,
    pub viewer_dir: Option<PathBuf>,
    pub idle_timeout_secs: u64,
    pub max_sessions: usize,
    pub payload: PayloadKind,
    pub defaults: PredictorConfig,
    pub avatars: Vec<AvatarEntry>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            assets: None,
            viewer_dir: None,
            idle_timeout_secs: 600,
            max_sessions: 64,
            payload: PayloadKind::Points,
            defaults: PredictorConfig::default(),
            avatars: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }
}
