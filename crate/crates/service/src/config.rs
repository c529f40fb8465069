use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use innotree_core::variants::Direction;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Overrides the directory that relative data paths resolve against.
pub const DATA_DIR_ENV: &str = "INNOTREE_DATA";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// The data files that make up one engine snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub model: PathBuf,
    pub rules: PathBuf,
    pub schema: PathBuf,
    pub reports: PathBuf,
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub paths: DataPaths,
    /// Score weights per numeric attribute.
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub direction: Direction,
    /// Default evaluation point for series characteristics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
}

/// A config whose data paths are absolute or relative to the working
/// directory, ready to load.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub data_dir: PathBuf,
    pub paths: DataPaths,
    pub weights: BTreeMap<String, f64>,
    pub direction: Direction,
    pub param: Option<f64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Relative data paths resolve against `data_dir` when given, else
    /// against the directory holding the config file.
    pub fn resolve(self, config_path: &Path, data_dir: Option<PathBuf>) -> ResolvedConfig {
        let data_dir =
            data_dir.unwrap_or_else(|| config_path.parent().map(Path::to_path_buf).unwrap_or_default());
        let at = |p: PathBuf| if p.is_absolute() { p } else { data_dir.join(p) };
        ResolvedConfig {
            paths: DataPaths {
                model: at(self.paths.model),
                rules: at(self.paths.rules),
                schema: at(self.paths.schema),
                reports: at(self.paths.reports),
            },
            data_dir,
            weights: self.weights,
            direction: self.direction,
            param: self.param,
        }
    }
}

/// Loads and resolves a config file, honouring [`DATA_DIR_ENV`].
pub fn load_config(path: &Path) -> Result<ResolvedConfig, ConfigError> {
    let data_dir = std::env::var_os(DATA_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    Ok(Config::load(path)?.resolve(path, data_dir))
}
