//! Optional JSON config file. Every key mirrors a command-line flag; a flag
//! given on the command line wins over the file, and the file wins over the
//! built-in default.

use std::path::Path;

use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub s: Option<usize>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub max_outer: Option<usize>,
    pub qp_tol: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub k: Option<usize>,
    pub ratio: Option<f64>,
    pub polish: Option<bool>,
    pub threshold: Option<f64>,
    pub stride: Option<usize>,
    pub clusters: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::new("io", format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::new("config", format!("bad config {}: {e}", path.display())))
    }
}

/// Flag, then config value, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Like [`pick`] for values without a default.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, Failure> {
    flag.or(file)
        .ok_or_else(|| Failure::new("usage", format!("--{name} is required (flag or config key)")))
}
