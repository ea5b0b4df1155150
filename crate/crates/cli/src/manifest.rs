use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Resolved;

#[derive(Debug, Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub epsilon: f64,
    pub horizon: f64,
}

impl From<&Resolved> for Tolerances {
    fn from(r: &Resolved) -> Self {
        Tolerances { rtol: r.rtol, atol: r.atol, epsilon: r.epsilon, horizon: r.horizon }
    }
}

/// Written last, so its presence means the run finished.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub params: Value,
    pub tolerances: Tolerances,
    pub outputs: Vec<PathBuf>,
    pub classifications: Value,
    /// Numbers worth tracking between versions.
    pub regression: Value,
    pub wall_seconds: f64,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn new(command: &str, params: Value, tol: Tolerances) -> Self {
        RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            params,
            tolerances: tol,
            outputs: Vec::new(),
            classifications: Value::Null,
            regression: Value::Null,
            wall_seconds: 0.0,
            exit_code: 0,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, soliton_core::io::IoError> {
        let p = dir.join("manifest.json");
        soliton_core::io::write_json(self, &p)?;
        Ok(p)
    }
}
