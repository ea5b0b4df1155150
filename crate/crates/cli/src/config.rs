//! Settings merged from flags, an optional TOML file and built-in defaults,
//! in that order of precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;

/// Keys accepted in the config file. Unknown keys are an error.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub horizon: Option<f64>,
    pub epsilon: Option<f64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub horizon_cap: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub horizon: Option<f64>,
    pub epsilon: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub rtol: f64,
    pub atol: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub out: PathBuf,
}

pub struct Defaults {
    pub rtol: f64,
    pub atol: f64,
    pub horizon: f64,
    pub epsilon: f64,
}

pub fn resolve(cli: &Overrides, file: &FileConfig, d: Defaults) -> Result<Resolved, String> {
    let r = Resolved {
        rtol: cli.rtol.or(file.rtol).unwrap_or(d.rtol),
        atol: cli.atol.or(file.atol).unwrap_or(d.atol),
        horizon: cli.horizon.or(file.horizon).unwrap_or(d.horizon),
        epsilon: cli.epsilon.or(file.epsilon).unwrap_or(d.epsilon),
        out: cli.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
    };
    for (name, v) in [("rtol", r.rtol), ("atol", r.atol), ("horizon", r.horizon), ("epsilon", r.epsilon)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(format!("{name} must be positive and finite, got {v}"));
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: FileConfig = toml::from_str("rtol = 1e-8\natol = 1e-9\n").unwrap();
        let cli = Overrides { rtol: Some(1e-11), ..Default::default() };
        let d = Defaults { rtol: 1e-10, atol: 1e-12, horizon: 60.0, epsilon: 1e-4 };
        let r = resolve(&cli, &file, d).unwrap();
        assert_eq!((r.rtol, r.atol, r.horizon), (1e-11, 1e-9, 60.0));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("rtool = 1.0").is_err());
    }
}
