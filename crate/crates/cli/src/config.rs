//! Settings resolution: flags, then the JSON config file, then defaults.

use std::path::Path;

use serde::Deserialize;

use jetreg::register::Settings;

use crate::error::{CliError, CliResult};
use crate::ProblemFlags;

/// Keys accepted in a config file. All are optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub jet_order: Option<u8>,
    pub match_order: Option<u8>,
    pub grid: Option<usize>,
    pub sigma: Option<f64>,
    pub sigma_match: Option<f64>,
    pub steps: Option<usize>,
    pub smooth: Option<f64>,
    pub maxiter: Option<usize>,
    pub tol: Option<f64>,
}

pub fn load(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn resolve(flags: &ProblemFlags) -> CliResult<Settings> {
    let file = match &flags.config {
        Some(p) => load(p)?,
        None => FileConfig::default(),
    };
    let d = Settings::default();
    let mut s = Settings {
        jet_order: flags.jet_order.or(file.jet_order).unwrap_or(d.jet_order),
        match_order: flags.match_order.or(file.match_order).unwrap_or(d.match_order),
        grid: flags.grid.or(file.grid).unwrap_or(d.grid),
        sigma: flags.sigma.or(file.sigma).unwrap_or(d.sigma),
        sigma_match: flags.sigma_match.or(file.sigma_match).unwrap_or(d.sigma_match),
        steps: flags.steps.or(file.steps).unwrap_or(d.steps),
        smooth: flags.smooth.or(file.smooth).unwrap_or(d.smooth),
        optimizer: d.optimizer,
    };
    s.optimizer.max_iter = flags.maxiter.or(file.maxiter).unwrap_or(d.optimizer.max_iter);
    s.optimizer.grad_tol = flags.tol.or(file.tol).unwrap_or(d.optimizer.grad_tol);
    if !(s.optimizer.grad_tol >= 0.0) {
        return Err(CliError::Usage("--tol must be >= 0".into()));
    }
    if !(s.sigma_match > 0.0) {
        return Err(CliError::Usage("--sigma-match must be > 0".into()));
    }
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = std::env::temp_dir().join(format!("jetreg-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"grid": 3, "sigma": 0.4, "maxiter": 7}"#).unwrap();
        let flags = ProblemFlags {
            config: Some(path),
            sigma: Some(0.5),
            ..ProblemFlags::default()
        };
        let s = resolve(&flags).unwrap();
        assert_eq!(s.grid, 3);
        assert_eq!(s.sigma, 0.5);
        assert_eq!(s.optimizer.max_iter, 7);
        assert_eq!(s.jet_order, Settings::default().jet_order);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"sgima": 1}"#).is_err());
    }
}
