//! Optional JSON config file. Keys are the long flag names; a flag given on
//! the command line wins over the file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::{Format, QfimPathArg, SweepVar};

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub kzr: Option<f64>,
    pub modes_max_order: Option<usize>,
    pub quad_tol: Option<f64>,
    pub photons: Option<f64>,
    pub fim_remainder: Option<bool>,
    pub chernoff_remainder: Option<bool>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub dx: Option<f64>,
    pub dz: Option<f64>,
    pub var: Option<SweepVar>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
    pub log: Option<bool>,
    pub path: Option<QfimPathArg>,
    pub raw: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_kebab_case_keys() {
        let c: FileConfig =
            serde_json::from_str(r#"{"kzr": 10, "modes-max-order": 6, "var": "dz", "log": true, "format": "json"}"#)
                .unwrap();
        assert_eq!(c.kzr, Some(10.0));
        assert_eq!(c.modes_max_order, Some(6));
        assert_eq!(c.var, Some(SweepVar::Dz));
        assert_eq!(c.format, Some(Format::Json));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"kzR": 10}"#).is_err());
    }
}
