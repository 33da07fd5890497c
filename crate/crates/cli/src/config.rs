use std::path::Path;

use serde::{Deserialize, Serialize};

use artic_core::evalproto::EvalConfig;
use artic_core::inference::DecodeConfig;
use artic_core::model::ModelConfig;
use artic_core::training::TrainConfig;
use artic_core::{Error, Result};

/// Contents of a `--config` TOML file. Missing tables and keys take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub eval: EvalConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(format!("{}: {}", path.display(), e.message())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_tables_fill_defaults() {
        let c: FileConfig = toml::from_str("[train]\nsteps = 7\n[model]\ndim = 32\n").unwrap();
        assert_eq!(c.train.steps, 7);
        assert_eq!(c.train.lr, TrainConfig::default().lr);
        assert_eq!(c.model.dim, 32);
        assert_eq!(c.decode, DecodeConfig::default());
    }

    #[test]
    fn unknown_table_rejected() {
        assert!(toml::from_str::<FileConfig>("[nope]\nx = 1\n").is_err());
    }
}
