use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use artic_core::Error;

/// Everything needed to rerun a command: arguments, resolved configuration, seed,
/// files read and written, and per-stage wall time.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub version: &'static str,
    pub timings_s: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
            timings_s: BTreeMap::new(),
        }
    }

    pub fn time(&mut self, stage: &str, seconds: f64) {
        self.timings_s.insert(stage.to_string(), seconds);
    }

    /// Writes via a temporary file and a rename so readers never see a partial file.
    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(path, text.as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// `out.ext` -> `out.ext.manifest.json`; a directory gets `manifest.json` inside.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("manifest.json")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}
