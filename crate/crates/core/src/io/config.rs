use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ingest::DataSpec;
use crate::error::{Error, Result};
use crate::mediation::BcmfConfig;
use crate::sim::StudySpec;
use crate::summaries::SummaryConfig;

/// Everything a command needs, read from a TOML file. Unknown keys are
/// rejected at every level.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Overrides `model.seed` and `study.seed` when set.
    pub seed: Option<u64>,
    pub data: Option<DataSpec>,
    pub model: BcmfConfig,
    pub summary: SummaryConfig,
    pub study: Option<StudySpec>,
    /// Default output location for commands that are not given one.
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.apply_seed();
        cfg.model.validate()?;
        if let Some(st) = &cfg.study {
            st.validate()?;
        }
        Ok(cfg)
    }

    /// Reads a config file; relative data and output paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(d) = cfg.data.as_mut() {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        if let Some(o) = cfg.output.as_mut() {
            if o.is_relative() {
                *o = base.join(&*o);
            }
        }
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.apply_seed();
    }

    fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.model.seed = s;
            if let Some(st) = self.study.as_mut() {
                st.seed = s;
            }
        }
    }
}
