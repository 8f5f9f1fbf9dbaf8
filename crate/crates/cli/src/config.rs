//! Experiment config file. Sections mirror the library configs; missing
//! keys keep library defaults.
//!
//! ```toml
//! [training]
//! epochs = 5
//! learning_rate = 2e-4
//!
//! [eval]
//! tolerance_dva = 0.7
//! ```

use std::path::Path;

use anyhow::Context;
use fovea::corpus::CorpusSpec;
use fovea::eval::EvalConfig;
use fovea::oracle::OracleConfig;
use fovea::policy::TrainingConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: CorpusSpec,
    pub training: TrainingConfig,
    pub oracle: OracleConfig,
    pub eval: EvalConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| crate::commands::UsageError(format!("parsing {}: {e}", path.display())).into())
    }
}
