//! Run manifests: a JSON echo of everything needed to reproduce a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::distributions::TargetSpec;
use crate::hawc::HawcConfig;
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub target: String,
    pub config: HawcConfig,
    /// History ledger read (and, for `sample-next`, extended) by the run.
    pub history: Option<PathBuf>,
    pub history_rows_before: usize,
    /// Points emitted by `sample-next`.
    pub count: Option<usize>,
    pub points_out: Option<PathBuf>,
    pub loss_trace_out: Option<PathBuf>,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: String::new(),
            target: String::new(),
            config: HawcConfig::default(),
            history: None,
            history_rows_before: 0,
            count: None,
            points_out: None,
            loss_trace_out: None,
        }
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CliError::Manifest {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, &text)?;
        Ok(())
    }

    pub fn target_spec(&self) -> Result<TargetSpec, CliError> {
        Ok(self.target.parse()?)
    }

    pub(super) fn expect_command(&self, command: &str) -> Result<(), CliError> {
        if self.command == command {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "manifest was written by `{}`, not `{command}`",
                self.command
            )))
        }
    }
}
