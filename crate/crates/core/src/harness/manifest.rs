// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_hash: Option<String>,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, seed: u64, config: impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: "qcd-eval",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            seed,
            dataset_hash: None,
            config: serde_json::to_value(config)?,
        })
    }

    pub fn with_dataset_hash(mut self, hash: impl Into<String>) -> Self {
        self.dataset_hash = Some(hash.into());
        self
    }

    /// Manifest path written next to a result file: `out.json` → `out.manifest.json`.
    pub fn path_for(result: &Path) -> std::path::PathBuf {
        let stem = result.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        result.with_file_name(format!("{stem}.manifest.json"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
