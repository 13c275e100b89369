//! JSON artifacts written by the solvers and the harness. Every artifact
//! records the crate version and the fully resolved configuration.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub config: serde_json::Value,
    pub body: T,
}

impl<T: Serialize + DeserializeOwned> Artifact<T> {
    pub fn new(kind: &str, config: serde_json::Value, body: T) -> Self {
        Self { tool: "mfchaos".into(), version: VERSION.into(), kind: kind.into(), config, body }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
