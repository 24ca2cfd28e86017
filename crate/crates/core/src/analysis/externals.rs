use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::ir::QName;

const BUILTIN: &str = include_str!("../../data/externals.json");

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read externals manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed externals manifest: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Hand-annotated abstract values for primitive functions:
/// analysis name -> `Module.name` -> serialized value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExternalsManifest {
    entries: BTreeMap<String, BTreeMap<String, Value>>,
}

impl ExternalsManifest {
    /// The manifest shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("shipped externals.json is well-formed")
    }

    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        Ok(ExternalsManifest {
            entries: serde_json::from_str(text)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn lookup(&self, analysis: &str, entity: &QName) -> Option<&Value> {
        self.entries.get(analysis)?.get(&entity.to_string())
    }

    pub fn analyses(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
