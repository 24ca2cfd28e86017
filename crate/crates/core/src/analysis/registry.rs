use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde_json::Value;
use thiserror::Error;

use super::{AbstractValue, Analysis, AnalysisError, ErasedAnalysis, Kind, Target};

type ShowFn = dyn Fn(&Value) -> Result<String, serde_json::Error> + Send + Sync;

/// An analysis together with its show function and semantic version.
///
/// Bumping the version invalidates every cache entry produced by the old
/// transfer function.
#[derive(Clone)]
pub struct RegisteredAnalysis {
    analysis: Arc<dyn ErasedAnalysis>,
    show: Arc<ShowFn>,
    version: u32,
}

/// Registers `analysis` with a show function, at version 1.
pub fn cass_analysis<A: AbstractValue>(
    analysis: Analysis<A>,
    show: impl Fn(&A) -> String + Send + Sync + 'static,
) -> RegisteredAnalysis {
    RegisteredAnalysis {
        analysis: Arc::new(analysis),
        show: Arc::new(move |v| serde_json::from_value::<A>(v.clone()).map(|a| show(&a))),
        version: 1,
    }
}

impl RegisteredAnalysis {
    pub fn with_version(mut self, version: u32) -> Self {
        self.version = version;
        self
    }

    pub fn name(&self) -> &str {
        self.analysis.name()
    }

    pub fn target(&self) -> Target {
        self.analysis.target()
    }

    pub fn kind(&self) -> Kind {
        self.analysis.kind()
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn base_name(&self) -> Option<&str> {
        self.analysis.base().map(|b| b.name())
    }

    pub fn analysis(&self) -> &Arc<dyn ErasedAnalysis> {
        &self.analysis
    }

    /// Renders a serialized value with the analysis' show function.
    pub fn show(&self, value: &Value) -> Result<String, AnalysisError> {
        (self.show)(value).map_err(|e| AnalysisError::Codec {
            analysis: self.name().to_string(),
            entity: value.to_string(),
            message: e.to_string(),
        })
    }
}

impl fmt::Debug for RegisteredAnalysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegisteredAnalysis")
            .field("name", &self.name())
            .field("target", &self.target())
            .field("kind", &self.kind())
            .field("version", &self.version)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("analysis {0} registered twice")]
    Duplicate(String),
    #[error("analysis {analysis} uses unregistered base analysis {base}")]
    UnknownBaseAnalysis { analysis: String, base: String },
    #[error("base analyses form a cycle: {}", .0.join(" -> "))]
    BaseCycle(Vec<String>),
    #[error("analysis {0} has version 0; versions start at 1")]
    InvalidVersion(String),
}

/// The static set of available analyses, keyed by unique name.
#[derive(Clone, Debug)]
pub struct Registry {
    entries: BTreeMap<String, RegisteredAnalysis>,
}

impl Registry {
    pub fn new(analyses: Vec<RegisteredAnalysis>) -> Result<Self, RegistryError> {
        let mut entries = BTreeMap::new();
        for a in analyses {
            if a.version == 0 {
                return Err(RegistryError::InvalidVersion(a.name().to_string()));
            }
            let name = a.name().to_string();
            if entries.insert(name.clone(), a).is_some() {
                return Err(RegistryError::Duplicate(name));
            }
        }
        for (name, a) in &entries {
            if let Some(base) = a.base_name() {
                if !entries.contains_key(base) {
                    return Err(RegistryError::UnknownBaseAnalysis {
                        analysis: name.clone(),
                        base: base.to_string(),
                    });
                }
            }
            let mut seen = BTreeSet::new();
            let mut path = vec![name.clone()];
            let mut cur = a;
            while let Some(base) = cur.base_name() {
                if !seen.insert(base.to_string()) || base == name {
                    path.push(base.to_string());
                    return Err(RegistryError::BaseCycle(path));
                }
                path.push(base.to_string());
                cur = &entries[base];
            }
        }
        Ok(Registry { entries })
    }

    /// Registry holding the built-in analyses.
    pub fn builtin() -> Self {
        Registry::new(crate::builtin::registered_analyses()).expect("built-in registry is consistent")
    }

    pub fn get(&self, name: &str) -> Option<&RegisteredAnalysis> {
        self.entries.get(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Name-sorted `(name, target, kind)` listing.
    pub fn list(&self) -> Vec<(String, Target, Kind)> {
        self.entries
            .values()
            .map(|a| (a.name().to_string(), a.target(), a.kind()))
            .collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RegisteredAnalysis> {
        self.entries.values()
    }

    /// The analysis preceded by its base chain, deepest base first.
    pub fn base_chain(&self, name: &str) -> Option<Vec<&RegisteredAnalysis>> {
        let mut chain = vec![self.get(name)?];
        while let Some(base) = chain.last().and_then(|a| a.base_name()) {
            chain.push(self.get(base)?);
        }
        chain.reverse();
        Some(chain)
    }
}
