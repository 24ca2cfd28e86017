//! Module-level orchestration: import resolution, fingerprints, persistent
//! per-module result cache and the analysis of a single module against the
//! interface results of its imports.

mod cache;
mod fingerprint;
mod graph;

use std::collections::BTreeMap;

use thiserror::Error;

pub use cache::{cache_lookup, cache_path, cache_store, delete_cache, CacheEntry, CacheError};
pub use fingerprint::{analysis_key, compute_fingerprints, fingerprint, AnalysisKey, Fingerprint};
pub use graph::{locate, resolve, topo_order, ModuleGraph, ResolveError, IR_SUFFIX};

use crate::analysis::{
    AnalysisError, BaseInfo, ErasedAnalysis, RegisteredAnalysis, RunEnv, Target, ValueMap,
};
use crate::ir::{Module, QName, Visibility};

#[derive(Debug, Error)]
pub enum ManagerError {
    #[error("results of {analysis} for import {import} of {module} are not available")]
    MissingImport {
        analysis: String,
        module: String,
        import: String,
    },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Whether `entity` is visible to importers of `module`. Constructors are
/// exported together with their type.
pub fn is_exported(module: &Module, target: Target, entity: &QName) -> bool {
    match target {
        Target::Function => module
            .function(&entity.name)
            .is_some_and(|f| f.visibility == Visibility::Public),
        Target::Type => module
            .type_decl(&entity.name)
            .is_some_and(|t| t.visibility == Visibility::Public),
        Target::Constructor => module
            .constructor(&entity.name)
            .is_some_and(|(_, t)| t.visibility == Visibility::Public),
    }
}

/// Union of the exported values of `module`'s direct imports.
pub fn import_values(
    analysis: &str,
    module: &Module,
    entries: &BTreeMap<String, CacheEntry>,
) -> Result<ValueMap, ManagerError> {
    let mut out = ValueMap::new();
    for imp in &module.imports {
        let e = entries.get(imp).ok_or_else(|| ManagerError::MissingImport {
            analysis: analysis.to_string(),
            module: module.name.clone(),
            import: imp.clone(),
        })?;
        out.extend(e.public_values.iter().map(|(q, v)| (q.clone(), v.clone())));
    }
    Ok(out)
}

/// Base information for a combined analysis of `module`, built from the
/// base analysis entries of the module itself and its direct imports.
pub fn base_info(
    base: &dyn ErasedAnalysis,
    module: &Module,
    entries: &BTreeMap<String, CacheEntry>,
) -> Result<BaseInfo, ManagerError> {
    let local = entries
        .get(&module.name)
        .ok_or_else(|| ManagerError::MissingImport {
            analysis: base.name().to_string(),
            module: module.name.clone(),
            import: module.name.clone(),
        })?;
    let imported = import_values(base.name(), module, entries)?;
    Ok(base.decode_info(&local.all_values, &imported)?)
}

/// Analyzes one module. `imports` holds this analysis's entries for (at
/// least) every direct import; `base` is required for combined analyses.
pub fn analyze_module(
    analysis: &RegisteredAnalysis,
    module: &Module,
    imports: &BTreeMap<String, CacheEntry>,
    base: Option<&BaseInfo>,
    fingerprint: Fingerprint,
    env: &RunEnv,
) -> Result<CacheEntry, ManagerError> {
    let erased = analysis.analysis();
    let imported = if analysis.kind().is_dependency() {
        import_values(analysis.name(), module, imports)?
    } else {
        ValueMap::new()
    };
    let all_values = erased.analyze_values(module, &imported, base, env)?;
    let public_values = all_values
        .iter()
        .filter(|(q, _)| is_exported(module, analysis.target(), q))
        .map(|(q, v)| (q.clone(), v.clone()))
        .collect();
    Ok(CacheEntry {
        module: module.name.clone(),
        analysis: analysis.name().to_string(),
        version: analysis.version(),
        fingerprint,
        public_values,
        all_values,
    })
}
