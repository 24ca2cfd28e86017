//! Batch, API and server access to the analysis system.

mod render;
mod server;

use std::path::PathBuf;

use serde_json::Value;
use thiserror::Error;

pub use render::{render, OutputFormat, ParseFormatError};
pub use server::{handle_request, serve, serve_connection, Request, Response};

use crate::analysis::{
    cass_analysis, AbstractValue, Analysis, AnalysisError, ProgInfo, Registry, RegistryError,
    RunEnv, ValueMap,
};
use crate::ir::QName;
use crate::manager::{delete_cache, CacheError};
use crate::scheduler::{run_master, PoolConfig, RunOptions, RunReport, SchedulerError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown analysis {name}; available: {}", .available.join(", "))]
    UnknownAnalysis { name: String, available: Vec<String> },
    #[error("module {module} has no entity {entity}")]
    UnknownEntity { module: String, entity: String },
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

/// One analyzed entity: serialized value and its rendering.
#[derive(Clone, Debug, PartialEq)]
pub struct EntityResult {
    pub name: QName,
    pub value: Value,
    pub shown: String,
}

/// Results of one analysis for the entities of one module, in QName order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModuleResults {
    pub analysis: String,
    pub module: String,
    pub entities: Vec<EntityResult>,
}

/// Shared state behind the CLI, the server and the library API: the
/// registry, where modules and caches live and how many workers to use.
#[derive(Clone, Debug)]
pub struct Engine {
    registry: Registry,
    search_path: Vec<PathBuf>,
    pool: PoolConfig,
    opts: RunOptions,
}

impl Engine {
    /// An engine over the builtin analyses, without a persistent cache.
    pub fn new(search_path: Vec<PathBuf>) -> Self {
        Engine::with_registry(Registry::builtin(), search_path)
    }

    pub fn with_registry(registry: Registry, search_path: Vec<PathBuf>) -> Self {
        Engine {
            registry,
            search_path,
            pool: PoolConfig::default(),
            opts: RunOptions::default(),
        }
    }

    pub fn cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.opts.cache_dir = Some(dir.into());
        self
    }

    pub fn pool(mut self, pool: PoolConfig) -> Self {
        self.pool = pool;
        self
    }

    pub fn event_log(mut self, path: impl Into<PathBuf>) -> Self {
        self.opts.event_log = Some(path.into());
        self
    }

    pub fn env(mut self, env: RunEnv) -> Self {
        self.opts.env = env;
        self
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn run_env(&self) -> &RunEnv {
        &self.opts.env
    }

    pub fn search_path(&self) -> &[PathBuf] {
        &self.search_path
    }

    /// Removes the persistent cache, if one is configured.
    pub fn delete_cache(&self) -> Result<(), EngineError> {
        if let Some(dir) = &self.opts.cache_dir {
            delete_cache(dir)?;
        }
        Ok(())
    }

    /// Runs `analysis` over `module` and everything it imports.
    pub fn run(&self, analysis: &str, module: &str) -> Result<RunReport, EngineError> {
        if self.registry.get(analysis).is_none() {
            return Err(self.unknown(analysis));
        }
        Ok(run_master(
            &self.registry,
            analysis,
            module,
            self.pool,
            &self.search_path,
            &self.opts,
        )?)
    }

    /// Rendered results for every entity defined in `module`.
    pub fn module_results(&self, analysis: &str, module: &str) -> Result<ModuleResults, EngineError> {
        let report = self.run(analysis, module)?;
        let reg = self.registry.get(analysis).expect("checked by run");
        let entities = report.entries[module]
            .all_values
            .iter()
            .map(|(q, v)| {
                Ok(EntityResult {
                    name: q.clone(),
                    value: v.clone(),
                    shown: reg.show(v)?,
                })
            })
            .collect::<Result<_, AnalysisError>>()?;
        Ok(ModuleResults {
            analysis: analysis.to_string(),
            module: module.to_string(),
            entities,
        })
    }

    /// Rendered result for one entity, named without its module prefix.
    pub fn entity_result(
        &self,
        analysis: &str,
        module: &str,
        entity: &str,
    ) -> Result<ModuleResults, EngineError> {
        let mut all = self.module_results(analysis, module)?;
        all.entities.retain(|e| e.name.name == entity);
        if all.entities.is_empty() {
            return Err(EngineError::UnknownEntity {
                module: module.to_string(),
                entity: entity.to_string(),
            });
        }
        Ok(all)
    }

    /// API mode: runs a registered analysis and returns its shown values,
    /// local entities plus the interface of the direct imports.
    pub fn analyze_module(&self, analysis: &str, module: &str) -> Result<ProgInfo<String>, String> {
        let inner = || -> Result<ProgInfo<String>, EngineError> {
            let report = self.run(analysis, module)?;
            let reg = self.registry.get(analysis).expect("checked by run");
            let (local, imported) = prog_parts(&report, module);
            let show = |m: ValueMap| -> Result<_, AnalysisError> {
                m.into_iter().map(|(q, v)| Ok((q, reg.show(&v)?))).collect()
            };
            Ok(ProgInfo::new(show(local)?, show(imported)?))
        };
        inner().map_err(|e| e.to_string())
    }

    /// API mode for an analysis that need not be registered. Its base
    /// chain is taken from the registry. Ad-hoc analyses carry no version,
    /// so they never read or write the persistent cache.
    pub fn analyze_generic<A: AbstractValue>(
        &self,
        analysis: &Analysis<A>,
        module: &str,
    ) -> Result<ProgInfo<A>, String> {
        let inner = || -> Result<ProgInfo<A>, EngineError> {
            let mut entries: Vec<_> = self
                .registry
                .iter()
                .filter(|r| r.name() != analysis.name())
                .cloned()
                .collect();
            entries.push(cass_analysis(analysis.clone(), |_| String::new()));
            let registry = Registry::new(entries)?;
            let opts = RunOptions {
                cache_dir: None,
                ..self.opts.clone()
            };
            let report = run_master(
                &registry,
                analysis.name(),
                module,
                self.pool,
                &self.search_path,
                &opts,
            )?;
            let (local, imported) = prog_parts(&report, module);
            Ok(analysis.decode_prog_info(&local, &imported)?)
        };
        inner().map_err(|e| e.to_string())
    }

    fn unknown(&self, name: &str) -> EngineError {
        EngineError::UnknownAnalysis {
            name: name.to_string(),
            available: self.registry.names().map(str::to_string).collect(),
        }
    }
}

fn prog_parts(report: &RunReport, module: &str) -> (ValueMap, ValueMap) {
    let imported = report.imports[module]
        .iter()
        .flat_map(|m| report.entries[m].public_values.clone())
        .collect();
    (report.entries[module].all_values.clone(), imported)
}
