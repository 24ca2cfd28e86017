//! Master/worker execution of one analysis over a whole import graph.
//!
//! The master owns all scheduling state. Workers are a fixed pool of threads
//! created per run; each receives a self-contained job (module, import
//! results, base results) and sends back one [`CacheEntry`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{Registry, RegisteredAnalysis, RunEnv};
use crate::ir::Module;
use crate::manager::{
    analysis_key, analyze_module, base_info, cache_lookup, cache_store, compute_fingerprints,
    resolve, topo_order, CacheEntry, CacheError, Fingerprint, ManagerError, ModuleGraph,
    ResolveError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolConfig {
    pub workers: usize,
    /// Only ever consider the first unfinished module in topological order,
    /// instead of any module whose imports are done.
    pub head_only: bool,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            workers: 1,
            head_only: false,
        }
    }
}

impl PoolConfig {
    pub fn with_workers(workers: usize) -> Self {
        PoolConfig {
            workers,
            ..PoolConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Dispatch,
    Done,
    CacheHit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Seconds since the start of the run.
    pub ts: f64,
    pub event: EventKind,
    pub module: String,
    pub analysis: String,
    pub worker: Option<usize>,
}

#[derive(Debug, Error)]
pub enum WorkerError {
    #[error(transparent)]
    Manager(#[from] ManagerError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("worker panicked: {0}")]
    Panic(String),
}

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("unknown analysis {0}")]
    UnknownAnalysis(String),
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("analysis {analysis} of module {module} failed: {cause}")]
    WorkerFailure {
        module: String,
        analysis: String,
        #[source]
        cause: Box<WorkerError>,
    },
    #[error("event log: {0}")]
    EventLog(#[source] std::io::Error),
}

/// Where results are read from and written to, and how the run is observed.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub cache_dir: Option<PathBuf>,
    /// Appends newline-delimited JSON events to this file.
    pub event_log: Option<PathBuf>,
    pub env: RunEnv,
}

#[derive(Debug, Default)]
pub struct RunReport {
    /// Results of the requested analysis for every module in the graph.
    pub entries: BTreeMap<String, CacheEntry>,
    /// Events of all passes, base analyses first.
    pub events: Vec<Event>,
    /// Cache files that could not be used.
    pub warnings: Vec<String>,
    /// Direct imports of every module in the graph.
    pub imports: BTreeMap<String, BTreeSet<String>>,
}

impl RunReport {
    pub fn dispatches(&self, analysis: &str) -> usize {
        self.events
            .iter()
            .filter(|e| e.event == EventKind::Dispatch && e.analysis == analysis)
            .count()
    }
}

/// Everything a worker needs for one (module, analysis) pair.
pub struct JobInput {
    pub module: Arc<Module>,
    pub analysis: RegisteredAnalysis,
    pub fingerprint: Fingerprint,
    /// This analysis's entries for the direct imports.
    pub imports: BTreeMap<String, CacheEntry>,
    /// Base analysis entries for the module and its direct imports.
    pub base: Option<BTreeMap<String, CacheEntry>>,
    pub cache_dir: Option<PathBuf>,
    pub env: RunEnv,
}

/// Analyzes one module and persists the result. A valid cache entry is
/// returned without recomputation.
pub fn worker_step(job: &JobInput) -> Result<CacheEntry, WorkerError> {
    let a = &job.analysis;
    if let Some(dir) = &job.cache_dir {
        if let Ok(Some(e)) =
            cache_lookup(dir, &job.module.name, a.name(), a.version(), job.fingerprint)
        {
            return Ok(e);
        }
    }
    let base = match (&job.base, a.analysis().base()) {
        (Some(entries), Some(b)) => Some(base_info(b.as_ref(), &job.module, entries)?),
        _ => None,
    };
    let entry = analyze_module(a, &job.module, &job.imports, base.as_ref(), job.fingerprint, &job.env)?;
    if let Some(dir) = &job.cache_dir {
        cache_store(dir, &entry)?;
    }
    Ok(entry)
}

/// Resolves `root` on `search_path` and runs `analysis` (after its base
/// chain) over the whole graph.
pub fn run_master(
    registry: &Registry,
    analysis: &str,
    root: &str,
    cfg: PoolConfig,
    search_path: &[PathBuf],
    opts: &RunOptions,
) -> Result<RunReport, SchedulerError> {
    let graph = resolve(root, search_path)?;
    run_graph(registry, analysis, &graph, cfg, opts)
}

/// Like [`run_master`] on an already resolved graph.
pub fn run_graph(
    registry: &Registry,
    analysis: &str,
    graph: &ModuleGraph,
    cfg: PoolConfig,
    opts: &RunOptions,
) -> Result<RunReport, SchedulerError> {
    if cfg.workers == 0 {
        return Err(SchedulerError::NoWorkers);
    }
    let chain = registry
        .base_chain(analysis)
        .ok_or_else(|| SchedulerError::UnknownAnalysis(analysis.to_string()))?;
    let order = topo_order(graph);
    let mut log = EventSink::open(opts.event_log.as_deref())?;

    let (result_tx, result_rx) = unbounded::<Outcome>();
    std::thread::scope(|s| {
        let mut workers = Vec::with_capacity(cfg.workers);
        for id in 0..cfg.workers {
            let (tx, rx) = unbounded::<JobInput>();
            let results = result_tx.clone();
            s.spawn(move || worker_loop(id, rx, results));
            workers.push(tx);
        }
        drop(result_tx);

        let mut report = RunReport {
            imports: graph.edges.clone(),
            ..RunReport::default()
        };
        let mut base_entries: Option<BTreeMap<String, CacheEntry>> = None;
        for (i, a) in chain.iter().enumerate() {
            let key = analysis_key(&chain[..=i]);
            let pass = Pass {
                analysis: a,
                graph,
                order: &order,
                fingerprints: compute_fingerprints(graph, &order, &key),
                base: base_entries.as_ref(),
                cfg,
                opts,
            };
            let entries = pass.run(&workers, &result_rx, &mut log, &mut report)?;
            base_entries = Some(entries);
        }
        report.entries = base_entries.unwrap_or_default();
        Ok(report)
    })
}

struct Outcome {
    worker: usize,
    module: String,
    result: Result<CacheEntry, WorkerError>,
}

fn worker_loop(id: usize, jobs: Receiver<JobInput>, results: Sender<Outcome>) {
    for job in jobs {
        let result = catch_unwind(AssertUnwindSafe(|| worker_step(&job)))
            .unwrap_or_else(|p| Err(WorkerError::Panic(panic_message(&*p))));
        let outcome = Outcome {
            worker: id,
            module: job.module.name.clone(),
            result,
        };
        if results.send(outcome).is_err() {
            return;
        }
    }
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

struct EventSink {
    start: Instant,
    file: Option<Mutex<std::fs::File>>,
}

impl EventSink {
    fn open(path: Option<&Path>) -> Result<Self, SchedulerError> {
        let file = match path {
            Some(p) => Some(Mutex::new(
                std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(SchedulerError::EventLog)?,
            )),
            None => None,
        };
        Ok(EventSink {
            start: Instant::now(),
            file,
        })
    }

    fn emit(
        &mut self,
        report: &mut RunReport,
        event: EventKind,
        module: &str,
        analysis: &str,
        worker: Option<usize>,
    ) -> Result<(), SchedulerError> {
        let e = Event {
            ts: self.start.elapsed().as_secs_f64(),
            event,
            module: module.to_string(),
            analysis: analysis.to_string(),
            worker,
        };
        if let Some(f) = &self.file {
            let mut line = serde_json::to_string(&e).expect("event serializes");
            line.push('\n');
            let mut f = f.lock().expect("event log lock");
            f.write_all(line.as_bytes()).map_err(SchedulerError::EventLog)?;
        }
        report.events.push(e);
        Ok(())
    }
}

struct Pass<'a> {
    analysis: &'a RegisteredAnalysis,
    graph: &'a ModuleGraph,
    order: &'a [String],
    fingerprints: BTreeMap<String, Fingerprint>,
    base: Option<&'a BTreeMap<String, CacheEntry>>,
    cfg: PoolConfig,
    opts: &'a RunOptions,
}

impl Pass<'_> {
    fn run(
        &self,
        workers: &[Sender<JobInput>],
        results: &Receiver<Outcome>,
        log: &mut EventSink,
        report: &mut RunReport,
    ) -> Result<BTreeMap<String, CacheEntry>, SchedulerError> {
        let name = self.analysis.name();
        let mut pending: Vec<&String> = self.order.iter().collect();
        let mut done: BTreeMap<String, CacheEntry> = BTreeMap::new();
        let mut idle: BTreeSet<usize> = (0..workers.len()).collect();
        let mut running = 0usize;
        let mut failure: Option<SchedulerError> = None;

        while !pending.is_empty() || running > 0 {
            if failure.is_none() {
                if let Some(pos) = self.next_ready(&pending, &done) {
                    let module = pending[pos];
                    if let Some(entry) = self.cached(module, report) {
                        pending.remove(pos);
                        log.emit(report, EventKind::CacheHit, module, name, None)?;
                        done.insert(module.clone(), entry);
                        continue;
                    }
                    if let Some(w) = idle.pop_first() {
                        pending.remove(pos);
                        let job = self.job(module, &done);
                        log.emit(report, EventKind::Dispatch, module, name, Some(w))?;
                        workers[w].send(job).expect("worker alive while pool is open");
                        running += 1;
                        continue;
                    }
                }
            }
            if running == 0 {
                // Nothing in flight: either a failure stopped dispatching or
                // (impossible for an acyclic graph) no module is ready.
                break;
            }
            let out = results.recv().expect("workers outlive the master loop");
            running -= 1;
            idle.insert(out.worker);
            match out.result {
                Ok(entry) => {
                    log.emit(report, EventKind::Done, &out.module, name, Some(out.worker))?;
                    done.insert(out.module, entry);
                }
                Err(cause) => {
                    log::error!("{name} on {} failed: {cause}", out.module);
                    if failure.is_none() {
                        failure = Some(SchedulerError::WorkerFailure {
                            module: out.module,
                            analysis: name.to_string(),
                            cause: Box::new(cause),
                        });
                    }
                }
            }
        }
        match failure {
            Some(e) => Err(e),
            None => {
                assert!(pending.is_empty(), "acyclic graph always drains");
                Ok(done)
            }
        }
    }

    fn is_ready(&self, module: &str, done: &BTreeMap<String, CacheEntry>) -> bool {
        self.graph.edges[module].iter().all(|i| done.contains_key(i))
    }

    fn next_ready(&self, pending: &[&String], done: &BTreeMap<String, CacheEntry>) -> Option<usize> {
        if self.cfg.head_only {
            return pending.first().filter(|m| self.is_ready(m, done)).map(|_| 0);
        }
        pending.iter().position(|m| self.is_ready(m, done))
    }

    fn cached(&self, module: &str, report: &mut RunReport) -> Option<CacheEntry> {
        let dir = self.opts.cache_dir.as_deref()?;
        let a = self.analysis;
        match cache_lookup(dir, module, a.name(), a.version(), self.fingerprints[module]) {
            Ok(hit) => hit,
            Err(e) => {
                log::warn!("ignoring cache: {e}");
                report.warnings.push(e.to_string());
                None
            }
        }
    }

    fn job(&self, module: &str, done: &BTreeMap<String, CacheEntry>) -> JobInput {
        let imports: BTreeMap<String, CacheEntry> = self.graph.edges[module]
            .iter()
            .map(|i| (i.clone(), done[i].clone()))
            .collect();
        let base = self.base.map(|b| {
            std::iter::once(module)
                .chain(self.graph.edges[module].iter().map(String::as_str))
                .map(|m| (m.to_string(), b[m].clone()))
                .collect()
        });
        JobInput {
            module: self.graph.modules[module].clone(),
            analysis: self.analysis.clone(),
            fingerprint: self.fingerprints[module],
            imports,
            base,
            cache_dir: self.opts.cache_dir.clone(),
            env: self.opts.env.clone(),
        }
    }
}
