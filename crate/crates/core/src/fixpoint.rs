//! Per-module evaluation of analyses: a single pass for analyses without
//! dependencies, a FIFO worklist fixpoint for dependency analyses.
//!
//! Imported values are constants during solving. Local entities start at
//! the analysis' bottom value and an entity is recomputed whenever one of
//! its direct local dependencies changed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::analysis::{AbstractValue, Analysis, AnalysisError, BaseInfo, RunEnv, Target};
use crate::ir::{called_functions, used_types, Module, QName};

/// Multiplier for the iteration backstop: `CAP_PER_NODE * |nodes|` calls.
pub const CAP_PER_NODE: usize = 10_000;

/// Local dependency structure of one module.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DepGraph {
    pub nodes: BTreeSet<QName>,
    /// Direct local dependencies (callees or used types). Self-edges kept.
    pub edges: BTreeMap<QName, BTreeSet<QName>>,
    /// Exact transpose of `edges`.
    pub reverse: BTreeMap<QName, BTreeSet<QName>>,
}

impl DepGraph {
    /// Builds the graph from full dependency sets, dropping non-local
    /// targets.
    pub fn new(deps: &BTreeMap<QName, BTreeSet<QName>>) -> Self {
        let nodes: BTreeSet<QName> = deps.keys().cloned().collect();
        let mut edges = BTreeMap::new();
        let mut reverse: BTreeMap<QName, BTreeSet<QName>> =
            nodes.iter().map(|n| (n.clone(), BTreeSet::new())).collect();
        for (n, ds) in deps {
            let local: BTreeSet<QName> = ds.iter().filter(|d| nodes.contains(*d)).cloned().collect();
            for d in &local {
                reverse.get_mut(d).expect("local node").insert(n.clone());
            }
            edges.insert(n.clone(), local);
        }
        DepGraph {
            nodes,
            edges,
            reverse,
        }
    }

    /// Dependency graph of a module for a function or type analysis.
    /// External functions have no dependencies.
    pub fn of_module(module: &Module, target: Target) -> Self {
        DepGraph::new(&full_dependencies(module, target))
    }
}

/// All direct dependencies, local and imported, of each local entity.
pub(crate) fn full_dependencies(module: &Module, target: Target) -> BTreeMap<QName, BTreeSet<QName>> {
    match target {
        Target::Function => module
            .functions
            .iter()
            .map(|f| (f.name.clone(), called_functions(f).unwrap_or_default()))
            .collect(),
        Target::Type => module
            .types
            .iter()
            .map(|t| (t.name.clone(), used_types(t)))
            .collect(),
        Target::Constructor => module
            .constructors()
            .map(|(c, _)| (c.name.clone(), BTreeSet::new()))
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult<A> {
    /// One value per local entity.
    pub values: BTreeMap<QName, A>,
    /// Number of transfer calls made.
    pub iterations: usize,
    /// Referenced imported entities that had no interface value and were
    /// filled from the external default.
    pub defaulted: BTreeSet<QName>,
}

pub type Observer<'a, A> = &'a mut dyn FnMut(&QName, &A);

/// Knobs used by tests; production callers pass `SolveOptions::default()`.
pub struct SolveOptions<'a, A> {
    /// Initial worklist order; defaults to QName order. Must be a
    /// permutation of the solvable local entities when given.
    pub initial_order: Option<Vec<QName>>,
    /// Called after every value change of a local entity.
    pub observer: Option<Observer<'a, A>>,
}

impl<A> Default for SolveOptions<'_, A> {
    fn default() -> Self {
        SolveOptions {
            initial_order: None,
            observer: None,
        }
    }
}

/// Solves a dependency analysis over one module.
pub fn solve<A: AbstractValue>(
    analysis: &Analysis<A>,
    module: &Module,
    imported: &BTreeMap<QName, A>,
    base: Option<&BaseInfo>,
    env: &RunEnv,
) -> Result<SolverResult<A>, AnalysisError> {
    solve_with(analysis, module, imported, base, env, SolveOptions::default())
}

pub fn solve_with<A: AbstractValue>(
    analysis: &Analysis<A>,
    module: &Module,
    imported: &BTreeMap<QName, A>,
    base: Option<&BaseInfo>,
    env: &RunEnv,
    mut opts: SolveOptions<'_, A>,
) -> Result<SolverResult<A>, AnalysisError> {
    let bottom = match analysis.bottom() {
        Some(b) if analysis.kind().is_dependency() && analysis.target() != Target::Constructor => b,
        _ => {
            return Err(AnalysisError::WrongKind {
                analysis: analysis.name().to_string(),
                target: analysis.target(),
                kind: analysis.kind(),
                expected: "a dependency analysis",
            })
        }
    };
    let target = analysis.target();
    let deps = full_dependencies(module, target);
    let graph = DepGraph::new(&deps);
    let names: Vec<&QName> = graph.nodes.iter().collect();
    let index: BTreeMap<&QName, usize> = names.iter().enumerate().map(|(i, q)| (*q, i)).collect();

    // Constant values for non-local dependencies, resolved once.
    let mut constants: BTreeMap<QName, A> = BTreeMap::new();
    let mut defaulted = BTreeSet::new();
    for d in deps.values().flatten() {
        if graph.nodes.contains(d) || constants.contains_key(d) {
            continue;
        }
        let v = match imported.get(d) {
            Some(v) => v.clone(),
            None => {
                log::warn!(
                    "{}: no imported value for {d} in {}; using external default",
                    analysis.name(),
                    module.name
                );
                defaulted.insert(d.clone());
                analysis.external_value(d, env)?
            }
        };
        constants.insert(d.clone(), v);
    }

    let mut current: Vec<A> = Vec::with_capacity(names.len());
    let mut solvable = vec![true; names.len()];
    for (i, q) in names.iter().enumerate() {
        let is_external = target == Target::Function
            && module.functions.iter().any(|f| &f.name == *q && f.is_external());
        if is_external {
            solvable[i] = false;
            current.push(analysis.external_value(q, env)?);
        } else {
            current.push(bottom.clone());
        }
    }

    let order: Vec<usize> = match opts.initial_order.take() {
        Some(order) => order
            .iter()
            .filter_map(|q| index.get(q).copied())
            .filter(|&i| solvable[i])
            .collect(),
        None => (0..names.len()).filter(|&i| solvable[i]).collect(),
    };
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut queued = vec![false; names.len()];
    for i in order {
        if !queued[i] {
            queued[i] = true;
            queue.push_back(i);
        }
    }
    // Entities left out of a custom order still need one evaluation.
    for i in 0..names.len() {
        if solvable[i] && !queued[i] {
            queued[i] = true;
            queue.push_back(i);
        }
    }

    let funcs: BTreeMap<&QName, _> = module.functions.iter().map(|f| (&f.name, f)).collect();
    let types: BTreeMap<&QName, _> = module.types.iter().map(|t| (&t.name, t)).collect();
    let cap = CAP_PER_NODE * names.len().max(1);
    let mut iterations = 0usize;

    while let Some(i) = queue.pop_front() {
        queued[i] = false;
        iterations += 1;
        if iterations > cap {
            return Err(AnalysisError::IterationCapExceeded {
                analysis: analysis.name().to_string(),
                module: module.name.clone(),
                cap,
            });
        }
        let q = names[i];
        let inputs: Vec<(QName, A)> = deps[q]
            .iter()
            .map(|d| {
                let v = match index.get(d) {
                    Some(&j) => current[j].clone(),
                    None => constants[d].clone(),
                };
                (d.clone(), v)
            })
            .collect();
        env.count_transfer();
        let new = match target {
            Target::Function => analysis.transfer_function(base, funcs[q], &inputs)?,
            Target::Type => analysis.transfer_type(base, types[q], &inputs)?,
            Target::Constructor => unreachable!("rejected above"),
        };
        if new != current[i] {
            if let Some(obs) = opts.observer.as_mut() {
                obs(q, &new);
            }
            current[i] = new;
            for dep in &graph.reverse[q] {
                let j = index[dep];
                if solvable[j] && !queued[j] {
                    queued[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }

    Ok(SolverResult {
        values: names.into_iter().cloned().zip(current).collect(),
        iterations,
        defaulted,
    })
}

/// Evaluates an analysis without dependencies: one transfer call per local
/// entity (external functions take their external value).
pub fn run_simple<A: AbstractValue>(
    analysis: &Analysis<A>,
    module: &Module,
    base: Option<&BaseInfo>,
    env: &RunEnv,
) -> Result<BTreeMap<QName, A>, AnalysisError> {
    if analysis.kind().is_dependency() {
        return Err(AnalysisError::WrongKind {
            analysis: analysis.name().to_string(),
            target: analysis.target(),
            kind: analysis.kind(),
            expected: "an analysis without dependencies",
        });
    }
    let mut out = BTreeMap::new();
    match analysis.target() {
        Target::Function => {
            for f in &module.functions {
                let v = if f.is_external() {
                    analysis.external_value(&f.name, env)?
                } else {
                    env.count_transfer();
                    analysis.transfer_function(base, f, &[])?
                };
                out.insert(f.name.clone(), v);
            }
        }
        Target::Type => {
            for t in &module.types {
                env.count_transfer();
                out.insert(t.name.clone(), analysis.transfer_type(base, t, &[])?);
            }
        }
        Target::Constructor => {
            for (c, t) in module.constructors() {
                env.count_transfer();
                out.insert(c.name.clone(), analysis.transfer_constructor(base, c, t)?);
            }
        }
    }
    Ok(out)
}
