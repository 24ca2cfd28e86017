use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::ir::{link_check, load_module, LoadError, Module, Violation};

/// File extension of IR modules.
pub const IR_SUFFIX: &str = ".fcy.json";

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("module {name} not found in {}", display_dirs(.searched))]
    ModuleNotFound { name: String, searched: Vec<PathBuf> },
    #[error("import cycle: {}", .0.join(" -> "))]
    ImportCycle(Vec<String>),
    #[error(transparent)]
    Load(#[from] LoadError),
}

fn display_dirs(dirs: &[PathBuf]) -> String {
    let v: Vec<String> = dirs.iter().map(|d| d.display().to_string()).collect();
    format!("[{}]", v.join(", "))
}

/// Transitive import graph rooted at one module, with every module loaded.
#[derive(Clone, Debug, Default)]
pub struct ModuleGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<String, BTreeSet<String>>,
    pub paths: BTreeMap<String, PathBuf>,
    pub modules: BTreeMap<String, Arc<Module>>,
}

impl ModuleGraph {
    pub fn module(&self, name: &str) -> Option<&Arc<Module>> {
        self.modules.get(name)
    }

    /// Builds a graph from already loaded modules (all imports must be
    /// present). Paths are left empty.
    pub fn from_modules(modules: impl IntoIterator<Item = Module>) -> Self {
        let mut g = ModuleGraph::default();
        for m in modules {
            g.nodes.insert(m.name.clone());
            g.edges
                .insert(m.name.clone(), m.imports.iter().cloned().collect());
            g.modules.insert(m.name.clone(), Arc::new(m));
        }
        g
    }
}

/// Path of `<name>.fcy.json` in the first directory that has it.
pub fn locate(name: &str, search_path: &[PathBuf]) -> Option<PathBuf> {
    search_path
        .iter()
        .map(|d| d.join(format!("{name}{IR_SUFFIX}")))
        .find(|p| p.is_file())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mark {
    Active,
    Done,
}

/// Loads `root` and everything it transitively imports, rejecting cycles
/// and dangling references.
pub fn resolve(root: &str, search_path: &[PathBuf]) -> Result<ModuleGraph, ResolveError> {
    let mut g = ModuleGraph::default();
    let mut marks: BTreeMap<String, Mark> = BTreeMap::new();
    let mut stack: Vec<String> = Vec::new();
    visit(root, search_path, &mut g, &mut marks, &mut stack)?;
    for m in g.modules.values() {
        let imports: Vec<&Module> = m.imports.iter().map(|i| &*g.modules[i]).collect();
        link_check(m, &imports)?;
    }
    Ok(g)
}

fn visit(
    name: &str,
    search_path: &[PathBuf],
    g: &mut ModuleGraph,
    marks: &mut BTreeMap<String, Mark>,
    stack: &mut Vec<String>,
) -> Result<(), ResolveError> {
    match marks.get(name) {
        Some(Mark::Done) => return Ok(()),
        Some(Mark::Active) => {
            let start = stack.iter().position(|s| s == name).unwrap_or(0);
            let mut cycle = stack[start..].to_vec();
            cycle.push(name.to_string());
            return Err(ResolveError::ImportCycle(cycle));
        }
        None => {}
    }
    let path = locate(name, search_path).ok_or_else(|| ResolveError::ModuleNotFound {
        name: name.to_string(),
        searched: search_path.to_vec(),
    })?;
    let module = load_module(&path)?;
    check_name(&module, name, &path)?;
    marks.insert(name.to_string(), Mark::Active);
    stack.push(name.to_string());
    for imp in &module.imports {
        visit(imp, search_path, g, marks, stack)?;
    }
    stack.pop();
    marks.insert(name.to_string(), Mark::Done);
    g.nodes.insert(name.to_string());
    g.edges
        .insert(name.to_string(), module.imports.iter().cloned().collect());
    g.paths.insert(name.to_string(), path);
    g.modules.insert(name.to_string(), Arc::new(module));
    Ok(())
}

fn check_name(module: &Module, expected: &str, path: &Path) -> Result<(), LoadError> {
    if module.name == expected {
        return Ok(());
    }
    Err(LoadError::Validation {
        origin: path.display().to_string(),
        violations: vec![Violation {
            entity: module.name.clone(),
            message: format!("file is named for module {expected}"),
        }],
    })
}

/// Imports before importers; among ready modules the smallest name goes
/// first.
pub fn topo_order(g: &ModuleGraph) -> Vec<String> {
    let mut pending: BTreeMap<&str, usize> = g
        .nodes
        .iter()
        .map(|n| (n.as_str(), g.edges.get(n).map_or(0, BTreeSet::len)))
        .collect();
    let mut importers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (m, imps) in &g.edges {
        for i in imps {
            importers.entry(i.as_str()).or_default().push(m.as_str());
        }
    }
    let mut ready: BTreeSet<&str> = pending
        .iter()
        .filter(|(_, &n)| n == 0)
        .map(|(m, _)| *m)
        .collect();
    let mut out = Vec::with_capacity(g.nodes.len());
    while let Some(m) = ready.pop_first() {
        out.push(m.to_string());
        for &imp in importers.get(m).into_iter().flatten() {
            let n = pending.get_mut(imp).expect("importer is a node");
            *n -= 1;
            if *n == 0 {
                ready.insert(imp);
            }
        }
    }
    out
}
