use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{CombType, Expr, FuncDecl, Module, Pattern, QName, Rule, TypeExpr, VarIndex};

/// One violated well-formedness condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub message: String,
}

impl Violation {
    fn new(entity: impl fmt::Display, message: impl Into<String>) -> Self {
        Violation {
            entity: entity.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {origin} at {line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid module {origin}: {}", join(.violations))]
    Validation {
        origin: String,
        violations: Vec<Violation>,
    },
}

/// 64-bit content digest (first eight bytes of SHA-256, big endian).
pub fn source_hash(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_be_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

/// Reads, parses and validates one IR file.
pub fn load_module(path: &Path) -> Result<Module, LoadError> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => LoadError::FileNotFound(path.to_path_buf()),
        _ => LoadError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    parse_module(&bytes, &path.display().to_string())
}

/// Parses and validates IR bytes; `origin` is only used in error messages.
pub fn parse_module(bytes: &[u8], origin: &str) -> Result<Module, LoadError> {
    let mut module: Module = serde_json::from_slice(bytes).map_err(|e| LoadError::Parse {
        origin: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    module.source_hash = source_hash(bytes);
    let violations = validate(&module);
    if violations.is_empty() {
        Ok(module)
    } else {
        Err(LoadError::Validation {
            origin: origin.to_string(),
            violations,
        })
    }
}

fn check_qname(q: &QName, out: &mut Vec<Violation>) {
    if q.module.is_empty() || q.name.is_empty() {
        out.push(Violation::new(
            format!("{:?}", (&q.module, &q.name)),
            "qualified name with empty component",
        ));
    }
}

/// Local arities used to check patterns and type applications inside the
/// module itself. Imported names are checked later by [`link_check`].
struct Arities {
    constructors: BTreeMap<QName, usize>,
    types: BTreeMap<QName, usize>,
}

impl Arities {
    fn of(modules: &[&Module]) -> Self {
        let mut constructors = BTreeMap::new();
        let mut types = BTreeMap::new();
        for m in modules {
            for t in &m.types {
                types.insert(t.name.clone(), t.params.len());
                for c in &t.constructors {
                    constructors.insert(c.name.clone(), c.arity);
                }
            }
        }
        Arities {
            constructors,
            types,
        }
    }
}

fn validate(m: &Module) -> Vec<Violation> {
    let mut out = Vec::new();
    if m.name.is_empty() {
        out.push(Violation::new("<module>", "empty module name"));
    }
    let mut seen_imports = BTreeSet::new();
    for imp in &m.imports {
        if imp.is_empty() {
            out.push(Violation::new(&m.name, "empty import name"));
        } else if imp == &m.name {
            out.push(Violation::new(&m.name, "module imports itself"));
        } else if !seen_imports.insert(imp) {
            out.push(Violation::new(&m.name, format!("duplicate import {imp}")));
        }
    }

    let mut type_names = BTreeSet::new();
    for t in &m.types {
        check_qname(&t.name, &mut out);
        if t.name.module != m.name {
            out.push(Violation::new(&t.name, "type declared under a foreign module"));
        }
        if !type_names.insert(&t.name) {
            out.push(Violation::new(&t.name, "duplicate type name"));
        }
        if t.constructors.is_empty() && !t.external {
            out.push(Violation::new(
                &t.name,
                "type without constructors must be flagged external",
            ));
        }
        let params: BTreeSet<_> = t.params.iter().collect();
        if params.len() != t.params.len() {
            out.push(Violation::new(&t.name, "duplicate type parameter"));
        }
    }
    let mut cons_names = BTreeSet::new();
    for (c, t) in m.constructors() {
        check_qname(&c.name, &mut out);
        if c.name.module != m.name {
            out.push(Violation::new(
                &c.name,
                "constructor declared under a foreign module",
            ));
        }
        if !cons_names.insert(&c.name) {
            out.push(Violation::new(&c.name, "duplicate constructor name"));
        }
        if c.arity != c.args.len() {
            out.push(Violation::new(
                &c.name,
                format!(
                    "arity {} but {} argument types (in type {})",
                    c.arity,
                    c.args.len(),
                    t.name
                ),
            ));
        }
    }

    let arities = Arities::of(&[m]);
    for (c, t) in m.constructors() {
        for ty in &c.args {
            check_type_expr(ty, &c.name, &arities, &mut out);
            check_type_vars(ty, &t.params, &c.name, &mut out);
        }
    }

    let mut func_names = BTreeSet::new();
    for f in &m.functions {
        check_qname(&f.name, &mut out);
        if f.name.module != m.name {
            out.push(Violation::new(
                &f.name,
                "function declared under a foreign module",
            ));
        }
        if !func_names.insert(&f.name) {
            out.push(Violation::new(&f.name, "duplicate function name"));
        }
        check_type_expr(&f.type_sig, &f.name, &arities, &mut out);
        validate_rule(f, &arities, &mut out);
    }
    out
}

fn check_type_expr(t: &TypeExpr, owner: &QName, arities: &Arities, out: &mut Vec<Violation>) {
    match t {
        TypeExpr::TVar(_) => {}
        TypeExpr::FuncType(d, r) => {
            check_type_expr(d, owner, arities, out);
            check_type_expr(r, owner, arities, out);
        }
        TypeExpr::TCons { name, args } => {
            check_qname(name, out);
            if let Some(&n) = arities.types.get(name) {
                if n != args.len() {
                    out.push(Violation::new(
                        owner,
                        format!("type {name} expects {n} arguments, got {}", args.len()),
                    ));
                }
            }
            for a in args {
                check_type_expr(a, owner, arities, out);
            }
        }
    }
}

fn check_type_vars(t: &TypeExpr, params: &[VarIndex], owner: &QName, out: &mut Vec<Violation>) {
    match t {
        TypeExpr::TVar(v) => {
            if !params.contains(v) {
                out.push(Violation::new(owner, format!("unbound type variable {v}")));
            }
        }
        TypeExpr::FuncType(d, r) => {
            check_type_vars(d, params, owner, out);
            check_type_vars(r, params, owner, out);
        }
        TypeExpr::TCons { args, .. } => {
            for a in args {
                check_type_vars(a, params, owner, out);
            }
        }
    }
}

fn validate_rule(f: &FuncDecl, arities: &Arities, out: &mut Vec<Violation>) {
    let (params, body) = match &f.rule {
        Rule::External(label) => {
            if label.is_empty() {
                out.push(Violation::new(&f.name, "external rule with empty label"));
            }
            return;
        }
        Rule::Rule { params, body } => (params, body),
    };
    if params.len() != f.arity {
        out.push(Violation::new(
            &f.name,
            format!("arity {} but {} rule parameters", f.arity, params.len()),
        ));
    }
    let mut scope = BTreeSet::new();
    for &p in params {
        if !scope.insert(p) {
            out.push(Violation::new(&f.name, format!("duplicate parameter {p}")));
        }
    }
    check_expr(body, &f.name, &mut scope, arities, out);
}

fn bind(
    vars: &[VarIndex],
    scope: &mut BTreeSet<VarIndex>,
    owner: &QName,
    what: &str,
    out: &mut Vec<Violation>,
) -> Vec<VarIndex> {
    let mut added = Vec::new();
    for &v in vars {
        if scope.contains(&v) {
            out.push(Violation::new(
                owner,
                format!("{what} variable {v} shadows an enclosing variable"),
            ));
        } else {
            scope.insert(v);
            added.push(v);
        }
    }
    added
}

fn check_expr(
    e: &Expr,
    owner: &QName,
    scope: &mut BTreeSet<VarIndex>,
    arities: &Arities,
    out: &mut Vec<Violation>,
) {
    match e {
        Expr::Var(v) => {
            if !scope.contains(v) {
                out.push(Violation::new(owner, format!("unbound variable {v}")));
            }
        }
        Expr::Lit(_) => {}
        Expr::Comb { name, args, .. } => {
            check_qname(name, out);
            for a in args {
                check_expr(a, owner, scope, arities, out);
            }
        }
        Expr::Or(l, r) => {
            check_expr(l, owner, scope, arities, out);
            check_expr(r, owner, scope, arities, out);
        }
        Expr::Free { vars, body } => {
            let added = bind(vars, scope, owner, "free", out);
            check_expr(body, owner, scope, arities, out);
            for v in added {
                scope.remove(&v);
            }
        }
        Expr::Case {
            scrutinee,
            branches,
            ..
        } => {
            check_expr(scrutinee, owner, scope, arities, out);
            if branches.is_empty() {
                out.push(Violation::new(owner, "case without branches"));
            }
            let cons = branches
                .iter()
                .filter(|(p, _)| matches!(p, Pattern::ConsPattern { .. }))
                .count();
            if cons != 0 && cons != branches.len() {
                out.push(Violation::new(
                    owner,
                    "case mixes constructor and literal patterns",
                ));
            }
            let mut seen_cons = BTreeSet::new();
            let mut seen_lits = BTreeSet::new();
            for (pat, body) in branches {
                match pat {
                    Pattern::ConsPattern { name, vars } => {
                        check_qname(name, out);
                        if !seen_cons.insert(name) {
                            out.push(Violation::new(
                                owner,
                                format!("duplicate case pattern {name}"),
                            ));
                        }
                        if let Some(&n) = arities.constructors.get(name) {
                            if n != vars.len() {
                                out.push(Violation::new(
                                    owner,
                                    format!(
                                        "pattern {name} binds {} variables, constructor arity {n}",
                                        vars.len()
                                    ),
                                ));
                            }
                        }
                        let unique: BTreeSet<_> = vars.iter().collect();
                        if unique.len() != vars.len() {
                            out.push(Violation::new(
                                owner,
                                format!("pattern {name} repeats a variable"),
                            ));
                        }
                        let added = bind(vars, scope, owner, "pattern", out);
                        check_expr(body, owner, scope, arities, out);
                        for v in added {
                            scope.remove(&v);
                        }
                    }
                    Pattern::LitPattern(lit) => {
                        if !seen_lits.insert(lit.key()) {
                            out.push(Violation::new(
                                owner,
                                format!("duplicate literal pattern {lit:?}"),
                            ));
                        }
                        check_expr(body, owner, scope, arities, out);
                    }
                }
            }
        }
    }
}

/// Checks that every name a module references is declared by the module
/// itself or one of its direct imports, with matching arities where they
/// apply. `imports` must hold the loaded direct imports.
pub fn link_check(module: &Module, imports: &[&Module]) -> Result<(), LoadError> {
    let mut scope: Vec<&Module> = vec![module];
    scope.extend(imports.iter().copied());
    let arities = Arities::of(&scope);
    let functions: BTreeMap<&QName, usize> = scope
        .iter()
        .flat_map(|m| m.functions.iter().map(|f| (&f.name, f.arity)))
        .collect();
    let known_modules: BTreeSet<&str> = scope.iter().map(|m| m.name.as_str()).collect();

    let mut out = Vec::new();
    let resolve = |out: &mut Vec<Violation>, owner: &QName, name: &QName, declared: bool, what: &str| {
        if !known_modules.contains(name.module.as_str()) {
            out.push(Violation::new(
                owner,
                format!("{what} {name} refers to module {} which is not imported", name.module),
            ));
        } else if !declared {
            out.push(Violation::new(owner, format!("unknown {what} {name}")));
        }
    };

    let mut type_refs = Vec::new();
    for (c, _) in module.constructors() {
        for t in &c.args {
            collect_type_refs(t, &c.name, &mut type_refs);
        }
    }
    for f in &module.functions {
        collect_type_refs(&f.type_sig, &f.name, &mut type_refs);
    }
    for (owner, name, argc) in type_refs {
        resolve(&mut out, owner, name, arities.types.contains_key(name), "type");
        if let Some(&n) = arities.types.get(name) {
            if n != argc {
                out.push(Violation::new(
                    owner,
                    format!("type {name} expects {n} arguments, got {argc}"),
                ));
            }
        }
    }

    for f in &module.functions {
        let Some(body) = f.body() else { continue };
        let mut stack = vec![body];
        while let Some(e) = stack.pop() {
            match e {
                Expr::Comb {
                    ctype: CombType::FuncCall,
                    name,
                    args,
                } => {
                    let arity = functions.get(name);
                    resolve(&mut out, &f.name, name, arity.is_some(), "function");
                    if let Some(&n) = arity {
                        if n != args.len() {
                            out.push(Violation::new(
                                &f.name,
                                format!("call of {name} has {} arguments, arity {n}", args.len()),
                            ));
                        }
                    }
                }
                Expr::Comb {
                    ctype: CombType::ConsCall,
                    name,
                    args,
                } => {
                    let arity = arities.constructors.get(name);
                    resolve(&mut out, &f.name, name, arity.is_some(), "constructor");
                    if let Some(&n) = arity {
                        if n != args.len() {
                            out.push(Violation::new(
                                &f.name,
                                format!("constructor {name} applied to {} arguments, arity {n}", args.len()),
                            ));
                        }
                    }
                }
                Expr::Case { branches, .. } => {
                    for (p, _) in branches {
                        if let Pattern::ConsPattern { name, vars } = p {
                            let arity = arities.constructors.get(name);
                            resolve(&mut out, &f.name, name, arity.is_some(), "constructor");
                            if let Some(&n) = arity {
                                if n != vars.len() {
                                    out.push(Violation::new(
                                        &f.name,
                                        format!(
                                            "pattern {name} binds {} variables, constructor arity {n}",
                                            vars.len()
                                        ),
                                    ));
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
            stack.extend(e.children());
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(LoadError::Validation {
            origin: module.name.clone(),
            violations: out,
        })
    }
}

fn collect_type_refs<'a>(t: &'a TypeExpr, owner: &'a QName, out: &mut Vec<(&'a QName, &'a QName, usize)>) {
    match t {
        TypeExpr::TVar(_) => {}
        TypeExpr::FuncType(d, r) => {
            collect_type_refs(d, owner, out);
            collect_type_refs(r, owner, out);
        }
        TypeExpr::TCons { name, args } => {
            out.push((owner, name, args.len()));
            for a in args {
                collect_type_refs(a, owner, out);
            }
        }
    }
}
