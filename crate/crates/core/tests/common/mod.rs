#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cass::analysis::{AbstractValue, Analysis, BaseInfo, RunEnv, Target};
use cass::ir::{
    load_module, CaseType, CombType, ConsDecl, Expr, FuncDecl, Literal, Module, Pattern, QName,
    Rule, TypeDecl, TypeExpr, Visibility,
};

pub const CORPUS_MODULES: [&str; 4] = ["Prelude", "Demo", "ListUtils", "Main"];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus_module(name: &str) -> Module {
    load_module(&corpus_dir().join(format!("{name}.fcy.json"))).unwrap()
}

pub fn corpus() -> Vec<Module> {
    CORPUS_MODULES.iter().map(|m| corpus_module(m)).collect()
}

pub fn copy_corpus(dir: &Path) {
    for m in CORPUS_MODULES {
        let name = format!("{m}.fcy.json");
        std::fs::copy(corpus_dir().join(&name), dir.join(&name)).unwrap();
    }
}

pub fn write_module(dir: &Path, m: &Module) {
    let text = serde_json::to_string_pretty(m).unwrap();
    std::fs::write(dir.join(format!("{}.fcy.json", m.name)), text).unwrap();
}

// ---------------------------------------------------------------------------
// Random modules

fn int() -> TypeExpr {
    TypeExpr::TCons {
        name: QName::new("Prelude", "Int"),
        args: vec![],
    }
}

fn bool_ty() -> TypeExpr {
    TypeExpr::TCons {
        name: QName::new("Prelude", "Bool"),
        args: vec![],
    }
}

struct Gen {
    rng: ChaCha8Rng,
    next_var: u32,
    funcs: Vec<(QName, usize)>,
    conses: Vec<(QName, usize)>,
    /// Constructors of every type usable as a case scrutinee.
    data: Vec<Vec<(QName, usize)>>,
}

impl Gen {
    fn fresh(&mut self) -> u32 {
        self.next_var += 1;
        self.next_var
    }

    fn leaf(&mut self, env: &[u32]) -> Expr {
        if !env.is_empty() && self.rng.gen_bool(0.7) {
            Expr::Var(*env.choose(&mut self.rng).unwrap())
        } else {
            Expr::Lit(Literal::Int(self.rng.gen_range(0..4)))
        }
    }

    fn expr(&mut self, depth: u32, env: &[u32]) -> Expr {
        if depth == 0 {
            return self.leaf(env);
        }
        match self.rng.gen_range(0..12) {
            0 | 1 => self.leaf(env),
            2..=4 => {
                let (name, arity) = self.funcs.choose(&mut self.rng).unwrap().clone();
                let args = (0..arity).map(|_| self.expr(depth - 1, env)).collect();
                Expr::Comb {
                    ctype: CombType::FuncCall,
                    name,
                    args,
                }
            }
            5 => {
                let (name, arity) = self.conses.choose(&mut self.rng).unwrap().clone();
                let args = (0..arity).map(|_| self.expr(depth - 1, env)).collect();
                Expr::Comb {
                    ctype: CombType::ConsCall,
                    name,
                    args,
                }
            }
            6..=8 => self.case(depth, env),
            9 => Expr::Or(
                Box::new(self.expr(depth - 1, env)),
                Box::new(self.expr(depth - 1, env)),
            ),
            10 => {
                let v = self.fresh();
                let mut inner = env.to_vec();
                inner.push(v);
                Expr::Free {
                    vars: vec![v],
                    body: Box::new(self.expr(depth - 1, &inner)),
                }
            }
            _ => {
                let x = self.expr(depth - 1, env);
                let y = self.expr(depth - 1, env);
                Expr::Comb {
                    ctype: CombType::FuncCall,
                    name: QName::new("Prelude", "+"),
                    args: vec![x, y],
                }
            }
        }
    }

    fn case(&mut self, depth: u32, env: &[u32]) -> Expr {
        let ctype = if self.rng.gen_bool(0.2) {
            CaseType::Rigid
        } else {
            CaseType::Flex
        };
        let scrutinee = Box::new(if !env.is_empty() && self.rng.gen_bool(0.7) {
            Expr::Var(*env.choose(&mut self.rng).unwrap())
        } else {
            self.expr(depth - 1, env)
        });
        let mut branches = Vec::new();
        if self.rng.gen_bool(0.15) {
            let mut lits: Vec<i64> = (0..4).collect();
            lits.shuffle(&mut self.rng);
            for l in lits.into_iter().take(self.rng.gen_range(1..=3)) {
                branches.push((Pattern::LitPattern(Literal::Int(l)), self.expr(depth - 1, env)));
            }
        } else {
            let mut cons = self.data.choose(&mut self.rng).unwrap().clone();
            cons.shuffle(&mut self.rng);
            let keep = if self.rng.gen_bool(0.6) {
                cons.len()
            } else {
                self.rng.gen_range(1..=cons.len())
            };
            for (name, arity) in cons.into_iter().take(keep) {
                let vars: Vec<u32> = (0..arity).map(|_| self.fresh()).collect();
                let mut inner = env.to_vec();
                inner.extend(&vars);
                let body = self.expr(depth - 1, &inner);
                branches.push((Pattern::ConsPattern { name, vars }, body));
            }
        }
        Expr::Case {
            ctype,
            scrutinee,
            branches,
        }
    }
}

fn public_functions(m: &Module) -> impl Iterator<Item = (QName, usize)> + '_ {
    m.functions
        .iter()
        .filter(|f| f.visibility == Visibility::Public)
        .map(|f| (f.name.clone(), f.arity))
}

fn public_data(m: &Module) -> Vec<Vec<(QName, usize)>> {
    m.types
        .iter()
        .filter(|t| t.visibility == Visibility::Public && !t.constructors.is_empty())
        .map(|t| t.constructors.iter().map(|c| (c.name.clone(), c.arity)).collect())
        .collect()
}

/// Random valid module named `name` importing `imports` (the first of which
/// should be the Prelude). Functions 0, 1 and 2 are always recursive: 0
/// calls itself, 1 and 2 call each other.
pub fn random_module(seed: u64, name: &str, imports: &[&Module], max_funcs: usize) -> Module {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_types = rng.gen_range(1..=3);
    let n_funcs = rng.gen_range(3..=max_funcs.max(3));

    // Types first: arities of every local constructor are needed by the
    // expression generator.
    let mut types = Vec::new();
    for t in 0..n_types {
        let tname = QName::new(name, format!("T{t}"));
        let params: Vec<u32> = if rng.gen_bool(0.3) { vec![0] } else { vec![] };
        let visibility = if rng.gen_bool(0.8) {
            Visibility::Public
        } else {
            Visibility::Private
        };
        if rng.gen_bool(0.1) {
            types.push(TypeDecl {
                name: tname,
                visibility,
                params,
                constructors: vec![],
                external: true,
            });
            continue;
        }
        let n_cons = rng.gen_range(1..=3);
        let mut constructors = Vec::new();
        for c in 0..n_cons {
            let arity = rng.gen_range(0..=2);
            let args = (0..arity)
                .map(|_| match rng.gen_range(0..6) {
                    0 => int(),
                    1 => bool_ty(),
                    2 => TypeExpr::FuncType(Box::new(int()), Box::new(int())),
                    3 if !params.is_empty() => TypeExpr::TVar(0),
                    _ => {
                        let k = rng.gen_range(0..=t);
                        let n = if k == t { params.len() } else { types[k].params.len() };
                        TypeExpr::TCons {
                            name: QName::new(name, format!("T{k}")),
                            args: vec![int(); n],
                        }
                    }
                })
                .collect();
            constructors.push(ConsDecl {
                name: QName::new(name, format!("T{t}C{c}")),
                arity,
                args,
            });
        }
        types.push(TypeDecl {
            name: tname,
            visibility,
            params,
            constructors,
            external: false,
        });
    }

    let arities: Vec<usize> = (0..n_funcs).map(|_| rng.gen_range(0..=3)).collect();
    let mut funcs: Vec<(QName, usize)> = (0..n_funcs)
        .map(|i| (QName::new(name, format!("f{i}")), arities[i]))
        .collect();
    let mut conses: Vec<(QName, usize)> = types
        .iter()
        .flat_map(|t| t.constructors.iter().map(|c| (c.name.clone(), c.arity)))
        .collect();
    let mut data: Vec<Vec<(QName, usize)>> = types
        .iter()
        .filter(|t| !t.constructors.is_empty())
        .map(|t| t.constructors.iter().map(|c| (c.name.clone(), c.arity)).collect())
        .collect();
    for m in imports {
        funcs.extend(public_functions(m));
        for d in public_data(m) {
            conses.extend(d.iter().cloned());
            data.push(d);
        }
    }

    let mut gen = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 1),
        next_var: 0,
        funcs,
        conses,
        data,
    };

    let mut functions = Vec::new();
    for (i, &arity) in arities.iter().enumerate() {
        let fname = QName::new(name, format!("f{i}"));
        let visibility = if i == 0 || gen.rng.gen_bool(0.75) {
            Visibility::Public
        } else {
            Visibility::Private
        };
        let type_sig = (0..arity).fold(TypeExpr::TVar(0), |acc, _| {
            TypeExpr::FuncType(Box::new(TypeExpr::TVar(0)), Box::new(acc))
        });
        if i >= 3 && gen.rng.gen_bool(0.08) {
            functions.push(FuncDecl {
                name: fname,
                arity,
                visibility,
                type_sig,
                rule: Rule::External(format!("prim_f{i}")),
            });
            continue;
        }
        let params: Vec<u32> = (1..=arity as u32).collect();
        gen.next_var = arity as u32;
        let depth = gen.rng.gen_range(1..=4);
        let mut body = gen.expr(depth, &params);
        let recursive_target = match i {
            0 => Some(0),
            1 => Some(2),
            2 => Some(1),
            _ => None,
        };
        if let Some(t) = recursive_target {
            let args = (0..arities[t]).map(|_| gen.expr(1, &params)).collect();
            let call = Expr::Comb {
                ctype: CombType::FuncCall,
                name: QName::new(name, format!("f{t}")),
                args,
            };
            let scrutinee = match params.first() {
                Some(&p) => Expr::Var(p),
                None => Expr::Lit(Literal::Int(0)),
            };
            body = Expr::Case {
                ctype: CaseType::Flex,
                scrutinee: Box::new(scrutinee),
                branches: vec![
                    (Pattern::LitPattern(Literal::Int(0)), body),
                    (Pattern::LitPattern(Literal::Int(1)), call),
                ],
            };
        }
        functions.push(FuncDecl {
            name: fname,
            arity,
            visibility,
            type_sig,
            rule: Rule::Rule { params, body },
        });
    }

    Module {
        name: name.to_string(),
        imports: imports.iter().map(|m| m.name.clone()).collect(),
        types,
        functions,
        source_hash: seed,
    }
}

/// At least 25 fixture modules over the corpus Prelude, with self and
/// mutual recursion in every one.
pub fn fixture_modules(count: usize) -> Vec<Module> {
    let prelude = corpus_module("Prelude");
    (0..count as u64)
        .map(|s| random_module(1000 + s, &format!("R{s:02}"), &[&prelude], 14))
        .collect()
}

/// Writes the corpus Prelude and an application of `n` generated modules
/// into `dir`. Each module imports the Prelude and up to three earlier
/// modules; the last one, `Main`, imports several. Returns the root name.
pub fn generate_app(dir: &Path, n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prelude = corpus_module("Prelude");
    std::fs::copy(
        corpus_dir().join("Prelude.fcy.json"),
        dir.join("Prelude.fcy.json"),
    )
    .unwrap();
    let mut made: Vec<Module> = Vec::new();
    let mut imported: BTreeSet<usize> = BTreeSet::new();
    for i in 0..n {
        let name = if i + 1 == n {
            "Main".to_string()
        } else {
            format!("App{i:02}")
        };
        let mut chosen: Vec<usize> = if i + 1 == n {
            // The root imports every module nothing else imports, so the
            // whole application is reachable.
            (0..made.len()).filter(|j| !imported.contains(j)).collect()
        } else {
            let mut picks: Vec<usize> = (0..made.len()).collect();
            picks.shuffle(&mut rng);
            picks.into_iter().take(rng.gen_range(0..=3)).collect()
        };
        chosen.sort();
        imported.extend(chosen.iter().copied());
        let mut imports: Vec<&Module> = vec![&prelude];
        imports.extend(chosen.iter().map(|&j| &made[j]));
        let m = random_module(seed * 1000 + i as u64, &name, &imports, 8);
        write_module(dir, &m);
        made.push(m);
    }
    "Main".to_string()
}

/// Wide graph: `n` independent leaf modules under one root.
pub fn generate_wide_app(dir: &Path, n: usize, seed: u64, max_funcs: usize) -> String {
    let prelude = corpus_module("Prelude");
    std::fs::copy(
        corpus_dir().join("Prelude.fcy.json"),
        dir.join("Prelude.fcy.json"),
    )
    .unwrap();
    let mut leaves = Vec::new();
    for i in 0..n {
        let m = random_module(seed + i as u64, &format!("Leaf{i:02}"), &[&prelude], max_funcs);
        write_module(dir, &m);
        leaves.push(m);
    }
    let mut imports: Vec<&Module> = vec![&prelude];
    imports.extend(leaves.iter());
    let root = random_module(seed + 10_000, "Root", &imports, 4);
    write_module(dir, &root);
    "Root".to_string()
}

/// Adds one public function to `Main` (in place, on disk).
pub fn touch_main(dir: &Path, root: &str, tag: u32) {
    let path = dir.join(format!("{root}.fcy.json"));
    let mut m = load_module(&path).unwrap();
    m.functions.push(FuncDecl {
        name: QName::new(root, format!("touched{tag}")),
        arity: 0,
        visibility: Visibility::Public,
        type_sig: int(),
        rule: Rule::Rule {
            params: vec![],
            body: Expr::Lit(Literal::Int(tag as i64)),
        },
    });
    write_module(dir, &m);
}

// ---------------------------------------------------------------------------
// Dense Kleene oracle

fn calls(e: &Expr, out: &mut BTreeSet<QName>) {
    match e {
        Expr::Var(_) | Expr::Lit(_) => {}
        Expr::Comb { ctype, name, args } => {
            if *ctype == CombType::FuncCall {
                out.insert(name.clone());
            }
            for a in args {
                calls(a, out);
            }
        }
        Expr::Case {
            scrutinee,
            branches,
            ..
        } => {
            calls(scrutinee, out);
            for (_, b) in branches {
                calls(b, out);
            }
        }
        Expr::Or(l, r) => {
            calls(l, out);
            calls(r, out);
        }
        Expr::Free { body, .. } => calls(body, out),
    }
}

fn type_refs(t: &TypeExpr, out: &mut BTreeSet<QName>) {
    match t {
        TypeExpr::TVar(_) => {}
        TypeExpr::FuncType(a, b) => {
            type_refs(a, out);
            type_refs(b, out);
        }
        TypeExpr::TCons { name, args } => {
            out.insert(name.clone());
            for a in args {
                type_refs(a, out);
            }
        }
    }
}

/// Jacobi iteration from bottom: every round re-evaluates every entity
/// from the previous round's values, until nothing changes.
pub fn dense_solve<A: AbstractValue>(
    analysis: &Analysis<A>,
    module: &Module,
    imported: &BTreeMap<QName, A>,
    base: Option<&BaseInfo>,
    env: &RunEnv,
) -> BTreeMap<QName, A> {
    let bottom = analysis.bottom().expect("dependency analysis").clone();
    let value_of = |q: &QName, cur: &BTreeMap<QName, A>| -> A {
        cur.get(q)
            .or_else(|| imported.get(q))
            .cloned()
            .unwrap_or_else(|| analysis.external_value(q, env).unwrap())
    };
    match analysis.target() {
        Target::Function => {
            let mut cur: BTreeMap<QName, A> = BTreeMap::new();
            for f in &module.functions {
                let v = if matches!(f.rule, Rule::External(_)) {
                    analysis.external_value(&f.name, env).unwrap()
                } else {
                    bottom.clone()
                };
                cur.insert(f.name.clone(), v);
            }
            for round in 0.. {
                assert!(round < 10_000, "dense iteration diverged");
                let mut next = cur.clone();
                for f in &module.functions {
                    let Rule::Rule { body, .. } = &f.rule else { continue };
                    let mut deps = BTreeSet::new();
                    calls(body, &mut deps);
                    let called: Vec<(QName, A)> =
                        deps.iter().map(|d| (d.clone(), value_of(d, &cur))).collect();
                    next.insert(
                        f.name.clone(),
                        analysis.transfer_function(base, f, &called).unwrap(),
                    );
                }
                if next == cur {
                    break;
                }
                cur = next;
            }
            cur
        }
        Target::Type => {
            let mut cur: BTreeMap<QName, A> = module
                .types
                .iter()
                .map(|t| (t.name.clone(), bottom.clone()))
                .collect();
            for round in 0.. {
                assert!(round < 10_000, "dense iteration diverged");
                let mut next = cur.clone();
                for t in &module.types {
                    let mut deps = BTreeSet::new();
                    for c in &t.constructors {
                        for a in &c.args {
                            type_refs(a, &mut deps);
                        }
                    }
                    let used: Vec<(QName, A)> =
                        deps.iter().map(|d| (d.clone(), value_of(d, &cur))).collect();
                    next.insert(t.name.clone(), analysis.transfer_type(base, t, &used).unwrap());
                }
                if next == cur {
                    break;
                }
                cur = next;
            }
            cur
        }
        Target::Constructor => panic!("constructor analyses have no dependencies"),
    }
}

// ---------------------------------------------------------------------------
// Worklist solver against the dense oracle

use cass::analysis::ProgInfo;
use cass::builtin;
use cass::fixpoint::{run_simple, solve, solve_with, SolveOptions};
use cass::manager::is_exported;

fn exported<A: Clone>(m: &Module, target: Target, values: &BTreeMap<QName, A>) -> BTreeMap<QName, A> {
    values
        .iter()
        .filter(|(q, _)| is_exported(m, target, q))
        .map(|(q, v)| (q.clone(), v.clone()))
        .collect()
}

/// Pattern-completeness results of every module of a program given in
/// topological order, as base information for the Total analysis.
pub fn pat_complete_bases(program: &[Module], env: &RunEnv) -> BTreeMap<String, BaseInfo> {
    let sib = builtin::sibling_cons();
    let pc = builtin::pat_comp_analysis();
    let mut sib_vals: BTreeMap<String, BTreeMap<QName, builtin::SiblingSet>> = BTreeMap::new();
    let mut pc_vals: BTreeMap<String, BTreeMap<QName, bool>> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for m in program {
        let s = run_simple(&sib, m, None, env).unwrap();
        sib_vals.insert(m.name.clone(), s.clone());
        let imported_sib = m
            .imports
            .iter()
            .flat_map(|i| {
                let im = program.iter().find(|p| &p.name == i).unwrap();
                exported(im, Target::Constructor, &sib_vals[i])
            })
            .collect();
        let sib_info = BaseInfo::new(ProgInfo::new(s, imported_sib));
        let p = run_simple(&pc, m, Some(&sib_info), env).unwrap();
        pc_vals.insert(m.name.clone(), p.clone());
        let imported_pc = m
            .imports
            .iter()
            .flat_map(|i| {
                let im = program.iter().find(|p| &p.name == i).unwrap();
                exported(im, Target::Function, &pc_vals[i])
            })
            .collect();
        out.insert(m.name.clone(), BaseInfo::new(ProgInfo::new(p, imported_pc)));
    }
    out
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub checks: usize,
    pub entities: usize,
    pub mismatches: Vec<String>,
}

/// Solves `analysis` over a program (topological order) with both the
/// worklist solver and the dense oracle, feeding each module the oracle's
/// exported values of its imports. With `shuffles`, the worklist is also
/// run from that many random initial orders and must agree every time.
pub fn compare_program<A: AbstractValue>(
    analysis: &Analysis<A>,
    program: &[Module],
    bases: Option<&BTreeMap<String, BaseInfo>>,
    shuffles: u64,
    report: &mut OracleReport,
) {
    let env = RunEnv::default();
    let target = analysis.target();
    let mut solved: BTreeMap<String, BTreeMap<QName, A>> = BTreeMap::new();
    for m in program {
        let imported: BTreeMap<QName, A> = m
            .imports
            .iter()
            .flat_map(|i| {
                let im = program.iter().find(|p| &p.name == i).unwrap();
                exported(im, target, &solved[i])
            })
            .collect();
        let base = bases.map(|b| &b[&m.name]);
        let expected = dense_solve(analysis, m, &imported, base, &env);
        let got = solve(analysis, m, &imported, base, &env).unwrap().values;
        report.checks += 1;
        report.entities += expected.len();
        if got != expected {
            report
                .mismatches
                .push(format!("{} on {}: worklist differs from dense", analysis.name(), m.name));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(m.source_hash ^ 0x5eed);
        for s in 0..shuffles {
            let mut order: Vec<QName> = expected.keys().cloned().collect();
            order.shuffle(&mut rng);
            let opts = SolveOptions {
                initial_order: Some(order),
                observer: None,
            };
            let again = solve_with(analysis, m, &imported, base, &env, opts).unwrap().values;
            if again != expected {
                report.mismatches.push(format!(
                    "{} on {}: shuffled order {s} differs",
                    analysis.name(),
                    m.name
                ));
            }
        }
        solved.insert(m.name.clone(), expected);
    }
}

/// Every builtin dependency analysis over every program.
pub fn compare_all(programs: &[Vec<Module>], shuffles: u64) -> OracleReport {
    let mut report = OracleReport::default();
    for program in programs {
        let env = RunEnv::default();
        let bases = pat_complete_bases(program, &env);
        compare_program(&builtin::nondet_analysis(), program, None, shuffles, &mut report);
        compare_program(&builtin::total_analysis(), program, Some(&bases), shuffles, &mut report);
        compare_program(&builtin::hiord_type_analysis(), program, None, shuffles, &mut report);
        compare_program(&builtin::right_linear_analysis(), program, None, shuffles, &mut report);
        compare_program(&builtin::demand_analysis(), program, None, shuffles, &mut report);
        compare_program(&builtin::sol_complete_analysis(), program, None, shuffles, &mut report);
    }
    report
}

/// The corpus as one program plus one [Prelude, fixture] program per
/// generated fixture.
pub fn oracle_programs(fixtures: usize) -> Vec<Vec<Module>> {
    let prelude = corpus_module("Prelude");
    let mut programs = vec![corpus()];
    for f in fixture_modules(fixtures) {
        programs.push(vec![prelude.clone(), f]);
    }
    programs
}

// ---------------------------------------------------------------------------
// Whole-program invariants

use cass::frontends::Engine;
use cass::ir::{called_functions, free_var_in_expr, or_in_expr};
use cass::manager::resolve;
use serde_json::json;

#[derive(Debug, Default)]
pub struct InvariantReport {
    pub entities: usize,
    pub violations: Vec<String>,
}

/// Total implies PatComplete, Det soundness, sibling symmetry and domain
/// coverage for every module reachable from `root`.
pub fn check_invariants(search: &[PathBuf], root: &str, report: &mut InvariantReport) {
    let engine = Engine::new(search.to_vec());
    let graph = resolve(root, search).unwrap();
    let run = |a: &str| engine.run(a, root).unwrap().entries;
    let total = run("Total");
    let pc = run("PatComplete");
    let det = run("Deterministic");
    let sib = run("SiblingCons");
    let all: Vec<_> = engine
        .registry()
        .names()
        .map(|a| (a.to_string(), engine.registry().get(a).unwrap().target(), run(a)))
        .collect();
    let v = &mut report.violations;

    for (name, m) in &graph.modules {
        for f in &m.functions {
            report.entities += 1;
            let t = &total[name].all_values[&f.name];
            let p = &pc[name].all_values[&f.name];
            if t == &json!(true) && p != &json!(true) {
                v.push(format!("{}: total but not pattern complete", f.name));
            }
            if det[name].all_values[&f.name] == json!("Det") {
                if let Some(body) = f.body() {
                    if or_in_expr(body) || free_var_in_expr(body) {
                        v.push(format!("{}: Det but has Or or Free", f.name));
                    }
                    for c in called_functions(f).unwrap() {
                        let cv = det.get(&c.module).and_then(|e| e.all_values.get(&c));
                        if cv != Some(&json!("Det")) {
                            v.push(format!("{}: Det but calls {c} ({cv:?})", f.name));
                        }
                    }
                }
            }
        }
        for t in &m.types {
            let k = t.constructors.len();
            for c in &t.constructors {
                report.entities += 1;
                let s: Vec<QName> =
                    serde_json::from_value(sib[name].all_values[&c.name].clone()).unwrap();
                if s.len() + 1 != k || s.contains(&c.name) {
                    v.push(format!("{}: sibling set {s:?} for {k} constructors", c.name));
                }
                for o in &s {
                    let back: Vec<QName> =
                        serde_json::from_value(sib[name].all_values[o].clone()).unwrap();
                    if !back.contains(&c.name) {
                        v.push(format!("{}: sibling {o} does not list it back", c.name));
                    }
                }
            }
        }
        for (a, target, entries) in &all {
            let expected: BTreeSet<QName> = match target {
                Target::Function => m.functions.iter().map(|f| f.name.clone()).collect(),
                Target::Type => m.types.iter().map(|t| t.name.clone()).collect(),
                Target::Constructor => m.constructors().map(|(c, _)| c.name.clone()).collect(),
            };
            let got: BTreeSet<QName> = entries[name].all_values.keys().cloned().collect();
            if got != expected {
                v.push(format!("{a} on {name}: values for {got:?}, entities {expected:?}"));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Whole-registry runs

use cass::scheduler::{Event, PoolConfig};

pub struct SessionResult {
    /// analysis -> module -> canonical cache entry text
    pub results: BTreeMap<String, BTreeMap<String, String>>,
    pub events: Vec<Event>,
    pub warnings: Vec<String>,
}

impl SessionResult {
    pub fn dispatches(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for e in &self.events {
            if e.event == cass::scheduler::EventKind::Dispatch {
                *out.entry(e.analysis.clone()).or_insert(0) += 1;
            }
        }
        out
    }
}

/// Runs every registered analysis on `root`, in registry order.
pub fn run_all(search: &[PathBuf], root: &str, cache: Option<&Path>, workers: usize) -> SessionResult {
    let mut engine = Engine::new(search.to_vec()).pool(PoolConfig::with_workers(workers));
    if let Some(c) = cache {
        engine = engine.cache_dir(c);
    }
    let mut out = SessionResult {
        results: BTreeMap::new(),
        events: Vec::new(),
        warnings: Vec::new(),
    };
    let names: Vec<String> = engine.registry().names().map(str::to_string).collect();
    for a in names {
        let report = engine.run(&a, root).unwrap();
        let texts = report
            .entries
            .iter()
            .map(|(m, e)| (m.clone(), e.to_json()))
            .collect();
        out.results.insert(a, texts);
        out.events.extend(report.events);
        out.warnings.extend(report.warnings);
    }
    out
}
