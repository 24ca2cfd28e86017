//! The built-in analyses and their registration.
//!
//! | name          | domain        | kind                | bottom |
//! |---------------|---------------|---------------------|--------|
//! | Overlapping   | bool          | simple function     |        |
//! | Deterministic | [`DetDom`]    | dependency function | `Det`  |
//! | SiblingCons   | [`SiblingSet`]| constructor         |        |
//! | PatComplete   | bool          | combined (SiblingCons) |     |
//! | Total         | bool          | combined dependency (PatComplete) | `true` |
//! | HiOrdType     | bool          | dependency type     | `false`|
//! | RightLinear   | bool          | dependency function | `true` |
//! | Demand        | [`DemandSet`] | dependency function | all positions |
//! | SolComplete   | bool          | dependency function | `true` |
//!
//! Show strings:
//! Overlapping `overlapping` / `non-overlapping`;
//! Deterministic `deterministic` / `non-deterministic`;
//! SiblingCons `[M.c1, M.c2]`;
//! PatComplete `complete` / `incomplete`;
//! Total `totally defined` / `possibly partially defined`;
//! HiOrdType `higher-order` / `first-order`;
//! RightLinear `right-linear` / `not right-linear`;
//! Demand `demanded arguments: 1,2`, `no demanded arguments` or `all arguments`;
//! SolComplete `solution complete` / `possibly suspending`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    cass_analysis, combined_dependency_func_analysis, combined_func_analysis, constructor_analysis,
    dependency_func_analysis, dependency_type_analysis, func_analysis, lookup_prog_info, Analysis,
    ProgInfo, RegisteredAnalysis, TransferError,
};
use crate::ir::{
    free_var_in_expr, or_in_expr, rigid_case_in_expr, type_expr_has_func, CombType, ConsDecl, Expr,
    FuncDecl, Pattern, QName, TypeDecl, VarIndex,
};

/// Determinism domain, ordered `Det ⊑ NonDet`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DetDom {
    Det,
    NonDet,
}

/// The other constructors of a constructor's type, sorted.
pub type SiblingSet = Vec<QName>;

/// Definitely demanded argument positions (1-based).
///
/// Ordered by `⊇`; `All` stands for the full position set of whatever
/// function it is attached to and is the fixpoint start value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandSet {
    All,
    Positions(BTreeSet<usize>),
}

impl DemandSet {
    pub fn contains(&self, pos: usize) -> bool {
        match self {
            DemandSet::All => true,
            DemandSet::Positions(ps) => ps.contains(&pos),
        }
    }

    /// `self ⊑ other` under reverse inclusion.
    pub fn leq(&self, other: &DemandSet) -> bool {
        match (self, other) {
            (DemandSet::All, _) => true,
            (DemandSet::Positions(_), DemandSet::All) => false,
            (DemandSet::Positions(a), DemandSet::Positions(b)) => a.is_superset(b),
        }
    }
}

impl From<BTreeSet<usize>> for DemandSet {
    fn from(ps: BTreeSet<usize>) -> Self {
        DemandSet::Positions(ps)
    }
}

fn lookup_called<'a, A>(called: &'a [(QName, A)], q: &QName) -> Option<&'a A> {
    called.iter().find(|(n, _)| n == q).map(|(_, v)| v)
}

/// True iff the function's rule contains an `Or`. Externals are never
/// overlapping.
pub fn is_overlapping(f: &FuncDecl) -> bool {
    f.body().is_some_and(or_in_expr)
}

pub fn nondet_func(f: &FuncDecl, called: &[(QName, DetDom)]) -> DetDom {
    let Some(e) = f.body() else {
        return DetDom::NonDet;
    };
    if or_in_expr(e) || free_var_in_expr(e) || called.iter().any(|(_, d)| *d == DetDom::NonDet) {
        DetDom::NonDet
    } else {
        DetDom::Det
    }
}

pub fn siblings(c: &ConsDecl, t: &TypeDecl) -> SiblingSet {
    let mut out: Vec<QName> = t
        .constructors
        .iter()
        .filter(|o| o.name != c.name)
        .map(|o| o.name.clone())
        .collect();
    out.sort();
    out
}

/// Structural pattern completeness of a rule body.
///
/// A case is complete when its constructor patterns cover the whole
/// constructor set of their type and every branch body is complete;
/// literal cases are never complete. An `Or` is complete when either
/// alternative is.
pub fn is_pat_complete(info: &ProgInfo<SiblingSet>, f: &FuncDecl) -> Result<bool, TransferError> {
    match f.body() {
        None => Ok(true),
        Some(e) => complete(info, e),
    }
}

fn complete(info: &ProgInfo<SiblingSet>, e: &Expr) -> Result<bool, TransferError> {
    match e {
        Expr::Var(_) | Expr::Lit(_) | Expr::Comb { .. } => Ok(true),
        Expr::Or(l, r) => Ok(complete(info, l)? || complete(info, r)?),
        Expr::Free { body, .. } => complete(info, body),
        Expr::Case { branches, .. } => {
            let mut covered = BTreeSet::new();
            for (p, _) in branches {
                match p {
                    Pattern::ConsPattern { name, .. } => {
                        covered.insert(name);
                    }
                    Pattern::LitPattern(_) => return Ok(false),
                }
            }
            let mut full = BTreeSet::new();
            for c in &covered {
                let sibs = lookup_prog_info(c, info)
                    .ok_or_else(|| TransferError::MissingSiblingInfo((*c).clone()))?;
                full.insert(*c);
                full.extend(sibs.iter());
            }
            if covered != full {
                return Ok(false);
            }
            for (_, b) in branches {
                if !complete(info, b)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Pattern complete (absent counts as incomplete) and calling only total
/// functions.
pub fn is_total(pc_info: &ProgInfo<bool>, f: &FuncDecl, called: &[(QName, bool)]) -> bool {
    lookup_prog_info(&f.name, pc_info).copied().unwrap_or(false) && called.iter().all(|(_, t)| *t)
}

pub fn hiord_type(t: &TypeDecl, used: &[(QName, bool)]) -> bool {
    t.constructors
        .iter()
        .flat_map(|c| c.args.iter())
        .any(type_expr_has_func)
        || used.iter().any(|(_, h)| *h)
}

/// Per variable, the maximal number of occurrences along one execution
/// path. Case and Or branches are alternatives; a case scrutinee shares the
/// path of every branch.
pub fn max_path_occurrences(e: &Expr) -> BTreeMap<VarIndex, usize> {
    fn add(into: &mut BTreeMap<VarIndex, usize>, from: BTreeMap<VarIndex, usize>) {
        for (v, n) in from {
            *into.entry(v).or_default() += n;
        }
    }
    fn max(into: &mut BTreeMap<VarIndex, usize>, from: BTreeMap<VarIndex, usize>) {
        for (v, n) in from {
            let slot = into.entry(v).or_default();
            *slot = (*slot).max(n);
        }
    }
    match e {
        Expr::Var(v) => BTreeMap::from([(*v, 1)]),
        Expr::Lit(_) => BTreeMap::new(),
        Expr::Comb { args, .. } => {
            let mut out = BTreeMap::new();
            for a in args {
                add(&mut out, max_path_occurrences(a));
            }
            out
        }
        Expr::Case {
            scrutinee,
            branches,
            ..
        } => {
            let mut alts = BTreeMap::new();
            for (_, b) in branches {
                max(&mut alts, max_path_occurrences(b));
            }
            let mut out = max_path_occurrences(scrutinee);
            add(&mut out, alts);
            out
        }
        Expr::Or(l, r) => {
            let mut out = max_path_occurrences(l);
            max(&mut out, max_path_occurrences(r));
            out
        }
        Expr::Free { body, .. } => max_path_occurrences(body),
    }
}

pub fn right_linear(f: &FuncDecl, called: &[(QName, bool)]) -> bool {
    let Some(e) = f.body() else { return true };
    max_path_occurrences(e).values().all(|&n| n <= 1) && called.iter().all(|(_, r)| *r)
}

/// Variables definitely evaluated by `e`, given the callees' demand sets.
fn demanded_vars(e: &Expr, called: &[(QName, DemandSet)]) -> BTreeSet<VarIndex> {
    match e {
        Expr::Var(v) => BTreeSet::from([*v]),
        Expr::Lit(_) => BTreeSet::new(),
        Expr::Comb {
            ctype: CombType::ConsCall,
            ..
        } => BTreeSet::new(),
        Expr::Comb {
            ctype: CombType::FuncCall,
            name,
            args,
        } => {
            let callee = lookup_called(called, name).cloned().unwrap_or(DemandSet::All);
            args.iter()
                .enumerate()
                .filter(|(j, _)| callee.contains(j + 1))
                .flat_map(|(_, a)| demanded_vars(a, called))
                .collect()
        }
        Expr::Case {
            scrutinee,
            branches,
            ..
        } => {
            let mut out = demanded_vars(scrutinee, called);
            let mut common: Option<BTreeSet<VarIndex>> = None;
            for (p, b) in branches {
                let mut d = demanded_vars(b, called);
                if let Pattern::ConsPattern { vars, .. } = p {
                    for v in vars {
                        d.remove(v);
                    }
                }
                common = Some(match common {
                    None => d,
                    Some(c) => c.intersection(&d).copied().collect(),
                });
            }
            out.extend(common.unwrap_or_default());
            out
        }
        Expr::Or(l, r) => {
            let l = demanded_vars(l, called);
            let r = demanded_vars(r, called);
            l.intersection(&r).copied().collect()
        }
        Expr::Free { vars, body } => {
            let mut d = demanded_vars(body, called);
            for v in vars {
                d.remove(v);
            }
            d
        }
    }
}

pub fn demand(f: &FuncDecl, called: &[(QName, DemandSet)]) -> DemandSet {
    let Some(e) = f.body() else {
        return DemandSet::Positions(BTreeSet::new());
    };
    let d = demanded_vars(e, called);
    f.params()
        .iter()
        .enumerate()
        .filter(|(_, p)| d.contains(p))
        .map(|(i, _)| i + 1)
        .collect::<BTreeSet<_>>()
        .into()
}

/// Coarse: any rigid case may suspend.
pub fn sol_complete(f: &FuncDecl, called: &[(QName, bool)]) -> bool {
    let Some(e) = f.body() else { return false };
    !rigid_case_in_expr(e) && called.iter().all(|(_, s)| *s)
}

fn bool_order_false_first(a: &bool, b: &bool) -> bool {
    !*a || *b
}

fn bool_order_true_first(a: &bool, b: &bool) -> bool {
    *a || !*b
}

pub fn overlap_analysis() -> Analysis<bool> {
    func_analysis("Overlapping", is_overlapping).with_external_default(|_| false)
}

pub fn nondet_analysis() -> Analysis<DetDom> {
    dependency_func_analysis("Deterministic", DetDom::Det, nondet_func)
        .with_external_default(|_| DetDom::NonDet)
        .with_order(|a, b| a <= b)
}

pub fn sibling_cons() -> Analysis<SiblingSet> {
    constructor_analysis("SiblingCons", siblings)
}

pub fn pat_comp_analysis() -> Analysis<bool> {
    combined_func_analysis("PatComplete", &sibling_cons(), is_pat_complete)
        .with_external_default(|_| true)
}

pub fn total_analysis() -> Analysis<bool> {
    combined_dependency_func_analysis("Total", &pat_comp_analysis(), true, |pc, f, called| {
        Ok(is_total(pc, f, called))
    })
    .with_external_default(|_| false)
    .with_order(bool_order_true_first)
}

pub fn hiord_type_analysis() -> Analysis<bool> {
    dependency_type_analysis("HiOrdType", false, hiord_type)
        .with_external_default(|_| true)
        .with_order(bool_order_false_first)
}

pub fn right_linear_analysis() -> Analysis<bool> {
    dependency_func_analysis("RightLinear", true, right_linear)
        .with_external_default(|_| true)
        .with_order(bool_order_true_first)
}

pub fn demand_analysis() -> Analysis<DemandSet> {
    dependency_func_analysis("Demand", DemandSet::All, demand)
        .with_external_default(|_| DemandSet::Positions(BTreeSet::new()))
        .with_order(DemandSet::leq)
}

pub fn sol_complete_analysis() -> Analysis<bool> {
    dependency_func_analysis("SolComplete", true, sol_complete)
        .with_external_default(|_| false)
        .with_order(bool_order_true_first)
}

fn choose(flag: bool, yes: &str, no: &str) -> String {
    if flag { yes } else { no }.to_string()
}

pub fn show_overlap(b: &bool) -> String {
    choose(*b, "overlapping", "non-overlapping")
}

pub fn show_det(d: &DetDom) -> String {
    choose(*d == DetDom::Det, "deterministic", "non-deterministic")
}

pub fn show_sibling(s: &SiblingSet) -> String {
    let names: Vec<String> = s.iter().map(QName::to_string).collect();
    format!("[{}]", names.join(", "))
}

pub fn show_complete(b: &bool) -> String {
    choose(*b, "complete", "incomplete")
}

pub fn show_total(b: &bool) -> String {
    choose(*b, "totally defined", "possibly partially defined")
}

pub fn show_hiord(b: &bool) -> String {
    choose(*b, "higher-order", "first-order")
}

pub fn show_right_linear(b: &bool) -> String {
    choose(*b, "right-linear", "not right-linear")
}

pub fn show_demand(d: &DemandSet) -> String {
    match d {
        DemandSet::All => "all arguments".to_string(),
        DemandSet::Positions(ps) if ps.is_empty() => "no demanded arguments".to_string(),
        DemandSet::Positions(ps) => {
            let ps: Vec<String> = ps.iter().map(usize::to_string).collect();
            format!("demanded arguments: {}", ps.join(","))
        }
    }
}

pub fn show_sol_complete(b: &bool) -> String {
    choose(*b, "solution complete", "possibly suspending")
}

/// The static registry contents.
pub fn registered_analyses() -> Vec<RegisteredAnalysis> {
    vec![
        cass_analysis(overlap_analysis(), show_overlap),
        cass_analysis(nondet_analysis(), show_det),
        cass_analysis(sibling_cons(), show_sibling),
        cass_analysis(pat_comp_analysis(), show_complete),
        cass_analysis(total_analysis(), show_total),
        cass_analysis(hiord_type_analysis(), show_hiord),
        cass_analysis(right_linear_analysis(), show_right_linear),
        cass_analysis(demand_analysis(), show_demand),
        cass_analysis(sol_complete_analysis(), show_sol_complete),
    ]
}
