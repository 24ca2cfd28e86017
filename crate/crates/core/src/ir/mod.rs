//! The FlatCurry-style intermediate representation.
//!
//! Every function has exactly one rule; pattern matching is explicit via
//! rigid or flexible `Case` expressions, non-determinism via `Or`, and logic
//! variables via `Free`. Modules are read from `<Module>.fcy.json` files, see
//! [`load_module`] and `docs/ir-format.md` for the on-disk encoding.

mod load;
mod query;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use load::{link_check, load_module, parse_module, source_hash, LoadError, Violation};
pub use query::{
    called_functions, free_var_in_expr, or_in_expr, rigid_case_in_expr, type_expr_has_func,
    used_types, ExternalFunction,
};

/// Variables are numbered, as in FlatCurry's `Var Int`.
pub type VarIndex = u32;

/// A qualified name: module plus entity name.
///
/// Serialized as a two-element array `["Module", "name"]`. Ordering is
/// lexicographic on the module first, then the name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, String)", into = "(String, String)")]
pub struct QName {
    pub module: String,
    pub name: String,
}

impl QName {
    pub fn new(module: impl Into<String>, name: impl Into<String>) -> Self {
        QName {
            module: module.into(),
            name: name.into(),
        }
    }

    /// Parses the `Module.name` rendering back, given the owning module.
    pub fn strip_module(module: &str, rendered: &str) -> Option<QName> {
        let rest = rendered.strip_prefix(module)?.strip_prefix('.')?;
        if rest.is_empty() {
            return None;
        }
        Some(QName::new(module, rest))
    }
}

impl From<(String, String)> for QName {
    fn from((module, name): (String, String)) -> Self {
        QName { module, name }
    }
}

impl From<QName> for (String, String) {
    fn from(q: QName) -> Self {
        (q.module, q.name)
    }
}

impl fmt::Display for QName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.module, self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visibility {
    Public,
    Private,
}

/// One compilation unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Module {
    #[serde(rename = "module")]
    pub name: String,
    #[serde(default)]
    pub imports: Vec<String>,
    #[serde(default)]
    pub types: Vec<TypeDecl>,
    #[serde(default)]
    pub functions: Vec<FuncDecl>,
    /// Digest of the raw IR file bytes; zero for modules built in memory.
    #[serde(skip)]
    pub source_hash: u64,
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&FuncDecl> {
        self.functions.iter().find(|f| f.name.name == name)
    }

    pub fn type_decl(&self, name: &str) -> Option<&TypeDecl> {
        self.types.iter().find(|t| t.name.name == name)
    }

    /// Constructor declarations paired with their owning type.
    pub fn constructors(&self) -> impl Iterator<Item = (&ConsDecl, &TypeDecl)> {
        self.types
            .iter()
            .flat_map(|t| t.constructors.iter().map(move |c| (c, t)))
    }

    pub fn constructor(&self, name: &str) -> Option<(&ConsDecl, &TypeDecl)> {
        self.constructors().find(|(c, _)| c.name.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeDecl {
    pub name: QName,
    pub visibility: Visibility,
    #[serde(default)]
    pub params: Vec<VarIndex>,
    #[serde(default)]
    pub constructors: Vec<ConsDecl>,
    /// Primitive or abstract type without visible constructors.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub external: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsDecl {
    pub name: QName,
    pub arity: usize,
    #[serde(default)]
    pub args: Vec<TypeExpr>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeExpr {
    TVar(VarIndex),
    FuncType(Box<TypeExpr>, Box<TypeExpr>),
    TCons { name: QName, args: Vec<TypeExpr> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuncDecl {
    pub name: QName,
    pub arity: usize,
    pub visibility: Visibility,
    #[serde(rename = "type")]
    pub type_sig: TypeExpr,
    pub rule: Rule,
}

impl FuncDecl {
    pub fn body(&self) -> Option<&Expr> {
        match &self.rule {
            Rule::Rule { body, .. } => Some(body),
            Rule::External(_) => None,
        }
    }

    pub fn params(&self) -> &[VarIndex] {
        match &self.rule {
            Rule::Rule { params, .. } => params,
            Rule::External(_) => &[],
        }
    }

    pub fn is_external(&self) -> bool {
        matches!(self.rule, Rule::External(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    Rule { params: Vec<VarIndex>, body: Expr },
    /// Primitive implemented outside the IR; opaque to analyses.
    External(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Int(i64),
    Char(char),
    Float(f64),
}

impl Literal {
    /// Identity used for pattern distinctness (floats compare bitwise).
    pub(crate) fn key(&self) -> (u8, u64) {
        match *self {
            Literal::Int(i) => (0, i as u64),
            Literal::Char(c) => (1, c as u64),
            Literal::Float(f) => (2, f.to_bits()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CombType {
    FuncCall,
    ConsCall,
}

/// `Rigid` suspends on a free scrutinee (residuation), `Flex` binds it
/// (narrowing).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseType {
    Rigid,
    Flex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Pattern {
    ConsPattern { name: QName, vars: Vec<VarIndex> },
    LitPattern(Literal),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Var(VarIndex),
    Lit(Literal),
    Comb {
        ctype: CombType,
        name: QName,
        args: Vec<Expr>,
    },
    Case {
        ctype: CaseType,
        scrutinee: Box<Expr>,
        branches: Vec<(Pattern, Expr)>,
    },
    Or(Box<Expr>, Box<Expr>),
    Free {
        vars: Vec<VarIndex>,
        body: Box<Expr>,
    },
}

impl Expr {
    pub fn func(name: QName, args: Vec<Expr>) -> Expr {
        Expr::Comb {
            ctype: CombType::FuncCall,
            name,
            args,
        }
    }

    pub fn cons(name: QName, args: Vec<Expr>) -> Expr {
        Expr::Comb {
            ctype: CombType::ConsCall,
            name,
            args,
        }
    }

    pub fn or(left: Expr, right: Expr) -> Expr {
        Expr::Or(Box::new(left), Box::new(right))
    }

    pub fn case(ctype: CaseType, scrutinee: Expr, branches: Vec<(Pattern, Expr)>) -> Expr {
        Expr::Case {
            ctype,
            scrutinee: Box::new(scrutinee),
            branches,
        }
    }

    pub fn free(vars: Vec<VarIndex>, body: Expr) -> Expr {
        Expr::Free {
            vars,
            body: Box::new(body),
        }
    }

    /// Immediate subexpressions, scrutinee before branch bodies.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Var(_) | Expr::Lit(_) => Vec::new(),
            Expr::Comb { args, .. } => args.iter().collect(),
            Expr::Case {
                scrutinee,
                branches,
                ..
            } => std::iter::once(&**scrutinee)
                .chain(branches.iter().map(|(_, e)| e))
                .collect(),
            Expr::Or(l, r) => vec![&**l, &**r],
            Expr::Free { body, .. } => vec![&**body],
        }
    }
}
