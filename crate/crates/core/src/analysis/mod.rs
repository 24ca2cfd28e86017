//! Analysis descriptors and the constructors analysis authors use to build
//! them.
//!
//! An analysis author supplies only an entity-level transfer function; the
//! driver takes care of fixpoints, imports and caching. There are nine
//! constructor shapes, crossing the entity kind (function, type,
//! constructor) with whether the transfer consumes dependency values and
//! whether it consumes a completed base analysis:
//!
//! | constructor                                | target      | kind               |
//! |--------------------------------------------|-------------|--------------------|
//! | [`func_analysis`]                          | Function    | Simple             |
//! | [`dependency_func_analysis`]               | Function    | Dependency         |
//! | [`type_analysis`]                          | Type        | Simple             |
//! | [`dependency_type_analysis`]               | Type        | Dependency         |
//! | [`constructor_analysis`]                   | Constructor | Simple             |
//! | [`combined_func_analysis`]                 | Function    | Combined           |
//! | [`combined_type_analysis`]                 | Type        | Combined           |
//! | [`combined_dependency_func_analysis`]      | Function    | CombinedDependency |
//! | [`combined_dependency_type_analysis`]      | Type        | CombinedDependency |

mod erased;
mod externals;
mod proginfo;
mod registry;

use std::any::Any;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{ConsDecl, FuncDecl, QName, TypeDecl};

pub use erased::{ErasedAnalysis, ValueMap};
pub use externals::{ExternalsManifest, ManifestError};
pub use proginfo::{lookup_prog_info, ProgInfo};
pub use registry::{cass_analysis, RegisteredAnalysis, Registry, RegistryError};

/// Payload type of an abstract domain.
pub trait AbstractValue:
    Clone + PartialEq + fmt::Debug + Serialize + DeserializeOwned + Send + Sync + 'static
{
}

impl<T> AbstractValue for T where
    T: Clone + PartialEq + fmt::Debug + Serialize + DeserializeOwned + Send + Sync + 'static
{
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Target {
    Function,
    Type,
    Constructor,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    Simple,
    Dependency,
    Combined,
    CombinedDependency,
}

impl Kind {
    pub fn is_dependency(self) -> bool {
        matches!(self, Kind::Dependency | Kind::CombinedDependency)
    }

    pub fn is_combined(self) -> bool {
        matches!(self, Kind::Combined | Kind::CombinedDependency)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Completed results of a base analysis, type-erased so that descriptors of
/// different domains can be stored side by side.
#[derive(Clone)]
pub struct BaseInfo(Arc<dyn Any + Send + Sync>);

impl BaseInfo {
    pub fn new<B: AbstractValue>(info: ProgInfo<B>) -> Self {
        BaseInfo(Arc::new(info))
    }

    pub fn downcast<B: AbstractValue>(&self) -> Option<&ProgInfo<B>> {
        self.0.downcast_ref()
    }
}

impl fmt::Debug for BaseInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BaseInfo(..)")
    }
}

/// Failure inside a single transfer call.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransferError {
    #[error("no sibling information for constructor {0}")]
    MissingSiblingInfo(QName),
    #[error("base analysis results were not supplied")]
    BaseInfoMissing,
    #[error("base analysis results have an unexpected domain")]
    BaseInfoType,
    #[error("{0}")]
    Failed(String),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("analysis {analysis} failed on {entity}: {source}")]
    Transfer {
        analysis: String,
        entity: QName,
        #[source]
        source: TransferError,
    },
    #[error("analysis {analysis} has no value for external or unexported entity {entity}")]
    NoExternalDefault { analysis: String, entity: QName },
    #[error("analysis {analysis}: cannot decode value of {entity}: {message}")]
    Codec {
        analysis: String,
        entity: String,
        message: String,
    },
    #[error("analysis {analysis} did not stabilize on module {module} within {cap} transfer calls")]
    IterationCapExceeded {
        analysis: String,
        module: String,
        cap: usize,
    },
    #[error("analysis {analysis} is {kind} over {target}; operation needs {expected}")]
    WrongKind {
        analysis: String,
        target: Target,
        kind: Kind,
        expected: &'static str,
    },
}

/// Shared state threaded through every analysis run.
#[derive(Clone, Debug)]
pub struct RunEnv {
    pub externals: Arc<ExternalsManifest>,
    transfer_calls: Arc<AtomicU64>,
}

impl RunEnv {
    pub fn new(externals: Arc<ExternalsManifest>) -> Self {
        RunEnv {
            externals,
            transfer_calls: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Total number of transfer-function invocations through this env.
    pub fn transfer_calls(&self) -> u64 {
        self.transfer_calls.load(Ordering::Relaxed)
    }

    pub(crate) fn count_transfer(&self) {
        self.transfer_calls.fetch_add(1, Ordering::Relaxed);
    }
}

impl Default for RunEnv {
    fn default() -> Self {
        RunEnv::new(Arc::new(ExternalsManifest::builtin()))
    }
}

type Shared<F> = Arc<F>;
type FuncFn<A> = dyn Fn(Option<&BaseInfo>, &FuncDecl, &[(QName, A)]) -> Result<A, TransferError>
    + Send
    + Sync;
type TypeFn<A> = dyn Fn(Option<&BaseInfo>, &TypeDecl, &[(QName, A)]) -> Result<A, TransferError>
    + Send
    + Sync;
type ConsFn<A> =
    dyn Fn(Option<&BaseInfo>, &ConsDecl, &TypeDecl) -> Result<A, TransferError> + Send + Sync;

enum Transfer<A> {
    Func(Shared<FuncFn<A>>),
    Type(Shared<TypeFn<A>>),
    Cons(Shared<ConsFn<A>>),
}

impl<A> Clone for Transfer<A> {
    fn clone(&self) -> Self {
        match self {
            Transfer::Func(f) => Transfer::Func(f.clone()),
            Transfer::Type(f) => Transfer::Type(f.clone()),
            Transfer::Cons(f) => Transfer::Cons(f.clone()),
        }
    }
}

type ExternalDefault<A> = Shared<dyn Fn(&QName) -> A + Send + Sync>;
type Order<A> = Shared<dyn Fn(&A, &A) -> bool + Send + Sync>;

/// A program analysis with abstract domain `A`.
pub struct Analysis<A> {
    name: String,
    kind: Kind,
    bottom: Option<A>,
    base: Option<Arc<dyn ErasedAnalysis>>,
    transfer: Transfer<A>,
    external_default: Option<ExternalDefault<A>>,
    order: Option<Order<A>>,
}

impl<A: Clone> Clone for Analysis<A> {
    fn clone(&self) -> Self {
        Analysis {
            name: self.name.clone(),
            kind: self.kind,
            bottom: self.bottom.clone(),
            base: self.base.clone(),
            transfer: self.transfer.clone(),
            external_default: self.external_default.clone(),
            order: self.order.clone(),
        }
    }
}

impl<A: AbstractValue> fmt::Debug for Analysis<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analysis")
            .field("name", &self.name)
            .field("target", &self.target())
            .field("kind", &self.kind)
            .field("bottom", &self.bottom)
            .field("base", &self.base.as_ref().map(|b| b.name().to_string()))
            .finish()
    }
}

fn check_name(name: &str) {
    assert!(!name.is_empty(), "analysis name must be non-empty");
}

fn base_of<B: AbstractValue>(base: Option<&BaseInfo>) -> Result<&ProgInfo<B>, TransferError> {
    base.ok_or(TransferError::BaseInfoMissing)?
        .downcast::<B>()
        .ok_or(TransferError::BaseInfoType)
}

impl<A: AbstractValue> Analysis<A> {
    fn build(name: String, kind: Kind, bottom: Option<A>, transfer: Transfer<A>) -> Self {
        check_name(&name);
        Analysis {
            name,
            kind,
            bottom,
            base: None,
            transfer,
            external_default: None,
            order: None,
        }
    }

    fn with_base<B: AbstractValue>(mut self, base: &Analysis<B>) -> Self {
        self.base = Some(Arc::new(base.clone()));
        self
    }

    /// Value used for `External` functions and for referenced entities
    /// missing from an import interface, unless the externals manifest
    /// overrides it.
    pub fn with_external_default(mut self, f: impl Fn(&QName) -> A + Send + Sync + 'static) -> Self {
        self.external_default = Some(Arc::new(f));
        self
    }

    /// Declares the domain's partial order (`leq(a, b)` iff `a ⊑ b`). Only
    /// consulted by tests that check ascending chains.
    pub fn with_order(mut self, leq: impl Fn(&A, &A) -> bool + Send + Sync + 'static) -> Self {
        self.order = Some(Arc::new(leq));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn target(&self) -> Target {
        match self.transfer {
            Transfer::Func(_) => Target::Function,
            Transfer::Type(_) => Target::Type,
            Transfer::Cons(_) => Target::Constructor,
        }
    }

    /// Fixpoint start value; present iff the kind involves dependencies.
    pub fn bottom(&self) -> Option<&A> {
        self.bottom.as_ref()
    }

    pub fn base(&self) -> Option<&Arc<dyn ErasedAnalysis>> {
        self.base.as_ref()
    }

    pub fn leq(&self, a: &A, b: &A) -> Option<bool> {
        self.order.as_ref().map(|o| o(a, b))
    }

    /// Value of an external (or otherwise unanalyzable) entity: the
    /// manifest entry if one exists, else the analysis default.
    pub fn external_value(&self, entity: &QName, env: &RunEnv) -> Result<A, AnalysisError> {
        if let Some(v) = env.externals.lookup(&self.name, entity) {
            return serde_json::from_value(v.clone()).map_err(|e| AnalysisError::Codec {
                analysis: self.name.clone(),
                entity: entity.to_string(),
                message: format!("externals manifest: {e}"),
            });
        }
        match &self.external_default {
            Some(f) => Ok(f(entity)),
            None => Err(AnalysisError::NoExternalDefault {
                analysis: self.name.clone(),
                entity: entity.clone(),
            }),
        }
    }

    fn wrong_kind(&self, expected: &'static str) -> AnalysisError {
        AnalysisError::WrongKind {
            analysis: self.name.clone(),
            target: self.target(),
            kind: self.kind,
            expected,
        }
    }

    fn transfer_failed(&self, entity: &QName, source: TransferError) -> AnalysisError {
        AnalysisError::Transfer {
            analysis: self.name.clone(),
            entity: entity.clone(),
            source,
        }
    }

    /// One transfer call for a function. `called` is ignored by
    /// non-dependency analyses.
    pub fn transfer_function(
        &self,
        base: Option<&BaseInfo>,
        f: &FuncDecl,
        called: &[(QName, A)],
    ) -> Result<A, AnalysisError> {
        match &self.transfer {
            Transfer::Func(t) => t(base, f, called).map_err(|e| self.transfer_failed(&f.name, e)),
            _ => Err(self.wrong_kind("a function analysis")),
        }
    }

    pub fn transfer_type(
        &self,
        base: Option<&BaseInfo>,
        t: &TypeDecl,
        used: &[(QName, A)],
    ) -> Result<A, AnalysisError> {
        match &self.transfer {
            Transfer::Type(tr) => tr(base, t, used).map_err(|e| self.transfer_failed(&t.name, e)),
            _ => Err(self.wrong_kind("a type analysis")),
        }
    }

    pub fn transfer_constructor(
        &self,
        base: Option<&BaseInfo>,
        c: &ConsDecl,
        t: &TypeDecl,
    ) -> Result<A, AnalysisError> {
        match &self.transfer {
            Transfer::Cons(tr) => tr(base, c, t).map_err(|e| self.transfer_failed(&c.name, e)),
            _ => Err(self.wrong_kind("a constructor analysis")),
        }
    }
}

/// Function analysis that looks at each declaration in isolation.
pub fn func_analysis<A: AbstractValue>(
    name: impl Into<String>,
    f: impl Fn(&FuncDecl) -> A + Send + Sync + 'static,
) -> Analysis<A> {
    Analysis::build(
        name.into(),
        Kind::Simple,
        None,
        Transfer::Func(Arc::new(move |_, d, _| Ok(f(d)))),
    )
}

/// Function analysis over the current values of the directly called
/// functions, solved as a fixpoint starting from `bottom`.
pub fn dependency_func_analysis<A: AbstractValue>(
    name: impl Into<String>,
    bottom: A,
    f: impl Fn(&FuncDecl, &[(QName, A)]) -> A + Send + Sync + 'static,
) -> Analysis<A> {
    Analysis::build(
        name.into(),
        Kind::Dependency,
        Some(bottom),
        Transfer::Func(Arc::new(move |_, d, called| Ok(f(d, called)))),
    )
}

pub fn type_analysis<A: AbstractValue>(
    name: impl Into<String>,
    f: impl Fn(&TypeDecl) -> A + Send + Sync + 'static,
) -> Analysis<A> {
    Analysis::build(
        name.into(),
        Kind::Simple,
        None,
        Transfer::Type(Arc::new(move |_, t, _| Ok(f(t)))),
    )
}

/// Type analysis over the current values of the types used in constructor
/// arguments.
pub fn dependency_type_analysis<A: AbstractValue>(
    name: impl Into<String>,
    bottom: A,
    f: impl Fn(&TypeDecl, &[(QName, A)]) -> A + Send + Sync + 'static,
) -> Analysis<A> {
    Analysis::build(
        name.into(),
        Kind::Dependency,
        Some(bottom),
        Transfer::Type(Arc::new(move |_, t, used| Ok(f(t, used)))),
    )
}

/// Constructor analysis; the transfer also receives the owning type.
pub fn constructor_analysis<A: AbstractValue>(
    name: impl Into<String>,
    f: impl Fn(&ConsDecl, &TypeDecl) -> A + Send + Sync + 'static,
) -> Analysis<A> {
    Analysis::build(
        name.into(),
        Kind::Simple,
        None,
        Transfer::Cons(Arc::new(move |_, c, t| Ok(f(c, t)))),
    )
}

/// Function analysis consuming the completed results of `base`.
pub fn combined_func_analysis<A: AbstractValue, B: AbstractValue>(
    name: impl Into<String>,
    base: &Analysis<B>,
    f: impl Fn(&ProgInfo<B>, &FuncDecl) -> Result<A, TransferError> + Send + Sync + 'static,
) -> Analysis<A> {
    Analysis::build(
        name.into(),
        Kind::Combined,
        None,
        Transfer::Func(Arc::new(move |info, d, _| f(base_of(info)?, d))),
    )
    .with_base(base)
}

pub fn combined_type_analysis<A: AbstractValue, B: AbstractValue>(
    name: impl Into<String>,
    base: &Analysis<B>,
    f: impl Fn(&ProgInfo<B>, &TypeDecl) -> Result<A, TransferError> + Send + Sync + 'static,
) -> Analysis<A> {
    Analysis::build(
        name.into(),
        Kind::Combined,
        None,
        Transfer::Type(Arc::new(move |info, t, _| f(base_of(info)?, t))),
    )
    .with_base(base)
}

pub fn combined_dependency_func_analysis<A: AbstractValue, B: AbstractValue>(
    name: impl Into<String>,
    base: &Analysis<B>,
    bottom: A,
    f: impl Fn(&ProgInfo<B>, &FuncDecl, &[(QName, A)]) -> Result<A, TransferError>
        + Send
        + Sync
        + 'static,
) -> Analysis<A> {
    Analysis::build(
        name.into(),
        Kind::CombinedDependency,
        Some(bottom),
        Transfer::Func(Arc::new(move |info, d, called| f(base_of(info)?, d, called))),
    )
    .with_base(base)
}

pub fn combined_dependency_type_analysis<A: AbstractValue, B: AbstractValue>(
    name: impl Into<String>,
    base: &Analysis<B>,
    bottom: A,
    f: impl Fn(&ProgInfo<B>, &TypeDecl, &[(QName, A)]) -> Result<A, TransferError>
        + Send
        + Sync
        + 'static,
) -> Analysis<A> {
    Analysis::build(
        name.into(),
        Kind::CombinedDependency,
        Some(bottom),
        Transfer::Type(Arc::new(move |info, t, used| f(base_of(info)?, t, used))),
    )
    .with_base(base)
}
