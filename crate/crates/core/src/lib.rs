//! A generic, modular and incremental analysis system for a FlatCurry-style
//! functional-logic intermediate representation.
//!
//! Analysis authors write entity-level transfer functions with the
//! constructors in [`analysis`]; the [`fixpoint`] solver, the module
//! [`manager`] and the master/worker [`scheduler`] take care of fixpoints,
//! imports, persistent caching and parallelism. [`frontends`] exposes the
//! results in batch, API and server mode.

pub mod analysis;
pub mod builtin;
pub mod fixpoint;
pub mod frontends;
pub mod ir;
pub mod manager;
pub mod scheduler;
