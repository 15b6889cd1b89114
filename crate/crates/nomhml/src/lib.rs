//! Nominal transition systems and their Hennessy-Milner logics.
//!
//! The crate provides, over a fixed finite name universe:
//!
//! - a nominal kernel (permutations, support, freshness, abstraction, orbits),
//! - finite nominal transition systems with a textual `.nts` format,
//! - the modal logic with finitely supported (orbit) conjunctions, binding
//!   action modalities and least fixpoints, plus the weak and
//!   effect-consequence sublogics,
//! - satisfaction checking and fixpoint evaluation,
//! - strong, weak and effect-indexed bisimilarity engines with
//!   distinguishing-, characteristic- and property-formula synthesis,
//! - the predicate-to-selfloop and effect-to-transition system transforms,
//! - CCS and monadic pi-calculus front ends.

pub mod bisim;
pub mod ccs;
pub mod check;
pub mod effects;
mod error;
pub mod formula;
pub mod gen;
pub mod nominal;
pub mod nts;
pub mod pi;
pub mod transform;

pub use error::{Error, Result};
