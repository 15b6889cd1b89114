//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("universe error: {0}")]
    Universe(String),

    #[error("no fresh name of sort `{sort}` left in the universe; enlarge the universe")]
    FreshnessExhausted { sort: String },

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("unbound variable X{0}")]
    UnboundVariable(u32),

    #[error("fixpoint variable X{var} occurs under an odd number of negations")]
    PositivityViolation { var: u32 },

    #[error("conjunction exceeds the configured bound ({0} conjuncts)")]
    ConjunctionBound(usize),

    #[error("effect registry is not closed under the L-function: {0}")]
    RegistryNotClosed(String),

    #[error("state set is not closed under bisimilarity: {p} ~ {q} but only {p} is in the set")]
    NotBisimClosed { p: String, q: String },

    #[error("action label `{0}` collides with a predicate name")]
    LabelCollision(String),

    #[error("generation budget exceeded: {states} states explored, {frontier} frontier terms pending")]
    BudgetExceeded { states: usize, frontier: usize },

    #[error("invalid system: {0}")]
    Invalid(String),
}
