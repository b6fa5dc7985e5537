use crate::structure::{Element, Stage};
use thiserror::Error;

/// Every failure the library can report.
///
/// Variants split into three families: configuration problems (bad input),
/// audit violations (a construction broke one of its own invariants), and
/// plumbing (I/O, JSON).
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("arity mismatch: expected {expected} arguments, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("specification mismatch: {0}")]
    SpecMismatch(String),
    #[error("coder collision: {0}")]
    CoderCollision(String),
    #[error("certificate mismatch: {0}")]
    CertificateMismatch(String),
    #[error("precondition unverifiable: {0}")]
    PreconditionUnverifiable(String),

    #[error("budget exceeded: element {element} not placed by stage {stage}")]
    BudgetExceeded { element: Element, stage: Stage },
    #[error("element {0} is not placed")]
    Unplaced(Element),
    #[error("monotonicity violation: f({i},{s}) = {next} < f({i},{prev_stage}) = {prev}")]
    MonotonicityViolation {
        i: u64,
        s: Stage,
        prev_stage: Stage,
        prev: u64,
        next: u64,
    },
    #[error("limit order violation: f({i},{s}) = {a} is not below f({next},{s}) = {b}", next = i + 1)]
    LimitOrderViolation { i: u64, s: Stage, a: u64, b: u64 },
    #[error("character violation: {0}")]
    CharacterViolation(String),
    #[error("illegal bloc transition for bloc {bloc}: {from} -> {to}")]
    IllegalTransition {
        bloc: usize,
        from: String,
        to: String,
    },
    #[error("certificate refuted: {0}")]
    CertificateRefuted(String),
    #[error("internal invariant broken: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors raised by a construction's runtime audit rather than
    /// by malformed input.
    pub fn is_audit(&self) -> bool {
        matches!(
            self,
            Error::BudgetExceeded { .. }
                | Error::Unplaced(_)
                | Error::MonotonicityViolation { .. }
                | Error::LimitOrderViolation { .. }
                | Error::CharacterViolation(_)
                | Error::IllegalTransition { .. }
                | Error::CertificateRefuted(_)
                | Error::Invariant(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
