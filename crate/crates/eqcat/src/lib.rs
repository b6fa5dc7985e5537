//! Executable constructions and isomorphism procedures for computable
//! equivalence structures, run to finite stage budgets and checked against
//! brute-force oracles.

pub mod analysis;
pub mod builders;
pub mod config;
pub mod error;
pub mod iso;
pub mod manifest;
pub mod oracle;
pub mod predicates;
pub mod structure;

pub use error::{Error, Result};
pub use predicates::{Predicate, PredicateProgram};
pub use structure::{CharacterApprox, Element, Size, SizeVerdict, Snapshot, StageStructure};
