//! Serializable descriptions of every builder, so a structure can be
//! recorded in a manifest and rebuilt identically.

use crate::builders::basic::ExplicitProgram;
use crate::builders::{
    build_bounded, build_diag_pair, build_from_s, build_from_s1, build_pair_t4, build_sigma2_inf, build_test_class,
    effective_union, BoundedCharSpec, Coder, Opponent, PairBase, SetSpec, SFunctionSpec,
};
use crate::error::{Error, Result};
use crate::predicates::Predicate;
use crate::structure::{Element, Size, StageStructure};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSide {
    C,
    D,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagSide {
    #[default]
    B1,
    B2,
}

fn one() -> Vec<u64> {
    vec![1]
}

/// A structure, by builder and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BuilderConfig {
    Identity,
    /// Consecutive runs with sizes cycling through `pattern`.
    Periodic { pattern: Vec<u64> },
    /// Explicit blocks covering 0..N, then runs cycling through `tail`.
    Explicit {
        blocks: Vec<Vec<Element>>,
        #[serde(default = "one")]
        tail: Vec<u64>,
    },
    Sigma2Inf { r: Predicate },
    Bounded(BoundedCharSpec),
    FromS { f: SFunctionSpec, r: Size },
    FromS1 { f: SFunctionSpec, r: Predicate },
    TestClass { g: SFunctionSpec, t: Predicate },
    Union {
        parts: Vec<BuilderConfig>,
        #[serde(default = "default_coder")]
        coder: Coder,
    },
    /// One copy of the k1/k2 pair over the enumerable set M.
    Pair { base: PairBase, k1: u64, k2: Size, m: SetSpec, side: PairSide },
    /// One copy of the diagonalization against `opponents`.
    Diag {
        f: SFunctionSpec,
        r: Predicate,
        opponents: Vec<Opponent>,
        #[serde(default)]
        side: DiagSide,
    },
}

fn default_coder() -> Coder {
    Coder::Default
}

impl BuilderConfig {
    pub fn build(&self) -> Result<StageStructure> {
        Ok(match self {
            BuilderConfig::Identity => crate::builders::identity_structure(),
            BuilderConfig::Periodic { pattern } => crate::builders::periodic_structure(pattern)?,
            BuilderConfig::Explicit { blocks, tail } => StageStructure::new(Box::new(ExplicitProgram::new(blocks, tail)?)),
            BuilderConfig::Sigma2Inf { r } => build_sigma2_inf(r.clone())?,
            BuilderConfig::Bounded(spec) => build_bounded(spec.clone())?,
            BuilderConfig::FromS { f, r } => build_from_s(f.clone(), *r)?,
            BuilderConfig::FromS1 { f, r } => build_from_s1(f.clone(), r.clone())?,
            BuilderConfig::TestClass { g, t } => build_test_class(g.clone(), t.clone())?,
            BuilderConfig::Union { parts, coder } => {
                if parts.is_empty() {
                    return Err(Error::InvalidSpec("a union needs at least one part".into()));
                }
                let built = parts.iter().map(BuilderConfig::build).collect::<Result<Vec<_>>>()?;
                effective_union(built, coder)?
            }
            BuilderConfig::Pair { base, k1, k2, m, side } => {
                let p = build_pair_t4(base, *k1, *k2, m)?;
                match side {
                    PairSide::C => p.c,
                    PairSide::D => p.d,
                }
            }
            BuilderConfig::Diag { f, r, opponents, side } => {
                let d = build_diag_pair(f.clone(), r.clone(), opponents)?;
                match side {
                    DiagSide::B1 => d.b1,
                    DiagSide::B2 => d.b2,
                }
            }
        })
    }
}
