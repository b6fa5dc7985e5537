//! Limit isomorphisms from a size bound or from Fin-information.

use super::engine::{Engine, Rule};
use super::{IsoApprox, IsoBudget, IsoLevel, Verdict};
use crate::error::{Error, Result};
use crate::predicates::Predicate;
use crate::structure::{ClassId, Stage, StageStructure};
use serde::{Deserialize, Serialize};

/// What is known about the finite-class elements of one structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fin", rename_all = "kebab-case")]
pub enum FinSideInfo {
    /// The building program's own decision procedure.
    Program,
    /// A total predicate over `x`.
    Decidable { pred: Predicate },
    /// A stage approximation: a predicate over `x, s` whose limit in s
    /// decides Fin.
    Approx { pred: Predicate },
}

impl FinSideInfo {
    fn check(&self, st: &StageStructure, side: usize) -> Result<()> {
        match self {
            FinSideInfo::Program => {
                if st.program().fin_decider(0).is_none() {
                    return Err(Error::PreconditionUnverifiable(format!(
                        "side {side}: the {} builder has no Fin decision procedure",
                        st.name()
                    )));
                }
                Ok(())
            }
            FinSideInfo::Decidable { pred } => pred.require_arity(1),
            FinSideInfo::Approx { pred } => pred.require_arity(2),
        }
    }

    fn fin(&self, st: &StageStructure, x: u64, s: Stage) -> Result<bool> {
        match self {
            FinSideInfo::Program => st.program().fin_decider(x).ok_or_else(|| {
                Error::PreconditionUnverifiable(format!("no Fin decision for element {x}"))
            }),
            FinSideInfo::Decidable { pred } => Ok(pred.holds(&[x])),
            FinSideInfo::Approx { pred } => Ok(pred.holds(&[x, s])),
        }
    }

    fn stage_independent(&self) -> bool {
        !matches!(self, FinSideInfo::Approx { .. })
    }
}

enum Delta2Rule {
    /// Infinite iff more than `k` elements.
    Bounded { k: u64 },
    Fin { info: [FinSideInfo; 2] },
}

impl Rule for Delta2Rule {
    fn verdict(&mut self, side: usize, st: &StageStructure, c: ClassId, s: Stage, _old: Option<Verdict>) -> Result<Option<Verdict>> {
        let part = st.partition();
        let size = part.size_at(c, s);
        let finite = match self {
            Delta2Rule::Bounded { k } => size <= *k,
            Delta2Rule::Fin { info } => info[side].fin(st, part.rep(c), s)?,
        };
        Ok(Some(if finite { Verdict::Finite(size) } else { Verdict::Infinite }))
    }

    fn saturated(&self, v: Option<Verdict>) -> bool {
        v == Some(Verdict::Infinite)
    }

    fn volatile(&self) -> bool {
        match self {
            Delta2Rule::Bounded { .. } => false,
            Delta2Rule::Fin { info } => !info.iter().all(FinSideInfo::stage_independent),
        }
    }

    fn retractable(&self) -> bool {
        true
    }
}

/// Match classes on their current size-or-infinite classification.  With a
/// bound K a class is infinite once it has K+1 elements; with Fin
/// information (which takes precedence) infinite classes are recognised at
/// once.  Either `bound` or `fin` must be given.
pub fn iso_delta2(
    a: &mut StageStructure,
    b: &mut StageStructure,
    bound: Option<u64>,
    fin: Option<(FinSideInfo, FinSideInfo)>,
    run: IsoBudget,
) -> Result<IsoApprox> {
    let rule = match (fin, bound) {
        (Some((fa, fb)), _) => {
            fa.check(a, 0)?;
            fb.check(b, 1)?;
            Delta2Rule::Fin { info: [fa, fb] }
        }
        (None, Some(k)) => Delta2Rule::Bounded { k },
        (None, None) => {
            return Err(Error::PreconditionUnverifiable(
                "the Δ⁰₂ engine needs a size bound or Fin information for both sides".into(),
            ))
        }
    };
    Engine::new(rule, IsoLevel::Delta2, a, b, run).run()
}
