//! Isomorphism engines at three effectiveness levels, and a verifier for
//! finite partial maps.
//!
//! All three engines share one matching core (see [`engine`]): each class
//! gets a verdict, classes with equal verdicts are paired in the order
//! (verdict, creation stage, representative), and paired classes are mapped
//! member by member in placement order.  The engines differ only in how a
//! verdict is formed:
//!
//! * [`iso_computable`] — by certificate: named classes are fixed, every
//!   other class belongs to the unbounded supply.  Verdicts never change, so
//!   the map only grows.
//! * [`iso_delta2`] — by the current count, with the K+1 threshold for
//!   infinity under a size bound, or by a Fin decision procedure.
//! * [`iso_delta3`] — by "no growth for w stages", with w doubling for a
//!   class each time a finite verdict for it is refuted.

mod delta1;
mod delta2;
mod delta3;
mod engine;

pub use delta1::{iso_computable, CategoricityCertificate};
pub use delta2::{iso_delta2, FinSideInfo};
pub use delta3::iso_delta3;

use crate::error::Result;
use crate::structure::{Element, Stage, StageStructure};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Effectiveness level of an engine run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsoLevel {
    Delta1,
    Delta2,
    Delta3,
}

/// A class's current classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// The i-th class named by a certificate.
    Named(usize),
    Finite(u64),
    Infinite,
}

/// How far to run an engine: stages, and the elements ≤ `frontier` of
/// either side that the map must cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsoBudget {
    pub budget: Stage,
    pub frontier: Element,
}

impl IsoBudget {
    pub fn new(budget: Stage, frontier: Element) -> Self {
        IsoBudget { budget, frontier }
    }
}

/// h(a) = b held during stages `from..to` (`to` = None: still held).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub a: Element,
    pub b: Element,
    pub from: Stage,
    pub to: Option<Stage>,
}

/// A logged retraction.  `Map` removes a pair from h (a pair broken and
/// re-made within one stage leaves h unchanged and is not logged); `Verdict`
/// records a
/// class whose classification changed (only for classes meeting the
/// frontier; all flips are counted in [`IsoApprox::verdict_flips`]).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "kebab-case")]
pub enum Retraction {
    Map {
        stage: Stage,
        a: Element,
        b: Element,
    },
    Verdict {
        stage: Stage,
        side: u8,
        rep: Element,
        from: Verdict,
        to: Option<Verdict>,
    },
}

/// The stage-indexed maps h_s produced by an engine.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsoApprox {
    pub level: IsoLevel,
    pub budget: Stage,
    pub frontier: Element,
    /// h at the budget as `[a, b, stable_since]`, ordered by a.
    pub pairs: Vec<(Element, Element, Stage)>,
    pub retractions: Vec<Retraction>,
    pub verdict_flips: u64,
    /// Every assignment ever made, in order.
    pub history: Vec<Assignment>,
}

impl IsoApprox {
    /// h at the budget.
    pub fn final_map(&self) -> BTreeMap<Element, Element> {
        self.pairs.iter().map(|&(a, b, _)| (a, b)).collect()
    }

    /// h_s.
    pub fn map_at(&self, s: Stage) -> BTreeMap<Element, Element> {
        self.history
            .iter()
            .filter(|x| x.from <= s && x.to.is_none_or(|t| s < t))
            .map(|x| (x.a, x.b))
            .collect()
    }

    /// No assignment was ever withdrawn: h_s ⊆ h_t for s ≤ t.
    pub fn is_monotone(&self) -> bool {
        self.history.iter().all(|x| x.to.is_none())
    }

    /// Map-layer retractions per element.
    pub fn retraction_counts(&self) -> BTreeMap<Element, usize> {
        let mut out = BTreeMap::new();
        for r in &self.retractions {
            if let Retraction::Map { a, .. } = r {
                *out.entry(*a).or_default() += 1;
            }
        }
        out
    }

    pub fn stable_since(&self, a: Element) -> Option<Stage> {
        self.pairs.binary_search_by_key(&a, |p| p.0).ok().map(|i| self.pairs[i].2)
    }

    /// Elements ≤ frontier in the domain of h at the budget.
    pub fn stabilized(&self) -> Vec<Element> {
        self.pairs.iter().map(|p| p.0).filter(|&a| a <= self.frontier).collect()
    }
}

/// Why a partial map fails to be an isomorphism on the frontier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Counterexample {
    /// A placed element ≤ n outside the domain.
    Missing { a: Element },
    NotInjective { a1: Element, a2: Element, b: Element },
    /// `a1 E a2` in A is `related_a`, but `h(a1) E h(a2)` in B is not.
    Relation {
        a1: Element,
        a2: Element,
        b1: Element,
        b2: Element,
        related_a: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub frontier: Element,
    /// Domain elements ≤ n that were checked.
    pub checked: usize,
    pub counterexample: Option<Counterexample>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Check that `h` is injective and preserves and reflects E on the elements
/// ≤ n, and that it covers every element ≤ n placed in A so far.  Reports
/// the first counterexample in (a1, a2) order.
pub fn verify_partial_iso(
    a: &mut StageStructure,
    b: &mut StageStructure,
    h: &BTreeMap<Element, Element>,
    n: Element,
) -> Result<Verification> {
    let mut dom = Vec::new();
    for x in 0..=n {
        let placed = a.partition().class_of(x);
        match (placed, h.get(&x)) {
            (_, Some(&y)) => {
                let ca = a.ensure_placed(x)?;
                let cb = b.ensure_placed(y)?;
                dom.push((x, y, ca, cb));
            }
            (Some(_), None) => {
                return Ok(Verification { frontier: n, checked: dom.len(), counterexample: Some(Counterexample::Missing { a: x }) })
            }
            (None, None) => {}
        }
    }
    for (i, &(a1, b1, ca1, cb1)) in dom.iter().enumerate() {
        for &(a2, b2, ca2, cb2) in &dom[i + 1..] {
            let cx = if b1 == b2 {
                Some(Counterexample::NotInjective { a1, a2, b: b1 })
            } else if (ca1 == ca2) != (cb1 == cb2) {
                Some(Counterexample::Relation { a1, a2, b1, b2, related_a: ca1 == ca2 })
            } else {
                None
            };
            if cx.is_some() {
                return Ok(Verification { frontier: n, checked: dom.len(), counterexample: cx });
            }
        }
    }
    Ok(Verification { frontier: n, checked: dom.len(), counterexample: None })
}
