//! Enumerable sets given as monotone stage enumerations.

use crate::error::Result;
use crate::predicates::Predicate;
use crate::structure::Stage;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Description of an enumerable set M with stage approximations M_s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "set", rename_all = "kebab-case")]
pub enum SetSpec {
    Empty,
    /// `(element, stage)` pairs; repeats are ignored after the first.
    Explicit { entries: Vec<(u64, Stage)> },
    /// Every x ≡ residue (mod modulus), enumerated at stage x + delay.
    Residue { modulus: u64, residue: u64, delay: Stage },
    /// x enters at the first stage s ≥ x with P(x, s), for a predicate over
    /// the variables `x, s`.
    Predicate { pred: Predicate },
}

impl SetSpec {
    pub fn enumerator(&self) -> Result<SetEnumerator> {
        if let SetSpec::Predicate { pred } = self {
            pred.require_arity(2)?;
        }
        Ok(SetEnumerator { spec: self.clone(), seen: BTreeSet::new(), next_stage: 0 })
    }
}

/// Stateful, deduplicating enumeration of a [`SetSpec`].
#[derive(Clone, Debug)]
pub struct SetEnumerator {
    spec: SetSpec,
    seen: BTreeSet<u64>,
    next_stage: Stage,
}

impl SetEnumerator {
    /// Elements first enumerated at stage `s`.  Stages must be visited in
    /// order; skipped stages are caught up.
    pub fn advance(&mut self, s: Stage) -> Vec<u64> {
        let mut out = Vec::new();
        while self.next_stage <= s {
            let t = self.next_stage;
            let fresh: Vec<u64> = match &self.spec {
                SetSpec::Empty => Vec::new(),
                SetSpec::Explicit { entries } => {
                    entries.iter().filter(|e| e.1 == t).map(|e| e.0).collect()
                }
                SetSpec::Residue { modulus, residue, delay } => match t.checked_sub(*delay) {
                    Some(x) if *modulus > 0 && x % modulus == *residue => vec![x],
                    _ => Vec::new(),
                },
                SetSpec::Predicate { pred } => {
                    (0..=t).filter(|&x| !self.seen.contains(&x) && pred.holds(&[x, t])).collect()
                }
            };
            for x in fresh {
                if self.seen.insert(x) {
                    out.push(x);
                }
            }
            self.next_stage += 1;
        }
        out
    }

    /// M_s for the last visited stage.
    pub fn members(&self) -> &BTreeSet<u64> {
        &self.seen
    }

    pub fn contains(&self, x: u64) -> bool {
        self.seen.contains(&x)
    }
}
