//! An s-function read off an enumerable set C of elements in finite
//! classes: f(i, s) counts the members ≤ s of the i-th class met by C.

use super::sets::SetSpec;
use super::sfunc::{SFunctionSpec, SKind, Tabulation};
use crate::error::Result;
use crate::structure::{ClassId, Element, Stage, StageStructure};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// A class representative and the stage at which C first met its class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discovered {
    pub rep: Element,
    pub stage: Stage,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CeExtraction {
    pub f: SFunctionSpec,
    pub reps: Vec<Discovered>,
    pub budget: Stage,
}

impl CeExtraction {
    /// True when C met no class within the budget.
    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }
}

/// Columns are the classes of C in order of first enumeration; later
/// elements of an already met class are dropped.  Column i reads 0 before
/// its class is met.
pub fn s_from_ce_subset(st: &mut StageStructure, c: &SetSpec, budget: Stage) -> Result<CeExtraction> {
    let mut en = c.enumerator()?;
    let mut seen: HashSet<ClassId> = HashSet::new();
    let mut classes: Vec<ClassId> = Vec::new();
    let mut reps = Vec::new();
    let mut tab = Tabulation::default();
    st.advance_to(budget)?;
    for s in 0..=budget {
        for x in en.advance(s) {
            let cls = st.ensure_placed(x)?;
            if seen.insert(cls) {
                classes.push(cls);
                reps.push(Discovered { rep: x, stage: s });
            }
        }
        for (i, &cls) in classes.iter().enumerate() {
            tab.set(i, s, st.partition().count_members_le(cls, s, s));
        }
    }
    Ok(CeExtraction { f: SFunctionSpec::tabulated(tab, SKind::S), reps, budget })
}
