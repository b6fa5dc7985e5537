//! The double-limit engine: no side information at all.

use super::engine::{Engine, Rule};
use super::{IsoApprox, IsoBudget, IsoLevel, Verdict};
use crate::error::Result;
use crate::structure::{ClassId, Stage, StageStructure};
use std::collections::HashMap;

/// Inner estimator: a class is finite once it has not grown for w stages
/// (w per class, doubled each time a finite verdict is refuted by growth),
/// infinite while it keeps growing, and unclassified until its creation is
/// w stages old.
#[derive(Default)]
struct QuietRule {
    w: [HashMap<ClassId, u64>; 2],
}

impl QuietRule {
    fn window(&self, side: usize, c: ClassId) -> u64 {
        self.w[side].get(&c).copied().unwrap_or(1)
    }
}

impl Rule for QuietRule {
    fn verdict(&mut self, side: usize, st: &StageStructure, c: ClassId, s: Stage, old: Option<Verdict>) -> Result<Option<Verdict>> {
        let part = st.partition();
        let w = self.window(side, c);
        let v = match part.last_growth_at(c, s) {
            Some(g) if s - g < w => Some(Verdict::Infinite),
            Some(_) => Some(Verdict::Finite(part.size_at(c, s))),
            None if s - part.created(c) < w => None,
            None => Some(Verdict::Finite(part.size_at(c, s))),
        };
        if matches!(old, Some(Verdict::Finite(_))) && v == Some(Verdict::Infinite) {
            self.w[side].insert(c, w * 2);
        }
        Ok(v)
    }

    fn saturated(&self, v: Option<Verdict>) -> bool {
        v == Some(Verdict::Infinite)
    }

    fn recheck_at(&self, side: usize, st: &StageStructure, c: ClassId, s: Stage) -> Option<Stage> {
        let part = st.partition();
        let w = self.window(side, c);
        // Classes in a growth window keep growing; leaving it touches them.
        if part.growth_window(c).is_some_and(|g| g.contains(s + 1)) {
            return None;
        }
        match part.last_growth_at(c, s) {
            Some(g) if s - g < w => Some(g + w),
            Some(_) => None,
            None => (s - part.created(c) < w).then(|| part.created(c) + w),
        }
    }

    fn retractable(&self) -> bool {
        true
    }
}

/// Match classes on current verdicts of the quiet-window estimator.  Both
/// layers of retraction — verdict flips and map withdrawals — are logged.
pub fn iso_delta3(a: &mut StageStructure, b: &mut StageStructure, run: IsoBudget) -> Result<IsoApprox> {
    Engine::new(QuietRule::default(), IsoLevel::Delta3, a, b, run).run()
}
