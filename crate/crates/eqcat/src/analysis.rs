//! Invariants read off a built structure: representatives, s- and
//! s₁-functions, range queries on s₁-functions, and character traces.

use crate::builders::sfunc::{SFunctionSpec, SKind, Tabulation};
use crate::error::{Error, Result};
use crate::structure::{CharacterApprox, ClassId, Element, Stage, StageStructure};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

/// Class representatives a₀ < a₁ < …, where a_{i+1} is the least element
/// not related to a₀, …, a_i, with the stage at which each was confirmed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentativeList {
    pub reps: Vec<Element>,
    pub stages: Vec<Stage>,
    /// Elements skipped because their class was excised.
    #[serde(default)]
    pub excised: Vec<Element>,
}

impl RepresentativeList {
    /// Scan elements ≤ `budget` in order, each once it is placed (by stage
    /// `budget` at the latest), skipping the classes of `excise`.
    pub fn discover(st: &mut StageStructure, budget: Stage, excise: &[Element]) -> Result<(Self, Vec<ClassId>)> {
        st.advance_to(budget)?;
        let part = st.partition();
        let skip: HashSet<ClassId> = excise.iter().filter_map(|&x| part.class_of_at(x, budget)).collect();
        let mut seen: HashSet<ClassId> = HashSet::new();
        let mut list = RepresentativeList::default();
        let mut classes = Vec::new();
        let mut known = 0;
        for x in 0..=budget {
            let Some((c, placed)) = part.placement(x).filter(|p| p.1 <= budget) else {
                break;
            };
            known = known.max(placed);
            if skip.contains(&c) {
                if seen.insert(c) {
                    list.excised.push(x);
                }
                continue;
            }
            if seen.insert(c) {
                // x is known to be new once it and every smaller element
                // are placed.
                list.reps.push(x);
                list.stages.push(known);
                classes.push(c);
            }
        }
        Ok((list, classes))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SExtraction {
    pub f: SFunctionSpec,
    pub reps: RepresentativeList,
    pub budget: Stage,
}

/// f(i, s) = |{a ≤ s : a E a_i}|, reading 0 before a_i is confirmed.
pub fn extract_s(st: &mut StageStructure, budget: Stage, excise: &[Element]) -> Result<SExtraction> {
    let (reps, classes) = RepresentativeList::discover(st, budget, excise)?;
    let part = st.partition();
    let mut tab = Tabulation::default();
    for (i, &c) in classes.iter().enumerate() {
        for s in reps.stages[i]..=budget {
            tab.set(i, s, part.count_members_le(c, s, s));
        }
    }
    Ok(SExtraction { f: SFunctionSpec::tabulated(tab, SKind::S), reps, budget })
}

/// State after a completed stage of the s₁ extraction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct S1ExtractionState {
    pub stage: Stage,
    /// Frontier p_s.
    pub p: Element,
    /// a_0^s, …, a_s^s.
    pub reps: Vec<Element>,
    /// f(0, s) < … < f(s, s).
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct S1Extraction {
    pub f: SFunctionSpec,
    pub last: S1ExtractionState,
    pub budget: Stage,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum S1Outcome {
    /// Every stage up to the budget completed.
    Extracted(S1Extraction),
    /// No admissible p ≤ budget at `stage`; `partial` holds the stages that
    /// did complete.
    InsufficientEvidence { stage: Stage, partial: S1Extraction },
}

impl S1Outcome {
    pub fn extraction(&self) -> &S1Extraction {
        match self {
            S1Outcome::Extracted(x) => x,
            S1Outcome::InsufficientEvidence { partial, .. } => partial,
        }
    }

    pub fn is_insufficient(&self) -> bool {
        matches!(self, S1Outcome::InsufficientEvidence { .. })
    }
}

/// Classes of the truncation {0, …, p}, grown one element at a time.
struct Truncation {
    count: HashMap<ClassId, u64>,
    least: HashMap<ClassId, Element>,
    p: Option<Element>,
}

impl Truncation {
    fn extend(&mut self, st: &StageStructure, budget: Stage) -> Option<(ClassId, Element)> {
        let x = self.p.map_or(0, |p| p + 1);
        let c = st.partition().class_of_at(x, budget)?;
        *self.count.entry(c).or_insert(0) += 1;
        self.least.entry(c).or_insert(x);
        self.p = Some(x);
        Some((c, x))
    }
}

/// The s₁-function construction: at each stage find the least frontier p
/// admitting representatives with strictly increasing truncated counts.
/// Earlier representatives are kept for as long as their counts still
/// increase (in particular whenever no class a_j^s, j ≤ i, gained an element
/// past p_s); the rest are chosen afresh with f(i, s+1) ≥ f(i, s), so the
/// result is monotone in s.
pub fn extract_s1(st: &mut StageStructure, budget: Stage) -> Result<S1Outcome> {
    st.advance_to(budget)?;
    let st = &*st;
    let part = st.partition();
    let mut tr = Truncation { count: HashMap::new(), least: HashMap::new(), p: None };
    if tr.extend(st, budget).is_none() {
        return Err(Error::Unplaced(0));
    }
    let mut reps: Vec<Element> = vec![0];
    let mut classes: Vec<ClassId> = vec![part.class_of_at(0, budget).expect("placed")];
    let mut counts: Vec<u64> = vec![1];
    let mut tab = Tabulation::default();
    tab.set(0, 0, 1);
    let mut p_s: Element = 0;
    let finish = |tab: Tabulation, stage, p, reps: Vec<Element>, counts: Vec<u64>| S1Extraction {
        f: SFunctionSpec::tabulated(tab, SKind::S1),
        last: S1ExtractionState { stage, p, reps, counts },
        budget,
    };

    for s in 0..budget {
        let mut p = p_s;
        let found = loop {
            if let Some(choice) = admissible(&tr, &classes, &counts) {
                break Some(choice);
            }
            if p >= budget || tr.extend(st, budget).is_none() {
                break None;
            }
            p += 1;
        };
        let Some(chosen) = found else {
            let partial = finish(tab, s, p_s, reps, counts);
            return Ok(S1Outcome::InsufficientEvidence { stage: s + 1, partial });
        };
        p_s = p;
        classes = chosen;
        reps = classes.iter().map(|c| tr.least[c]).collect();
        counts = classes.iter().map(|c| tr.count[c]).collect();
        if counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invariant(format!("s₁ extraction lost strict increase at stage {}", s + 1)));
        }
        for (i, &k) in counts.iter().enumerate() {
            tab.set(i, s + 1, k);
        }
    }
    Ok(S1Outcome::Extracted(finish(tab, budget, p_s, reps, counts)))
}

/// Classes b_0, …, b_{s+1} for the current truncation, or None.  The
/// longest prefix of `prev` whose counts still increase strictly is kept;
/// the rest form the lexicographically least sequence (by least element)
/// that can still be completed.  Choosing by representative rather than by
/// count keeps each index on one class once its predecessors settle.
fn admissible(tr: &Truncation, prev: &[ClassId], prev_counts: &[u64]) -> Option<Vec<ClassId>> {
    let want = prev.len() + 1;
    let mut out = Vec::with_capacity(want);
    let mut last = 0u64;
    for &c in prev {
        let k = tr.count[&c];
        if !out.is_empty() && k <= last {
            break;
        }
        out.push(c);
        last = k;
    }
    let threshold = |i: usize, last: u64, first: bool| {
        let floor = if first { 1 } else { last + 1 };
        floor.max(prev_counts.get(i).copied().unwrap_or(0))
    };
    let mut by_count: Vec<u64> = tr.count.values().copied().collect();
    by_count.sort_unstable();
    // Whether indices i.. can be filled after a count of `last`: take the
    // least admissible count each time.  Classes already used all have
    // counts ≤ last, so they never qualify again.
    let completable = |from: usize, last: u64, first: bool| {
        let mut cursor = 0;
        let mut last = last;
        let mut first = first;
        for i in from..want {
            let t = threshold(i, last, first);
            cursor += by_count[cursor..].partition_point(|&k| k < t);
            match by_count.get(cursor) {
                Some(&k) => {
                    last = k;
                    first = false;
                    cursor += 1;
                }
                None => return false,
            }
        }
        true
    };
    if !completable(out.len(), last, out.is_empty()) {
        return None;
    }
    let mut by_rep: Vec<(Element, ClassId)> = tr.least.iter().map(|(&c, &x)| (x, c)).collect();
    by_rep.sort_unstable();
    for i in out.len()..want {
        let t = threshold(i, last, out.is_empty());
        let &(_, c) = by_rep.iter().find(|(_, c)| {
            let k = tr.count[c];
            k >= t && completable(i + 1, k, false)
        })?;
        last = tr.count[&c];
        out.push(c);
    }
    Some(out)
}

/// Two finite readings of "m is a limit of f".
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeReport {
    pub m: u64,
    pub budget: Stage,
    /// (∃i < m)(∃s < budget)(∀t ∈ (s, budget]) f(i, t) = m.
    pub sigma: bool,
    /// (∃i < m)(∀s < budget)(∃t ∈ (s, budget]) f(i, t) = m.
    pub pi: bool,
    pub agree: bool,
    /// Index with f(i, budget) = m, if any.
    pub witness: Option<u64>,
    /// First stage from which f(witness, ·) = m up to the budget.
    pub stable_since: Option<Stage>,
}

impl RangeReport {
    pub fn member(&self) -> bool {
        self.sigma && self.pi
    }
}

pub fn s1_range_member(f: &SFunctionSpec, m: u64, budget: Stage) -> RangeReport {
    let mut sigma = false;
    let mut pi = false;
    let mut witness = None;
    let mut stable_since = None;
    for i in 0..m {
        let vals: Vec<u64> = (0..=budget).map(|t| f.eval(i, t)).collect();
        // Σ-form: some s < budget after which f(i, ·) is constantly m.
        let since = (0..=budget).rev().take_while(|&t| vals[t as usize] == m).last();
        let sig = budget > 0 && since.is_some_and(|t| t <= budget);
        // Π-form: every s < budget is followed by a hit; the case s =
        // budget − 1 forces a hit at the budget, which serves every s.
        let p = budget > 0 && vals[budget as usize] == m;
        sigma |= sig;
        pi |= p;
        if witness.is_none() && vals[budget as usize] == m {
            witness = Some(i);
            stable_since = since;
        }
    }
    RangeReport { m, budget, sigma, pi, agree: sigma == pi, witness, stable_since }
}

pub fn character_trace(st: &mut StageStructure, stages: &[Stage]) -> Result<Vec<CharacterApprox>> {
    if stages.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidSpec("trace stages must be ascending".into()));
    }
    stages.iter().map(|&s| st.character_at_stage(s)).collect()
}
