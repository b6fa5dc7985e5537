//! The matching core shared by the engines.
//!
//! Work per stage is proportional to what changed: a class's verdict is
//! re-examined only when it was touched (created, given elements, joined or
//! left a growth group), while it grows through a group and its verdict
//! could still move, when a rule-requested recheck falls due, or — for
//! volatile rules — at every stage.

use super::{Assignment, IsoApprox, IsoBudget, IsoLevel, Retraction, Verdict};
use crate::error::{Error, Result};
use crate::structure::{ClassId, Element, Stage, StageStructure};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

/// How a level forms verdicts.
pub(crate) trait Rule {
    /// Verdict for class `c` of `side` at stage `s`; None while the class
    /// cannot be classified yet.  `old` is the previous verdict.
    fn verdict(
        &mut self,
        side: usize,
        st: &StageStructure,
        c: ClassId,
        s: Stage,
        old: Option<Verdict>,
    ) -> Result<Option<Verdict>>;

    /// Growth alone cannot change this verdict.
    fn saturated(&self, v: Option<Verdict>) -> bool;

    /// A stage at which `c` must be re-examined even if it does not change.
    fn recheck_at(&self, _side: usize, _st: &StageStructure, _c: ClassId, _s: Stage) -> Option<Stage> {
        None
    }

    /// Verdicts may change without growth: re-examine every class every
    /// stage.
    fn volatile(&self) -> bool {
        false
    }

    /// Whether pairs may be broken (false for the computable level).
    fn retractable(&self) -> bool;
}

type Key = (Stage, Element, ClassId);

#[derive(Default)]
struct Side {
    verdict: Vec<Option<Verdict>>,
    partner: Vec<Option<ClassId>>,
    /// Unmatched classes by verdict, in matching order.
    open: BTreeMap<Verdict, BTreeSet<Key>>,
    watch: BTreeSet<ClassId>,
    /// (class, placement index) of each frontier element, once placed.
    frontier: Vec<Option<(ClassId, u64)>>,
}

impl Side {
    fn ensure(&mut self, c: ClassId) {
        let n = c as usize + 1;
        if self.verdict.len() < n {
            self.verdict.resize(n, None);
            self.partner.resize(n, None);
        }
    }
}

pub(crate) struct Engine<'a, R: Rule> {
    rule: R,
    level: IsoLevel,
    st: [&'a mut StageStructure; 2],
    sides: [Side; 2],
    run: IsoBudget,
    timers: [BinaryHeap<Reverse<(Stage, ClassId)>>; 2],
    dirty: BTreeSet<Verdict>,
    /// Current h: a ↦ (b, index into history).
    h: BTreeMap<Element, (Element, usize)>,
    hinv: HashMap<Element, Element>,
    /// Domain elements of h by their A-class.
    by_class: HashMap<ClassId, Vec<Element>>,
    history: Vec<Assignment>,
    retractions: Vec<Retraction>,
    flips: u64,
    changed: bool,
    /// Pairs withdrawn during the current stage: a ↦ (b, history index,
    /// retraction index).  Re-assigning the same b within the stage undoes
    /// the withdrawal, since h_s then agrees with h_{s-1} at a.
    withdrawn: HashMap<Element, (Element, usize, usize)>,
    /// Retraction indices undone this stage.
    undone: Vec<usize>,
}

impl<'a, R: Rule> Engine<'a, R> {
    pub fn new(rule: R, level: IsoLevel, a: &'a mut StageStructure, b: &'a mut StageStructure, run: IsoBudget) -> Self {
        let n = run.frontier as usize + 1;
        let mut sides: [Side; 2] = Default::default();
        for sd in &mut sides {
            sd.frontier = vec![None; n];
        }
        Engine {
            rule,
            level,
            st: [a, b],
            sides,
            run,
            timers: Default::default(),
            dirty: BTreeSet::new(),
            h: BTreeMap::new(),
            hinv: HashMap::new(),
            by_class: HashMap::new(),
            history: Vec::new(),
            retractions: Vec::new(),
            flips: 0,
            changed: false,
            withdrawn: HashMap::new(),
            undone: Vec::new(),
        }
    }

    pub fn run(mut self) -> Result<IsoApprox> {
        for s in 0..=self.run.budget {
            self.stage(s)?;
        }
        let pairs = self.h.iter().map(|(&a, &(b, i))| (a, b, self.history[i].from)).collect();
        Ok(IsoApprox {
            level: self.level,
            budget: self.run.budget,
            frontier: self.run.frontier,
            pairs,
            retractions: self.retractions,
            verdict_flips: self.flips,
            history: self.history,
        })
    }

    fn stage(&mut self, s: Stage) -> Result<()> {
        self.changed = false;
        for side in 0..2 {
            self.st[side].advance_to(s)?;
            let part = self.st[side].partition();
            let mut todo: BTreeSet<ClassId> = if self.rule.volatile() {
                (0..part.class_count_at(s) as ClassId).collect()
            } else {
                part.touched_at(s).collect()
            };
            todo.extend(self.sides[side].watch.iter().copied());
            while let Some(&Reverse((t, c))) = self.timers[side].peek() {
                if t > s {
                    break;
                }
                self.timers[side].pop();
                todo.insert(c);
            }
            for c in todo {
                self.refresh(side, c, s)?;
            }
        }
        self.match_dirty(s);
        self.extend(s)?;
        self.settle_withdrawals();
        if self.changed {
            self.audit(s)?;
        }
        Ok(())
    }

    fn key(&self, side: usize, c: ClassId) -> Key {
        let part = self.st[side].partition();
        (part.created(c), part.rep(c), c)
    }

    fn refresh(&mut self, side: usize, c: ClassId, s: Stage) -> Result<()> {
        self.sides[side].ensure(c);
        let old = self.sides[side].verdict[c as usize];
        let new = self.rule.verdict(side, &*self.st[side], c, s, old)?;
        if new != old {
            if let Some(v) = old {
                self.flips += 1;
                let part = self.st[side].partition();
                if part.count_members_le(c, s, self.run.frontier) > 0 {
                    self.retractions.push(Retraction::Verdict { stage: s, side: side as u8, rep: part.rep(c), from: v, to: new });
                }
            }
            let key = self.key(side, c);
            match self.sides[side].partner[c as usize] {
                Some(p) => {
                    if !self.rule.retractable() {
                        return Err(Error::Invariant(format!(
                            "verdict of a matched class changed at stage {s} in a non-retracting engine"
                        )));
                    }
                    self.unpair(side, c, p, s);
                }
                None => {
                    if let Some(v) = old {
                        if let Some(set) = self.sides[side].open.get_mut(&v) {
                            set.remove(&key);
                        }
                    }
                }
            }
            self.sides[side].verdict[c as usize] = new;
            if let Some(v) = new {
                self.sides[side].open.entry(v).or_default().insert(key);
                self.dirty.insert(v);
            }
        }
        let st = &*self.st[side];
        let grows = st.partition().growth_window(c).is_some_and(|w| w.contains(s + 1));
        if grows && !self.rule.saturated(new) {
            self.sides[side].watch.insert(c);
        } else {
            self.sides[side].watch.remove(&c);
        }
        if let Some(t) = self.rule.recheck_at(side, st, c, s) {
            self.timers[side].push(Reverse((t.max(s + 1), c)));
        }
        Ok(())
    }

    /// Break the pair of `c` (on `side`) and `p`, retracting the elements
    /// mapped through it; `p` returns to the unmatched pool.
    fn unpair(&mut self, side: usize, c: ClassId, p: ClassId, s: Stage) {
        let other = 1 - side;
        self.sides[side].partner[c as usize] = None;
        self.sides[other].partner[p as usize] = None;
        if let Some(v) = self.sides[other].verdict[p as usize] {
            let key = self.key(other, p);
            self.sides[other].open.entry(v).or_default().insert(key);
            self.dirty.insert(v);
        }
        let ca = if side == 0 { c } else { p };
        for a in self.by_class.remove(&ca).unwrap_or_default() {
            if let Some((b, i)) = self.h.remove(&a) {
                self.hinv.remove(&b);
                self.history[i].to = Some(s);
                self.withdrawn.insert(a, (b, i, self.retractions.len()));
                self.retractions.push(Retraction::Map { stage: s, a, b });
                self.changed = true;
            }
        }
    }

    fn match_dirty(&mut self, _s: Stage) {
        for v in std::mem::take(&mut self.dirty) {
            loop {
                let (Some(&ka), Some(&kb)) = (
                    self.sides[0].open.get(&v).and_then(|x| x.first()),
                    self.sides[1].open.get(&v).and_then(|x| x.first()),
                ) else {
                    break;
                };
                self.sides[0].open.get_mut(&v).expect("present").remove(&ka);
                self.sides[1].open.get_mut(&v).expect("present").remove(&kb);
                self.sides[0].partner[ka.2 as usize] = Some(kb.2);
                self.sides[1].partner[kb.2 as usize] = Some(ka.2);
            }
        }
    }

    /// Map frontier elements of both sides through their matched classes.
    fn extend(&mut self, s: Stage) -> Result<()> {
        for side in 0..2 {
            let other = 1 - side;
            for x in 0..=self.run.frontier {
                let known = match self.sides[side].frontier[x as usize] {
                    Some(k) => k,
                    None => {
                        let part = self.st[side].partition();
                        let Some(c) = part.class_of_at(x, s) else {
                            continue;
                        };
                        let mut idx = 0;
                        part.for_each_member_at(c, s, |y| {
                            if y == x {
                                return false;
                            }
                            idx += 1;
                            true
                        });
                        self.sides[side].frontier[x as usize] = Some((c, idx));
                        (c, idx)
                    }
                };
                let done = if side == 0 { self.h.contains_key(&x) } else { self.hinv.contains_key(&x) };
                if done {
                    continue;
                }
                let (c, idx) = known;
                let Some(p) = self.sides[side].partner.get(c as usize).copied().flatten() else {
                    continue;
                };
                let op = self.st[other].partition();
                if op.size_at(p, s) <= idx {
                    continue;
                }
                let y = op.nth_member_at(p, idx, s).expect("size checked");
                let (a, b, ca) = if side == 0 { (x, y, c) } else { (y, x, p) };
                if self.h.contains_key(&a) || self.hinv.contains_key(&b) {
                    return Err(Error::Invariant(format!("conflicting assignment for {a} ↦ {b} at stage {s}")));
                }
                self.by_class.entry(ca).or_default().push(a);
                self.hinv.insert(b, a);
                self.changed = true;
                match self.withdrawn.remove(&a) {
                    Some((old, i, r)) if old == b => {
                        self.history[i].to = None;
                        self.undone.push(r);
                        self.h.insert(a, (b, i));
                    }
                    other => {
                        if let Some(w) = other {
                            self.withdrawn.insert(a, w);
                        }
                        self.h.insert(a, (b, self.history.len()));
                        self.history.push(Assignment { a, b, from: s, to: None });
                    }
                }
            }
        }
        Ok(())
    }

    /// Drop the log entries of withdrawals that were undone this stage.
    fn settle_withdrawals(&mut self) {
        self.withdrawn.clear();
        if self.undone.is_empty() {
            return;
        }
        let undone: BTreeSet<usize> = self.undone.drain(..).collect();
        let mut idx = 0;
        self.retractions.retain(|_| {
            idx += 1;
            !undone.contains(&(idx - 1))
        });
    }

    /// h_s is injective and sends each class into its partner.
    fn audit(&self, s: Stage) -> Result<()> {
        if self.h.len() != self.hinv.len() {
            return Err(Error::Invariant(format!("map not injective at stage {s}")));
        }
        let (pa, pb) = (self.st[0].partition(), self.st[1].partition());
        for (&a, &(b, _)) in &self.h {
            let ca = pa.class_of_at(a, s).ok_or(Error::Unplaced(a))?;
            let cb = pb.class_of_at(b, s).ok_or(Error::Unplaced(b))?;
            if self.sides[0].partner.get(ca as usize).copied().flatten() != Some(cb) {
                return Err(Error::Invariant(format!("{a} ↦ {b} leaves the matched pair at stage {s}")));
            }
        }
        Ok(())
    }
}
