//! Two copies B1, B2 of a structure with infinitely many infinite classes
//! and an s₁-realized character, built so that no listed limit-computable
//! guess φ_e is an isomorphism B1 → B2.
//!
//! Both copies run the Σ⁰₂ layout (quadruple representatives on 4i, the
//! infinite family on 4c+2, fillers on the odds); the c-th family class
//! contains the witness x_c = 4c+2.  When φ_e's current guess y = φ_e(x_e)
//! is not yet separated from x_e, the class of y in B2 is moved onto a fresh
//! column j2 of the (normalized) s₁-function and the class of x_e in B1 onto
//! a larger fresh column j1.  Every used column is followed by exactly one
//! class on each side, so the copies stay isomorphic; a column of value k
//! displaces the finite (k, 1) quadruple class on both sides.  A captured
//! quadruple class is replaced by the quadruple's next generation.
//!
//! Each view runs the whole joint construction and exposes one side.

use super::bset::{BEnumerator, Watch};
use super::sfunc::{MonotoneReader, SFunctionSpec};
use crate::error::{Error, Result};
use crate::predicates::{Predicate, PredicateProgram, TermProgram};
use crate::structure::{ClassId, Element, GroupId, Partition, PoolSpec, Stage, StageProgram, StageStructure};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

const REPS: usize = 0;
const FAMILY: usize = 1;
const FILL: usize = 2;

/// A limit-computable guess at an isomorphism B1 → B2, given by stage
/// approximations φ(x, s) that are either a value or diverged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "opponent", rename_all = "kebab-case")]
pub enum Opponent {
    /// φ(x, s) = x from stage `stable_from` on.
    Identity { stable_from: Stage },
    /// φ(x, s) = x + offset from stage `stable_from` on.
    Shift { offset: u64, stable_from: Stage },
    /// φ(x, s) = value from stage `stable_from` on.
    Constant { value: u64, stable_from: Stage },
    /// Never converges.
    Diverged,
    /// φ(x, s) = `value` (a term over x, s) at stages where `defined` (a
    /// predicate over s) holds.
    Dsl { value: String, defined: String },
}

#[derive(Clone, Debug)]
enum CompiledOpponent {
    Fixed(Opponent),
    Dsl { value: TermProgram, defined: PredicateProgram },
}

impl CompiledOpponent {
    fn new(o: &Opponent) -> Result<Self> {
        Ok(match o {
            Opponent::Dsl { value, defined } => CompiledOpponent::Dsl {
                value: TermProgram::parse(value, &["x", "s"])?,
                defined: PredicateProgram::parse(defined, &["s"])?,
            },
            other => CompiledOpponent::Fixed(other.clone()),
        })
    }

    /// Whether φ(·, s) is defined everywhere (definedness never depends on x).
    fn defined(&self, s: Stage) -> Result<bool> {
        Ok(match self {
            CompiledOpponent::Fixed(o) => match *o {
                Opponent::Identity { stable_from }
                | Opponent::Shift { stable_from, .. }
                | Opponent::Constant { stable_from, .. } => s >= stable_from,
                Opponent::Diverged | Opponent::Dsl { .. } => false,
            },
            CompiledOpponent::Dsl { defined, .. } => defined.eval(&[s])?,
        })
    }

    fn value(&self, x: Element, s: Stage) -> Result<Option<Element>> {
        if !self.defined(s)? {
            return Ok(None);
        }
        Ok(Some(match self {
            CompiledOpponent::Fixed(o) => match *o {
                Opponent::Identity { .. } => x,
                Opponent::Shift { offset, .. } => x.saturating_add(offset),
                Opponent::Constant { value, .. } => value,
                Opponent::Diverged | Opponent::Dsl { .. } => unreachable!("never defined"),
            },
            CompiledOpponent::Dsl { value, .. } => value.eval(&[x, s])?,
        }))
    }
}

/// What a class currently stands for on one side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    /// Current generation of the i-th quadruple.
    Quad(usize),
    Family(usize),
    /// Follows column j of the s₁-function.
    Column(u64),
    /// A displaced or superseded class, now infinite.
    Retired,
}

/// Eventual size of a class, as far as the construction has committed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fate {
    Column(u64),
    Growing,
    Open,
}

#[derive(Clone, Debug)]
struct Side {
    roles: Vec<Role>,
    quad_class: Vec<Option<ClassId>>,
    generation: Vec<u32>,
    columns: BTreeMap<u64, ClassId>,
    group: GroupId,
}

impl Side {
    fn set_role(&mut self, c: ClassId, r: Role) {
        let i = c as usize;
        if self.roles.len() <= i {
            self.roles.resize(i + 1, Role::Retired);
        }
        self.roles[i] = r;
    }

    fn fate(&self, part: &Partition, c: ClassId) -> Fate {
        match self.roles[c as usize] {
            Role::Column(j) => Fate::Column(j),
            _ if part.is_growing(c) => Fate::Growing,
            _ => Fate::Open,
        }
    }
}

/// The latest action taken for a requirement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagAction {
    pub stage: Stage,
    pub guess: Element,
    /// Column followed by [x_e] in B1.
    pub j1: u64,
    /// Column followed by [guess] in B2.
    pub j2: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementState {
    pub e: usize,
    pub witness: Element,
    pub actions: u64,
    pub last: Option<DiagAction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequirementStatus {
    /// [x_e]^{B1} and [φ_e(x_e)]^{B2} follow distinct columns, or one follows
    /// a column while the other grows forever.
    Separated,
    /// φ_e has no current guess at x_e (diverged, or guess not yet placed).
    Diverged,
    /// Attention is due at the next stage.
    Pending,
}

/// One line of the requirement log at a stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementReport {
    pub e: usize,
    pub witness: Element,
    pub actions: u64,
    pub last: Option<DiagAction>,
    pub guess: Option<Element>,
    pub status: RequirementStatus,
    pub size_b1: u64,
    pub size_b2: Option<u64>,
    pub growing_b1: bool,
    pub growing_b2: Option<bool>,
}

/// The joint construction of both copies.
#[derive(Clone, Debug)]
struct Core {
    r: Predicate,
    quads: BEnumerator,
    watches: Vec<Watch>,
    live: Vec<usize>,
    f: MonotoneReader,
    norm: Vec<u64>,
    norm_stage: Stage,
    used: BTreeSet<u64>,
    opponents: Vec<CompiledOpponent>,
    reqs: Vec<RequirementState>,
    sides: Vec<Side>,
}

fn top_up(part: &mut Partition, c: ClassId, want: u64) -> Result<()> {
    let have = part.size(c);
    part.add_fillers(c, FILL, want.saturating_sub(have))
}

fn log2(parts: &mut [&mut Partition; 2], kind: &str, payload: serde_json::Value) {
    for p in parts.iter_mut() {
        p.log(kind, payload.clone());
    }
}

impl Core {
    fn new(f: SFunctionSpec, r: Predicate, opponents: &[Opponent]) -> Result<Self> {
        let opponents = opponents.iter().map(CompiledOpponent::new).collect::<Result<Vec<_>>>()?;
        let reqs = (0..opponents.len())
            .map(|e| RequirementState { e, witness: witness(e), actions: 0, last: None })
            .collect();
        Ok(Core {
            quads: BEnumerator::new(r.clone())?,
            r,
            watches: Vec::new(),
            live: Vec::new(),
            f: MonotoneReader::new(f),
            norm: Vec::new(),
            norm_stage: 0,
            used: BTreeSet::new(),
            opponents,
            reqs,
            sides: Vec::new(),
        })
    }

    /// f′(j, s) = max(f(j, s), f′(j−1, s) + 1, 1), for the current stage.
    fn column(&mut self, j: u64, s: Stage) -> Result<u64> {
        if self.norm_stage != s {
            self.norm.clear();
            self.norm_stage = s;
        }
        while self.norm.len() as u64 <= j {
            let i = self.norm.len() as u64;
            let prev = self.norm.last().map_or(0, |&v| v.saturating_add(1));
            let v = self.f.read(i, s)?.max(prev).max(1);
            self.norm.push(v);
        }
        Ok(self.norm[j as usize])
    }

    /// Least unused column above `lo` (if any) whose value is at least `need`.
    fn fresh_column(&mut self, lo: Option<u64>, need: u64, s: Stage) -> Result<u64> {
        let mut j = lo.map_or(0, |l| l + 1);
        loop {
            if !self.used.contains(&j) && self.column(j, s)? >= need {
                return Ok(j);
            }
            j += 1;
        }
    }

    fn retire_to_growth(&self, side: usize, part: &mut Partition, c: ClassId) -> Result<()> {
        if !part.is_growing(c) {
            let s = part.stage();
            top_up(part, c, s)?;
            part.join_group(self.sides[side].group, c)?;
        }
        Ok(())
    }

    /// New generation of quadruple i on one side, caught up to `size`.
    fn respawn(&mut self, side: usize, part: &mut Partition, i: usize, size: u64, growing: bool) -> Result<ClassId> {
        let rep = part.take_filler(FILL)?;
        let c = part.new_class(rep)?;
        top_up(part, c, size)?;
        let sd = &mut self.sides[side];
        sd.set_role(c, Role::Quad(i));
        sd.quad_class[i] = Some(c);
        sd.generation[i] += 1;
        let q = sd.generation[i];
        if growing {
            part.join_group(sd.group, c)?;
        }
        part.log("permission", json!({ "side": side + 1, "b": i, "q": q, "rep": rep }));
        Ok(c)
    }

    /// Fresh class for column j on one side.
    fn open_column(&mut self, side: usize, part: &mut Partition, j: u64) -> Result<()> {
        let s = part.stage();
        let v = self.column(j, s)?;
        let rep = part.take_filler(FILL)?;
        let c = part.new_class(rep)?;
        top_up(part, c, v)?;
        let sd = &mut self.sides[side];
        sd.set_role(c, Role::Column(j));
        sd.columns.insert(j, c);
        Ok(())
    }

    /// Detach `c` from whatever it stood for, so it can follow a new column.
    fn release(&mut self, side: usize, part: &mut Partition, c: ClassId) -> Result<()> {
        match self.sides[side].roles[c as usize] {
            Role::Quad(i) => {
                let size = part.size(c);
                let growing = part.is_growing(c);
                self.respawn(side, part, i, size, growing)?;
            }
            Role::Column(j) => {
                self.sides[side].columns.remove(&j);
                self.open_column(side, part, j)?;
            }
            Role::Family(_) | Role::Retired => {}
        }
        if part.is_growing(c) {
            part.leave_group(c)?;
        }
        Ok(())
    }

    /// Make `c` (on `side`) follow column j; the other side gets a fresh
    /// class for j.
    fn capture(&mut self, parts: &mut [&mut Partition; 2], side: usize, c: ClassId, j: u64) -> Result<()> {
        self.release(side, parts[side], c)?;
        let s = parts[side].stage();
        let v = self.column(j, s)?;
        top_up(parts[side], c, v)?;
        self.sides[side].set_role(c, Role::Column(j));
        self.sides[side].columns.insert(j, c);
        self.used.insert(j);
        self.open_column(1 - side, parts[1 - side], j)
    }

    fn separated(&self, parts: &[&mut Partition; 2], cx: ClassId, cy: ClassId) -> bool {
        let fx = self.sides[0].fate(parts[0], cx);
        let fy = self.sides[1].fate(parts[1], cy);
        match (fx, fy) {
            (Fate::Column(a), Fate::Column(b)) => a != b,
            (Fate::Growing, Fate::Column(_)) => true,
            _ => false,
        }
    }

    fn requirements(&mut self, parts: &mut [&mut Partition; 2], s: Stage) -> Result<()> {
        for e in 0..self.reqs.len() {
            let x = self.reqs[e].witness;
            let Some(cx) = parts[0].class_of(x) else { continue };
            let Some(y) = self.opponents[e].value(x, s)? else { continue };
            let Some(cy) = parts[1].class_of(y) else { continue };
            if self.separated(parts, cx, cy) {
                continue;
            }
            let j2 = self.fresh_column(None, parts[1].size(cy), s)?;
            self.capture(parts, 1, cy, j2)?;
            let j1 = self.fresh_column(Some(j2), parts[0].size(cx), s)?;
            self.capture(parts, 0, cx, j1)?;
            let req = &mut self.reqs[e];
            req.actions += 1;
            req.last = Some(DiagAction { stage: s, guess: y, j1, j2 });
            let (v1, v2) = (self.column(j1, s)?, self.column(j2, s)?);
            log2(parts, "attention", json!({ "e": e, "x": x, "guess": y, "j1": j1, "j2": j2, "size_b1": v1, "size_b2": v2 }));
        }
        Ok(())
    }

    /// Keep one class of size k per (k, 1) ∈ K: a column currently of value
    /// k stands in for the (k, 1) quadruple class.
    fn reconcile(&mut self, parts: &mut [&mut Partition; 2], s: Stage) -> Result<()> {
        let mut values = BTreeSet::new();
        for j in self.used.clone() {
            values.insert(self.column(j, s)?);
        }
        for idx in 0..self.live.len() {
            let i = self.live[idx];
            let q = self.watches[i].q;
            if q.n != 1 {
                continue;
            }
            for side in 0..2 {
                let part = &mut *parts[side];
                match (values.contains(&q.k), self.sides[side].quad_class[i]) {
                    (true, Some(c)) => {
                        self.sides[side].set_role(c, Role::Retired);
                        self.sides[side].quad_class[i] = None;
                        self.retire_to_growth(side, part, c)?;
                        part.log("displace", json!({ "side": side + 1, "b": i, "k": q.k }));
                    }
                    (false, None) => {
                        self.respawn(side, part, i, q.k, false)?;
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn audit(&mut self, parts: &[&mut Partition; 2], s: Stage) -> Result<()> {
        for j in self.used.clone() {
            let v = self.column(j, s)?;
            for side in 0..2 {
                let c = self.sides[side].columns.get(&j).copied().ok_or_else(|| {
                    Error::Invariant(format!("column {j} has no class in B{}", side + 1))
                })?;
                let got = parts[side].size(c);
                if got != v {
                    return Err(Error::CharacterViolation(format!(
                        "column {j} class in B{} has {got} elements, expected {v}",
                        side + 1
                    )));
                }
            }
        }
        Ok(())
    }

    fn refute(&mut self, parts: &mut [&mut Partition; 2], i: usize) -> Result<()> {
        for side in 0..2 {
            if let Some(c) = self.sides[side].quad_class[i] {
                self.retire_to_growth(side, parts[side], c)?;
            }
        }
        let w = self.watches[i];
        log2(parts, "refute", json!({ "b": i, "q": w.q, "z": w.refuted_at }));
        Ok(())
    }

    fn step(&mut self, mut parts: [&mut Partition; 2]) -> Result<()> {
        let s = parts[0].stage();
        if self.sides.is_empty() {
            for p in parts.iter_mut() {
                let group = p.new_group(FILL);
                self.sides.push(Side {
                    roles: Vec::new(),
                    quad_class: Vec::new(),
                    generation: Vec::new(),
                    columns: BTreeMap::new(),
                    group,
                });
            }
        }
        for (side, p) in parts.iter_mut().enumerate() {
            p.grow_group(self.sides[side].group)?;
        }

        let mut still = Vec::with_capacity(self.live.len());
        for i in std::mem::take(&mut self.live) {
            if s > 0 && !self.watches[i].check(&self.r, s - 1) {
                self.refute(&mut parts, i)?;
            } else {
                still.push(i);
            }
        }
        self.live = still;

        let q = self.quads.next().expect("B is infinite");
        let i = self.watches.len();
        self.watches.push(Watch::new(q));
        let refuted = s > 0 && !self.watches[i].check(&self.r, s - 1);
        for (side, p) in parts.iter_mut().enumerate() {
            let rep = p.take(REPS)?;
            let c = p.new_class(rep)?;
            let sd = &mut self.sides[side];
            sd.set_role(c, Role::Quad(i));
            sd.quad_class.push(Some(c));
            sd.generation.push(0);
            if !refuted {
                p.add_fillers(c, FILL, q.k.saturating_sub(1))?;
            }
            p.log("admit", json!({ "b": i, "q": q, "rep": rep }));
        }
        if refuted {
            self.refute(&mut parts, i)?;
        } else {
            self.live.push(i);
        }

        if s % 2 == 0 {
            for (side, p) in parts.iter_mut().enumerate() {
                let c = p.new_class_fresh(FAMILY)?;
                let sd = &mut self.sides[side];
                sd.set_role(c, Role::Family((s / 2) as usize));
                p.join_group(sd.group, c)?;
            }
        }

        for j in self.used.clone() {
            let v = self.column(j, s)?;
            for (side, p) in parts.iter_mut().enumerate() {
                top_up(p, self.sides[side].columns[&j], v)?;
            }
        }
        self.requirements(&mut parts, s)?;
        self.reconcile(&mut parts, s)?;
        self.audit(&parts, s)
    }

    fn report(&self, parts: [&Partition; 2], s: Stage) -> Result<Vec<RequirementReport>> {
        let mut out = Vec::new();
        for req in &self.reqs {
            let x = req.witness;
            let cx = parts[0].class_of_at(x, s);
            let guess = self.opponents[req.e].value(x, s)?;
            let cy = guess.and_then(|y| parts[1].class_of_at(y, s));
            let status = match (cx, cy) {
                (Some(cx), Some(cy)) => {
                    let fx = self.sides[0].fate(parts[0], cx);
                    let fy = self.sides[1].fate(parts[1], cy);
                    match (fx, fy) {
                        (Fate::Column(a), Fate::Column(b)) if a != b => RequirementStatus::Separated,
                        (Fate::Growing, Fate::Column(_)) => RequirementStatus::Separated,
                        _ => RequirementStatus::Pending,
                    }
                }
                (Some(_), None) => RequirementStatus::Diverged,
                (None, _) => RequirementStatus::Pending,
            };
            out.push(RequirementReport {
                e: req.e,
                witness: x,
                actions: req.actions,
                last: req.last,
                guess,
                status,
                size_b1: cx.map_or(0, |c| parts[0].size_at(c, s)),
                size_b2: cy.map(|c| parts[1].size_at(c, s)),
                growing_b1: cx.is_some_and(|c| parts[0].is_growing(c)),
                growing_b2: cy.map(|c| parts[1].is_growing(c)),
            });
        }
        Ok(out)
    }
}

/// The witness of requirement e: the representative of the e-th family class.
pub fn witness(e: usize) -> Element {
    4 * e as u64 + 2
}

/// One copy of the diagonalization pair.
pub struct DiagProgram {
    core: Core,
    /// 0 for B1, 1 for B2.
    side: usize,
    other: Partition,
}

impl DiagProgram {
    pub fn new(f: SFunctionSpec, r: Predicate, opponents: &[Opponent], side: usize) -> Result<Self> {
        if side > 1 {
            return Err(Error::InvalidSpec("side must be 0 (B1) or 1 (B2)".into()));
        }
        r.require_arity(4)?;
        Ok(DiagProgram { core: Core::new(f, r, opponents)?, side, other: Partition::new(pools()) })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// The copy this view does not expose, as built so far.
    pub fn other(&self) -> &Partition {
        &self.other
    }

    pub fn requirements(&self) -> &[RequirementState] {
        &self.core.reqs
    }

    /// Requirement log at stage `s`, given this view's own partition.
    pub fn report(&self, own: &Partition, s: Stage) -> Result<Vec<RequirementReport>> {
        let parts = if self.side == 0 { [own, &self.other] } else { [&self.other, own] };
        self.core.report(parts, s)
    }

    /// Current generation counter of quadruple i on side `side`.
    pub fn generation(&self, side: usize, i: usize) -> Option<u32> {
        self.core.sides.get(side)?.generation.get(i).copied()
    }
}

fn pools() -> Vec<PoolSpec> {
    vec![PoolSpec::residue(4, 0), PoolSpec::residue(4, 2), PoolSpec::residue(2, 1)]
}

impl StageProgram for DiagProgram {
    fn name(&self) -> &'static str {
        "diag"
    }

    fn pools(&self) -> Vec<PoolSpec> {
        pools()
    }

    fn step(&mut self, part: &mut Partition) -> Result<()> {
        self.other.begin_stage(part.stage());
        let parts = if self.side == 0 { [part, &mut self.other] } else { [&mut self.other, part] };
        self.core.step(parts)
    }

    fn high_water(&self, x: Element) -> Option<Stage> {
        match x % 4 {
            0 => Some(x / 4),
            2 => Some(2 * (x / 4)),
            _ => Some(x / 2 + 1),
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

pub struct DiagPair {
    pub b1: StageStructure,
    pub b2: StageStructure,
}

impl DiagPair {
    /// Requirement log at stage `s` (runs B1 to `s`).
    pub fn requirement_log(&mut self, s: Stage) -> Result<Vec<RequirementReport>> {
        self.b1.advance_to(s)?;
        let prog = self.b1.program_as::<DiagProgram>().expect("diag view");
        prog.report(self.b1.partition(), s)
    }
}

pub fn build_diag_pair(f: SFunctionSpec, r: Predicate, opponents: &[Opponent]) -> Result<DiagPair> {
    let b1 = StageStructure::new(Box::new(DiagProgram::new(f.clone(), r.clone(), opponents, 0)?));
    let b2 = StageStructure::new(Box::new(DiagProgram::new(f, r, opponents, 1)?));
    Ok(DiagPair { b1, b2 })
}

/// The stock opponents: three guesses that stabilize (identity, a shift,
/// a constant), one that converges only after a late change of mind, and one
/// that never converges.
pub fn opponent_family() -> Vec<Opponent> {
    vec![
        Opponent::Identity { stable_from: 0 },
        Opponent::Shift { offset: 4, stable_from: 10 },
        Opponent::Constant { value: 6, stable_from: 20 },
        Opponent::Dsl { value: "x + 8 - 8 * min(s / 50, 1)".into(), defined: "true".into() },
        Opponent::Diverged,
    ]
}
