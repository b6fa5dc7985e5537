//! The canonical data model: elements, classes, stage-stamped partitions,
//! snapshots and characters.
//!
//! A [`StageStructure`] drives a deterministic [`StageProgram`] one stage at a
//! time.  Every placement is permanent and stamped with the stage that made
//! it, so the state at any earlier stage can be materialized without replay.
//!
//! Storage is compact on purpose.  Constructions in this crate grow many
//! classes by one element per stage, which is quadratic in the stage count.
//! Elements are therefore recorded as runs over arithmetic-progression pools,
//! and classes that grow every stage are kept in *growth groups* whose
//! per-stage rounds occupy one contiguous run each.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

pub type Element = u64;
pub type ClassId = u32;
pub type Stage = u64;
pub type GroupId = u32;

/// A class size that may be infinite.  ω is a distinct token, never a
/// sentinel number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Size {
    Finite(u64),
    Omega,
}

impl Size {
    pub fn finite(self) -> Option<u64> {
        match self {
            Size::Finite(k) => Some(k),
            Size::Omega => None,
        }
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Size::Finite(k) => write!(f, "{k}"),
            Size::Omega => f.write_str("omega"),
        }
    }
}

impl FromStr for Size {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "omega" | "w" | "ω" | "inf" => Ok(Size::Omega),
            t => t
                .parse::<u64>()
                .map(Size::Finite)
                .map_err(|_| Error::InvalidSpec(format!("not a size: `{s}`"))),
        }
    }
}

impl Serialize for Size {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Size::Finite(k) => ser.serialize_u64(*k),
            Size::Omega => ser.serialize_str("omega"),
        }
    }
}

impl<'de> Deserialize<'de> for Size {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Word(String),
        }
        match Repr::deserialize(de)? {
            Repr::Num(k) => Ok(Size::Finite(k)),
            Repr::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// An arithmetic progression `base + step*i` (optionally only `i < cap`) from
/// which a builder hands out elements in increasing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub base: u64,
    pub step: u64,
    pub cap: Option<u64>,
}

impl PoolSpec {
    pub fn residue(modulus: u64, residue: u64) -> Self {
        PoolSpec { base: residue, step: modulus, cap: None }
    }

    pub fn all() -> Self {
        PoolSpec::residue(1, 0)
    }

    pub fn range(start: u64, len: u64) -> Self {
        PoolSpec { base: start, step: 1, cap: Some(len) }
    }

    pub fn from(start: u64) -> Self {
        PoolSpec { base: start, step: 1, cap: None }
    }

    pub fn local(&self, x: Element) -> Option<u64> {
        if x < self.base || (x - self.base) % self.step != 0 {
            return None;
        }
        let i = (x - self.base) / self.step;
        match self.cap {
            Some(c) if i >= c => None,
            _ => Some(i),
        }
    }

    pub fn element(&self, local: u64) -> Element {
        self.base + self.step * local
    }

    /// Image of the pool under `x ↦ mul*x + add`.
    pub fn image(&self, mul: u64, add: u64) -> Self {
        PoolSpec { base: mul * self.base + add, step: mul * self.step, cap: self.cap }
    }
}

/// One line of a construction's event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub stage: Stage,
    pub kind: String,
    pub payload: serde_json::Value,
}

/// Partition mutations, recorded so composite structures can mirror a part
/// under an element coder without copying element lists.
#[derive(Clone, Debug)]
pub enum Op {
    NewClass { id: ClassId, pool: usize, local: u64 },
    Place { class: ClassId, pool: usize, local: u64, len: u64 },
    Declare { class: ClassId },
    NewGroup { group: GroupId, pool: usize },
    Join { group: GroupId, class: ClassId },
    Leave { class: ClassId },
    Round { group: GroupId, local: u64, len: u64 },
    Log(Event),
}

#[derive(Clone, Copy, Debug)]
enum SegKind {
    Class(ClassId),
    Round(GroupId),
}

#[derive(Clone, Copy, Debug)]
struct Seg {
    len: u64,
    stage: u32,
    kind: SegKind,
}

#[derive(Clone, Debug)]
struct Pool {
    spec: PoolSpec,
    next: u64,
    segs: BTreeMap<u64, Seg>,
}

#[derive(Clone, Copy, Debug)]
struct Chunk {
    pool: u32,
    local: u64,
    len: u64,
    stage: u32,
}

#[derive(Clone, Copy, Debug)]
struct GroupLink {
    group: GroupId,
    pos: u32,
    join: u32,
    /// First round the class no longer takes part in.
    leave: Option<u32>,
}


#[derive(Clone, Debug)]
struct ClassRec {
    rep: Element,
    created: u32,
    chunks: Vec<Chunk>,
    /// (stage, cumulative chunk size) at every stage where chunks grew.
    growth: Vec<(u32, u64)>,
    group: Option<GroupLink>,
    infinite_since: Option<u32>,
}

#[derive(Clone, Copy, Debug)]
struct Round {
    stage: u32,
    local: u64,
}

#[derive(Clone, Debug)]
struct Group {
    pool: u32,
    members: Vec<ClassId>,
    joins: Vec<u32>,
    rounds: Vec<Round>,
    /// (position, leave stage) of members that left, sorted by position.
    gone: Vec<(u32, u32)>,
}

impl Group {
    /// Offset of member `pos` within the round run at `stage`.
    fn offset(&self, pos: u32, stage: u32) -> u64 {
        let before = self.gone.iter().take_while(|g| g.0 < pos).filter(|g| g.1 <= stage).count();
        (pos as usize - before) as u64
    }

    /// Member at offset `o` of the round run at `stage`.
    fn member_at_offset(&self, o: u64, stage: u32) -> ClassId {
        let mut pos = o as u32;
        for &(p, l) in &self.gone {
            if l > stage {
                continue;
            }
            if p <= pos {
                pos += 1;
            } else {
                break;
            }
        }
        self.members[pos as usize]
    }
}

/// Mapping state for mirroring one part into a composite partition.
#[derive(Clone, Debug, Default)]
pub struct MirrorLink {
    pub pool_map: Vec<usize>,
    pub classes: Vec<ClassId>,
    pub groups: Vec<GroupId>,
}

/// The stage-stamped partition built by a program.
#[derive(Clone, Debug)]
pub struct Partition {
    pools: Vec<Pool>,
    classes: Vec<ClassRec>,
    groups: Vec<Group>,
    spare: BTreeSet<Element>,
    events: Vec<Event>,
    stage: Stage,
    ops: Option<Vec<Op>>,
    /// (stage, class) whenever a class is created, gains chunk elements, or
    /// joins or leaves a group; in stage order.
    touched: Vec<(u32, ClassId)>,
}

/// A class's window of group growth: it gains one element at every stage in
/// `join..leave`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GrowthWindow {
    pub group: GroupId,
    pub join: Stage,
    pub leave: Option<Stage>,
}

impl GrowthWindow {
    pub fn contains(&self, s: Stage) -> bool {
        self.join <= s && self.leave.is_none_or(|l| s < l)
    }
}

fn st(s: Stage) -> u32 {
    u32::try_from(s).expect("stage exceeds u32 range")
}

impl Partition {
    pub fn new(pools: Vec<PoolSpec>) -> Self {
        Partition {
            pools: pools
                .into_iter()
                .map(|spec| Pool { spec, next: 0, segs: BTreeMap::new() })
                .collect(),
            classes: Vec::new(),
            groups: Vec::new(),
            spare: BTreeSet::new(),
            events: Vec::new(),
            stage: 0,
            ops: None,
            touched: Vec::new(),
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn pool_specs(&self) -> Vec<PoolSpec> {
        self.pools.iter().map(|p| p.spec).collect()
    }

    /// Number of elements of `pool` handed out so far.
    pub fn reserved(&self, pool: usize) -> u64 {
        self.pools[pool].next
    }

    fn touch(&mut self, c: ClassId) {
        let s = st(self.stage);
        if self.touched.last() != Some(&(s, c)) {
            self.touched.push((s, c));
        }
    }

    fn record(&mut self, op: Op) {
        if let Some(ops) = self.ops.as_mut() {
            ops.push(op);
        }
    }

    pub fn locate(&self, x: Element) -> Option<(usize, u64)> {
        self.pools
            .iter()
            .enumerate()
            .find_map(|(i, p)| p.spec.local(x).map(|l| (i, l)))
    }

    fn reserve(&mut self, pool: usize, n: u64) -> Result<u64> {
        let p = &mut self.pools[pool];
        let start = p.next;
        let end = start
            .checked_add(n)
            .filter(|&e| p.spec.cap.is_none_or(|cap| e <= cap))
            .ok_or_else(|| Error::Invariant(format!("pool {pool} exhausted reserving {n} elements")))?;
        p.next = end;
        Ok(start)
    }

    /// Reserve the least unused element of `pool` without placing it.
    pub fn take(&mut self, pool: usize) -> Result<Element> {
        let l = self.reserve(pool, 1)?;
        Ok(self.pools[pool].spec.element(l))
    }

    /// Return a reserved, unplaced element to the spare set; spare elements
    /// are preferred by [`Partition::add_fillers`].
    pub fn set_aside(&mut self, x: Element) {
        self.spare.insert(x);
    }

    pub fn spare(&self) -> &BTreeSet<Element> {
        &self.spare
    }

    fn place_run(&mut self, class: ClassId, pool: usize, local: u64, len: u64) -> Result<()> {
        if len == 0 {
            return Ok(());
        }
        let stage = st(self.stage);
        let segs = &mut self.pools[pool].segs;
        if let Some((&start, seg)) = segs.range(..local + len).next_back() {
            if start + seg.len > local {
                return Err(Error::Invariant(format!(
                    "element {} placed twice",
                    self.pools[pool].spec.element(local.max(start))
                )));
            }
        }
        let merged = match segs.range_mut(..local).next_back() {
            Some((&start, seg))
                if start + seg.len == local
                    && seg.stage == stage
                    && matches!(seg.kind, SegKind::Class(c) if c == class) =>
            {
                seg.len += len;
                true
            }
            _ => false,
        };
        if !merged {
            segs.insert(local, Seg { len, stage, kind: SegKind::Class(class) });
        }
        let rec = &mut self.classes[class as usize];
        match rec.chunks.last_mut() {
            Some(ch) if ch.pool as usize == pool && ch.local + ch.len == local && ch.stage == stage => {
                ch.len += len
            }
            _ => rec.chunks.push(Chunk { pool: pool as u32, local, len, stage }),
        }
        match rec.growth.last_mut() {
            Some(g) if g.0 == stage => g.1 += len,
            Some(&mut (_, total)) => rec.growth.push((stage, total + len)),
            None => rec.growth.push((stage, len)),
        }
        self.touch(class);
        self.record(Op::Place { class, pool, local, len });
        Ok(())
    }

    fn new_class_at(&mut self, pool: usize, local: u64) -> Result<ClassId> {
        let id = self.classes.len() as ClassId;
        self.classes.push(ClassRec {
            rep: self.pools[pool].spec.element(local),
            created: st(self.stage),
            chunks: Vec::new(),
            growth: Vec::new(),
            group: None,
            infinite_since: None,
        });
        self.record(Op::NewClass { id, pool, local });
        let ops = self.ops.take();
        let r = self.place_run(id, pool, local, 1);
        self.ops = ops;
        r.map(|_| id)
    }

    fn reserved_local(&self, x: Element) -> Result<(usize, u64)> {
        let (pool, local) = self
            .locate(x)
            .ok_or_else(|| Error::Invariant(format!("element {x} belongs to no pool")))?;
        if local >= self.pools[pool].next {
            return Err(Error::Invariant(format!("element {x} was never reserved")));
        }
        Ok((pool, local))
    }

    /// Open a new class whose representative is the reserved element `rep`.
    pub fn new_class(&mut self, rep: Element) -> Result<ClassId> {
        let (pool, local) = self.reserved_local(rep)?;
        self.spare.remove(&rep);
        self.new_class_at(pool, local)
    }

    /// Open a new class with the least unused element of `pool`.
    pub fn new_class_fresh(&mut self, pool: usize) -> Result<ClassId> {
        let l = self.reserve(pool, 1)?;
        self.new_class_at(pool, l)
    }

    /// Place a reserved element into class `c`.
    pub fn add(&mut self, c: ClassId, x: Element) -> Result<()> {
        let (pool, local) = self.reserved_local(x)?;
        self.spare.remove(&x);
        self.place_run(c, pool, local, 1)
    }

    /// Add `n` fresh consecutive elements of `pool` to class `c`.
    pub fn add_fresh(&mut self, c: ClassId, pool: usize, n: u64) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        let l = self.reserve(pool, n)?;
        self.place_run(c, pool, l, n)
    }

    /// Add `n` elements to `c`, each time using the least of the spare set and
    /// the next fresh element of `pool`.
    pub fn add_fillers(&mut self, c: ClassId, pool: usize, n: u64) -> Result<()> {
        let mut left = n;
        while left > 0 {
            let fresh = self.pools[pool].spec.element(self.pools[pool].next);
            match self.spare.iter().next().copied() {
                Some(x) if x < fresh => {
                    self.add(c, x)?;
                    left -= 1;
                }
                _ => {
                    // Fresh elements up to the next spare one can go in one run.
                    let room = match self.spare.iter().next() {
                        Some(&x) => {
                            let spec = self.pools[pool].spec;
                            let mut k = 0;
                            while k < left && spec.element(self.pools[pool].next + k) < x {
                                k += 1;
                            }
                            k.max(1)
                        }
                        None => left,
                    };
                    self.add_fresh(c, pool, room)?;
                    left -= room;
                }
            }
        }
        Ok(())
    }

    /// The least of the spare set and the next fresh element of `pool`,
    /// reserved but not placed.
    pub fn take_filler(&mut self, pool: usize) -> Result<Element> {
        let fresh = self.pools[pool].spec.element(self.pools[pool].next);
        match self.spare.iter().next().copied() {
            Some(x) if x < fresh => {
                self.spare.remove(&x);
                Ok(x)
            }
            _ => self.take(pool),
        }
    }

    pub fn declare_infinite(&mut self, c: ClassId) {
        let rec = &mut self.classes[c as usize];
        if rec.infinite_since.is_none() {
            rec.infinite_since = Some(st(self.stage));
            self.record(Op::Declare { class: c });
        }
    }

    pub fn new_group(&mut self, pool: usize) -> GroupId {
        let id = self.groups.len() as GroupId;
        self.groups.push(Group { pool: pool as u32, members: Vec::new(), joins: Vec::new(), rounds: Vec::new(), gone: Vec::new() });
        self.record(Op::NewGroup { group: id, pool });
        id
    }

    /// Enrol `c` in group `g`; it gains one element in every round from the
    /// next stage on, forever.
    pub fn join_group(&mut self, g: GroupId, c: ClassId) -> Result<()> {
        self.join_group_at(g, c, st(self.stage + 1))
    }

    fn join_group_at(&mut self, g: GroupId, c: ClassId, join: u32) -> Result<()> {
        if self.classes[c as usize].group.is_some() {
            return Err(Error::Invariant(format!("class {c} joined two groups")));
        }
        let grp = &mut self.groups[g as usize];
        if grp.joins.last().is_some_and(|&j| j > join) {
            return Err(Error::Invariant("group joins out of order".into()));
        }
        let pos = grp.members.len() as u32;
        grp.members.push(c);
        grp.joins.push(join);
        self.classes[c as usize].group = Some(GroupLink { group: g, pos, join, leave: None });
        self.touch(c);
        self.record(Op::Join { group: g, class: c });
        Ok(())
    }

    /// Withdraw `c` from its growth group: it takes no part in rounds after
    /// this stage.  A class can be in at most one group, once.
    pub fn leave_group(&mut self, c: ClassId) -> Result<()> {
        let stage = st(self.stage + 1);
        let Some(link) = self.classes[c as usize].group.as_mut() else {
            return Err(Error::Invariant(format!("class {c} is in no group")));
        };
        if link.leave.is_some() {
            return Ok(());
        }
        let leave = stage.max(link.join);
        link.leave = Some(leave);
        let (g, pos) = (link.group, link.pos);
        let gone = &mut self.groups[g as usize].gone;
        let i = gone.partition_point(|x| x.0 < pos);
        gone.insert(i, (pos, leave));
        self.touch(c);
        self.record(Op::Leave { class: c });
        Ok(())
    }

    /// Whether `c` still gains an element in every round.
    pub fn is_growing(&self, c: ClassId) -> bool {
        self.classes[c as usize].group.is_some_and(|l| l.leave.is_none())
    }

    /// Run this stage's round of group `g`: every enrolled class gains one
    /// element, taken as one contiguous run of the group's pool.
    pub fn grow_group(&mut self, g: GroupId) -> Result<()> {
        let stage = st(self.stage);
        let grp = &self.groups[g as usize];
        let joined = grp.joins.partition_point(|&j| j <= stage);
        let len = (joined - grp.gone.iter().filter(|g| g.1 <= stage).count()) as u64;
        if len == 0 {
            return Ok(());
        }
        let pool = grp.pool as usize;
        let local = self.reserve(pool, len)?;
        self.place_round(g, local, len)
    }

    fn place_round(&mut self, g: GroupId, local: u64, len: u64) -> Result<()> {
        let stage = st(self.stage);
        let grp = &mut self.groups[g as usize];
        if grp.rounds.last().is_some_and(|r| r.stage == stage) {
            return Err(Error::Invariant(format!("group {g} grown twice at stage {stage}")));
        }
        grp.rounds.push(Round { stage, local });
        let pool = grp.pool as usize;
        self.pools[pool].segs.insert(local, Seg { len, stage, kind: SegKind::Round(g) });
        self.record(Op::Round { group: g, local, len });
        Ok(())
    }

    pub fn log(&mut self, kind: &str, payload: serde_json::Value) {
        let ev = Event { stage: self.stage, kind: kind.to_string(), payload };
        self.record(Op::Log(ev.clone()));
        self.events.push(ev);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub(crate) fn begin_stage(&mut self, s: Stage) {
        self.stage = s;
    }

    pub(crate) fn enable_ops(&mut self) {
        if self.ops.is_none() {
            self.ops = Some(Vec::new());
        }
    }

    pub(crate) fn take_ops(&mut self) -> Vec<Op> {
        self.ops.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Replay one op of a part into this (composite) partition.  The part's
    /// pool `p` is identified with this partition's pool `link.pool_map[p]`.
    pub fn mirror(&mut self, op: &Op, link: &mut MirrorLink, tag: &serde_json::Value) -> Result<()> {
        match op {
            Op::NewClass { id, pool, local } => {
                let c = self.new_class_at(link.pool_map[*pool], *local)?;
                if link.classes.len() != *id as usize {
                    return Err(Error::Invariant("mirrored class ids out of order".into()));
                }
                link.classes.push(c);
            }
            Op::Place { class, pool, local, len } => {
                self.place_run(link.classes[*class as usize], link.pool_map[*pool], *local, *len)?;
            }
            Op::Declare { class } => self.declare_infinite(link.classes[*class as usize]),
            Op::NewGroup { group, pool } => {
                let g = self.new_group(link.pool_map[*pool]);
                if link.groups.len() != *group as usize {
                    return Err(Error::Invariant("mirrored group ids out of order".into()));
                }
                link.groups.push(g);
            }
            Op::Join { group, class } => {
                let c = link.classes[*class as usize];
                self.join_group(link.groups[*group as usize], c)?;
            }
            Op::Leave { class } => self.leave_group(link.classes[*class as usize])?,
            Op::Round { group, local, len } => {
                let g = link.groups[*group as usize];
                let pool = self.groups[g as usize].pool as usize;
                let next = &mut self.pools[pool].next;
                *next = (*next).max(local + len);
                self.place_round(g, *local, *len)?;
            }
            Op::Log(ev) => {
                let payload = serde_json::json!({ "part": tag, "event": ev.kind, "data": ev.payload });
                self.log("part", payload);
            }
        }
        if let Op::NewClass { pool, local, .. } | Op::Place { pool, local, .. } = op {
            let len = if let Op::Place { len, .. } = op { *len } else { 1 };
            let next = &mut self.pools[link.pool_map[*pool]].next;
            *next = (*next).max(local + len);
        }
        Ok(())
    }

    // ---- queries -------------------------------------------------------

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn class_count_at(&self, s: Stage) -> usize {
        self.classes.partition_point(|c| (c.created as Stage) <= s)
    }

    pub fn rep(&self, c: ClassId) -> Element {
        self.classes[c as usize].rep
    }

    pub fn created(&self, c: ClassId) -> Stage {
        self.classes[c as usize].created as Stage
    }

    pub fn infinite_since(&self, c: ClassId) -> Option<Stage> {
        self.classes[c as usize].infinite_since.map(|s| s as Stage)
    }

    pub fn is_infinite_at(&self, c: ClassId, s: Stage) -> bool {
        self.infinite_since(c).is_some_and(|d| d <= s)
    }

    /// The class's rounds placed by stage `s`, as an index range into the
    /// group's rounds.
    fn round_range(&self, link: GroupLink, s: Stage) -> std::ops::Range<usize> {
        let rounds = &self.groups[link.group as usize].rounds;
        let lo = rounds.partition_point(|r| r.stage < link.join);
        let end = link.leave.map_or(s, |l| s.min(l as Stage - 1));
        let hi = rounds.partition_point(|r| (r.stage as Stage) <= end);
        lo..hi.max(lo)
    }

    fn group_rounds_between(&self, link: GroupLink, s: Stage) -> usize {
        if s < link.join as Stage {
            return 0;
        }
        self.round_range(link, s).len()
    }

    fn round_member(&self, link: GroupLink, r: &Round) -> Element {
        let grp = &self.groups[link.group as usize];
        self.pools[grp.pool as usize].spec.element(r.local + grp.offset(link.pos, r.stage))
    }

    /// Classes touched at stage `s` (created, given elements outside group
    /// rounds, joined or left a group), possibly with repeats.
    pub fn touched_at(&self, s: Stage) -> impl Iterator<Item = ClassId> + '_ {
        let lo = self.touched.partition_point(|t| (t.0 as Stage) < s);
        let hi = self.touched.partition_point(|t| (t.0 as Stage) <= s);
        self.touched[lo..hi].iter().map(|t| t.1)
    }

    pub fn growth_window(&self, c: ClassId) -> Option<GrowthWindow> {
        self.classes[c as usize].group.map(|l| GrowthWindow {
            group: l.group,
            join: l.join as Stage,
            leave: l.leave.map(|x| x as Stage),
        })
    }

    /// Whether group `g` ran a round at stage `s`.
    pub fn group_grew_at(&self, g: GroupId, s: Stage) -> bool {
        let rounds = &self.groups[g as usize].rounds;
        let i = rounds.partition_point(|r| (r.stage as Stage) < s);
        rounds.get(i).is_some_and(|r| r.stage as Stage == s)
    }

    /// Number of members placed by stage `s`.
    pub fn size_at(&self, c: ClassId, s: Stage) -> u64 {
        let rec = &self.classes[c as usize];
        let i = rec.growth.partition_point(|g| (g.0 as Stage) <= s);
        let chunked = if i == 0 { 0 } else { rec.growth[i - 1].1 };
        chunked + rec.group.map_or(0, |l| self.group_rounds_between(l, s) as u64)
    }

    pub fn size(&self, c: ClassId) -> u64 {
        self.size_at(c, self.stage)
    }

    /// Stage of the most recent size increase at or before `s`, not counting
    /// the stage that created the class.
    pub fn last_growth_at(&self, c: ClassId, s: Stage) -> Option<Stage> {
        let rec = &self.classes[c as usize];
        let mut best: Option<Stage> = None;
        let i = rec.growth.partition_point(|g| (g.0 as Stage) <= s);
        if i > 0 {
            let g = rec.growth[i - 1].0 as Stage;
            if g != rec.created as Stage {
                best = Some(g);
            }
        }
        if let Some(l) = rec.group {
            if self.group_rounds_between(l, s) > 0 {
                let rounds = &self.groups[l.group as usize].rounds;
                let hi = self.round_range(l, s).end;
                let g = rounds[hi - 1].stage as Stage;
                best = Some(best.map_or(g, |b| b.max(g)));
            }
        }
        best
    }

    /// Members placed by stage `s`, in placement order.
    pub fn members_at(&self, c: ClassId, s: Stage) -> Vec<Element> {
        let mut out = Vec::new();
        self.for_each_member_at(c, s, |x| {
            out.push(x);
            true
        });
        out
    }

    /// Visit members placed by stage `s` in placement order; stop when `f`
    /// returns false.  Placement order is by stage; within a stage a group
    /// round precedes chunks.
    pub fn for_each_member_at(&self, c: ClassId, s: Stage, mut f: impl FnMut(Element) -> bool) {
        let rec = &self.classes[c as usize];
        let rounds: &[Round] = match rec.group {
            Some(l) if s >= l.join as Stage => &self.groups[l.group as usize].rounds[self.round_range(l, s)],
            _ => &[],
        };
        let mut ri = 0;
        for ch in rec.chunks.iter().take_while(|ch| ch.stage as Stage <= s) {
            while ri < rounds.len() && rounds[ri].stage <= ch.stage {
                if !f(self.round_member(rec.group.unwrap(), &rounds[ri])) {
                    return;
                }
                ri += 1;
            }
            let spec = self.pools[ch.pool as usize].spec;
            for j in 0..ch.len {
                if !f(spec.element(ch.local + j)) {
                    return;
                }
            }
        }
        for r in &rounds[ri..] {
            if !f(self.round_member(rec.group.unwrap(), r)) {
                return;
            }
        }
    }

    /// |{x ∈ [c] : x placed by stage `s`, x ≤ `bound`}|, by run arithmetic.
    pub fn count_members_le(&self, c: ClassId, s: Stage, bound: Element) -> u64 {
        let rec = &self.classes[c as usize];
        let mut n = 0;
        for ch in &rec.chunks {
            if ch.stage as Stage > s {
                break;
            }
            let spec = self.pools[ch.pool as usize].spec;
            let first = spec.element(ch.local);
            if first > bound {
                continue;
            }
            n += ((bound - first) / spec.step + 1).min(ch.len);
        }
        if let Some(l) = rec.group {
            if s >= l.join as Stage {
                // Round members increase with the stage.
                let rounds = &self.groups[l.group as usize].rounds[self.round_range(l, s)];
                n += rounds.partition_point(|r| self.round_member(l, r) <= bound) as u64;
            }
        }
        n
    }

    /// The `n`-th member (0-based, placement order) placed by stage `s`.
    pub fn nth_member_at(&self, c: ClassId, n: u64, s: Stage) -> Option<Element> {
        let mut out = None;
        let mut i = 0;
        self.for_each_member_at(c, s, |x| {
            if i == n {
                out = Some(x);
                return false;
            }
            i += 1;
            true
        });
        out
    }

    /// Class and placement stage of `x`, if placed.
    pub fn placement(&self, x: Element) -> Option<(ClassId, Stage)> {
        let (pool, local) = self.locate(x)?;
        let (&start, seg) = self.pools[pool].segs.range(..=local).next_back()?;
        if local >= start + seg.len {
            return None;
        }
        let c = match seg.kind {
            SegKind::Class(c) => c,
            SegKind::Round(g) => self.groups[g as usize].member_at_offset(local - start, seg.stage),
        };
        Some((c, seg.stage as Stage))
    }

    pub fn class_of(&self, x: Element) -> Option<ClassId> {
        self.placement(x).map(|p| p.0)
    }

    pub fn class_of_at(&self, x: Element, s: Stage) -> Option<ClassId> {
        self.placement(x).filter(|p| p.1 <= s).map(|p| p.0)
    }

    pub fn snapshot(&self, s: Stage) -> Snapshot {
        let n = self.class_count_at(s);
        let classes = (0..n as ClassId)
            .map(|c| SnapshotClass { id: c, infinite: self.is_infinite_at(c, s), members: self.members_at(c, s) })
            .collect();
        Snapshot { stage: s, classes }
    }

    /// Classes by current size at stage `s`, skipping declared-infinite ones.
    pub fn character_at(&self, s: Stage) -> CharacterApprox {
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for c in 0..self.class_count_at(s) as ClassId {
            if !self.is_infinite_at(c, s) {
                *counts.entry(self.size_at(c, s)).or_default() += 1;
            }
        }
        CharacterApprox::from_counts(s, &counts)
    }
}

/// A deterministic stage procedure.  `step` is called once per stage, with
/// [`Partition::stage`] already set.
pub trait StageProgram: Any {
    fn name(&self) -> &'static str;
    fn pools(&self) -> Vec<PoolSpec>;
    fn step(&mut self, part: &mut Partition) -> Result<()>;
    /// A stage by which `x` is guaranteed placed, when the program knows one.
    fn high_water(&self, _x: Element) -> Option<Stage> {
        None
    }
    /// Stage-independent decision of whether `x` lies in a finite class, for
    /// programs whose Fin-set is decidable by construction.
    fn fin_decider(&self, _x: Element) -> Option<bool> {
        None
    }
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

/// Default stage bound used when a program cannot bound an element's
/// placement stage itself.
pub const DEFAULT_HARD_BUDGET: Stage = 20_000;

/// A program together with the partition it has built so far.
pub struct StageStructure {
    program: Box<dyn StageProgram>,
    part: Partition,
    built: Option<Stage>,
    hard_budget: Stage,
}

impl fmt::Debug for StageStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StageStructure")
            .field("program", &self.program.name())
            .field("built", &self.built)
            .finish()
    }
}

impl StageStructure {
    pub fn new(program: Box<dyn StageProgram>) -> Self {
        let part = Partition::new(program.pools());
        StageStructure { program, part, built: None, hard_budget: DEFAULT_HARD_BUDGET }
    }

    pub fn with_hard_budget(mut self, budget: Stage) -> Self {
        self.hard_budget = budget;
        self
    }

    pub fn name(&self) -> &'static str {
        self.program.name()
    }

    pub fn program(&self) -> &dyn StageProgram {
        self.program.as_ref()
    }

    pub fn program_as<T: 'static>(&self) -> Option<&T> {
        self.program.as_any().downcast_ref()
    }

    pub fn program_as_mut<T: 'static>(&mut self) -> Option<&mut T> {
        self.program.as_any_mut().downcast_mut()
    }

    /// Last completed stage, if any.
    pub fn built(&self) -> Option<Stage> {
        self.built
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    pub fn events(&self) -> &[Event] {
        self.part.events()
    }

    pub(crate) fn enable_ops(&mut self) {
        self.part.enable_ops();
    }

    pub(crate) fn take_ops(&mut self) -> Vec<Op> {
        self.part.take_ops()
    }

    /// Run the program through stage `s`.
    pub fn advance_to(&mut self, s: Stage) -> Result<()> {
        while self.built.is_none_or(|b| b < s) {
            let next = self.built.map_or(0, |b| b + 1);
            self.part.begin_stage(next);
            self.program.step(&mut self.part)?;
            self.built = Some(next);
        }
        Ok(())
    }

    /// Run until `x` is placed, within the program's own bound or the hard
    /// budget.
    pub fn ensure_placed(&mut self, x: Element) -> Result<ClassId> {
        if let Some(c) = self.part.class_of(x) {
            return Ok(c);
        }
        let bound = self.program.high_water(x).unwrap_or(self.hard_budget);
        while self.built.is_none_or(|b| b < bound) {
            let next = self.built.map_or(0, |b| b + 1);
            self.advance_to(next)?;
            if let Some(c) = self.part.class_of(x) {
                return Ok(c);
            }
        }
        Err(Error::BudgetExceeded { element: x, stage: bound })
    }

    pub fn related(&mut self, a: Element, b: Element) -> Result<bool> {
        let ca = self.ensure_placed(a)?;
        let cb = self.ensure_placed(b)?;
        Ok(ca == cb)
    }

    /// |{x ≤ s : x placed by stage s and x related to a}|.
    pub fn card_at_stage(&mut self, a: Element, s: Stage) -> Result<u64> {
        self.advance_to(s)?;
        let Some(c) = self.part.class_of_at(a, s) else {
            return Ok(0);
        };
        Ok(self.part.count_members_le(c, s, s))
    }

    pub fn size_query(&mut self, a: Element, k: u64, budget: Stage) -> Result<SizeVerdict> {
        if k == 0 {
            return Err(Error::InvalidSpec("size bound k must be at least 1".into()));
        }
        self.advance_to(budget)?;
        let Some(c) = self.part.class_of_at(a, budget) else {
            return Ok(SizeVerdict::Unknown { budget });
        };
        let count = self.part.size_at(c, budget);
        Ok(if count > k {
            SizeVerdict::AtMostImpossible { k, budget }
        } else {
            SizeVerdict::ExactlyCurrent { count, budget }
        })
    }

    pub fn character_at_stage(&mut self, s: Stage) -> Result<CharacterApprox> {
        self.advance_to(s)?;
        Ok(self.part.character_at(s))
    }

    pub fn snapshot(&mut self, s: Stage) -> Result<Snapshot> {
        self.advance_to(s)?;
        Ok(self.part.snapshot(s))
    }

    /// Current size of the class of `x` at stage `s` (0 if unplaced).
    pub fn class_size_at(&mut self, x: Element, s: Stage) -> Result<u64> {
        self.advance_to(s)?;
        Ok(self.part.class_of_at(x, s).map_or(0, |c| self.part.size_at(c, s)))
    }
}

/// Outcome of a budgeted size query.  Only refutations are final.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SizeVerdict {
    /// More than `k` members were found: the class cannot have size ≤ k.
    AtMostImpossible { k: u64, budget: Stage },
    /// `count` members seen so far — a lower bound, never an upper bound.
    ExactlyCurrent { count: u64, budget: Stage },
    /// The element was not placed within the budget.
    Unknown { budget: Stage },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotClass {
    pub id: ClassId,
    pub infinite: bool,
    pub members: Vec<Element>,
}

/// The materialized state of a structure at one stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub stage: Stage,
    pub classes: Vec<SnapshotClass>,
}

impl Snapshot {
    pub fn placement(&self) -> BTreeMap<Element, ClassId> {
        self.classes
            .iter()
            .flat_map(|c| c.members.iter().map(move |&x| (x, c.id)))
            .collect()
    }

    /// True if every class of `self` is a prefix of the same class in
    /// `later` and flags only turn on.
    pub fn is_restriction_of(&self, later: &Snapshot) -> bool {
        self.classes.len() <= later.classes.len()
            && self.classes.iter().zip(&later.classes).all(|(a, b)| {
                a.id == b.id && b.members.starts_with(&a.members) && (!a.infinite || b.infinite)
            })
    }
}

/// A finite, count-downward-closed set of (size, count) pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterApprox {
    pub stage: Stage,
    pub pairs: BTreeSet<(u64, u64)>,
}

impl CharacterApprox {
    pub fn from_counts(stage: Stage, counts: &BTreeMap<u64, u64>) -> Self {
        let pairs = counts
            .iter()
            .flat_map(|(&k, &m)| (1..=m).map(move |n| (k, n)))
            .collect();
        CharacterApprox { stage, pairs }
    }

    /// Largest n with (k, n) present.
    pub fn count_of(&self, k: u64) -> u64 {
        self.pairs.range((k, 0)..=(k, u64::MAX)).map(|p| p.1).max().unwrap_or(0)
    }
}

/// True iff `(k, n+1) ∈ K ⇒ (k, n) ∈ K` for every pair with n ≥ 1.
pub fn validate_character(pairs: &BTreeSet<(u64, u64)>) -> bool {
    pairs.iter().all(|&(k, n)| n <= 1 || pairs.contains(&(k, n - 1)))
}

/// [`validate_character`] plus the requirement that sizes and counts are ≥ 1.
pub fn validate_character_strict(pairs: &BTreeSet<(u64, u64)>) -> bool {
    pairs.iter().all(|&(k, n)| k >= 1 && n >= 1) && validate_character(pairs)
}
