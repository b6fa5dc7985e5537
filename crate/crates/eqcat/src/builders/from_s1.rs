//! A structure with a prescribed Σ⁰₂ character and no infinite classes,
//! steered by an s₁-function.
//!
//! Quadruples of B are admitted one per stage as in the Σ⁰₂ builder, but a
//! refuted class cannot be made infinite.  It is set aside as a *bloc* and
//! later attached to a *marker* j: a class that follows f(j, s) forever.
//! Active (k, 1) classes whose size collides with a marker are displaced,
//! and revived once the marker moves past them.
//!
//! The bloc life cycle is an explicit automaton, audited on every change:
//!
//! ```text
//! active ──► inactive-waiting ──► attached(j)
//!    │                               ▲
//!    └────► displaced ───────────────┘
//!              │  ▲
//!              ▼  │
//!            revived ──► inactive-waiting
//! ```
//!
//! f is read through max_{i≤j}(f(i,s) + j − i), which has the same limits
//! as f but is strictly increasing in j at every stage, so marker classes
//! never share a size.

use super::bset::{BEnumerator, Watch};
use super::sfunc::{MonotoneReader, SFunctionSpec};
use crate::error::{Error, Result};
use crate::predicates::Predicate;
use crate::structure::{ClassId, Element, Partition, PoolSpec, Stage, StageProgram, StageStructure};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

const REPS: usize = 0;
const FILL: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum BlocStatus {
    Active { b: usize },
    InactiveWaiting,
    Displaced { b: usize, marker: u64 },
    Attached { marker: u64 },
    Revived { b: usize, rep: Element },
}

impl BlocStatus {
    fn label(&self) -> &'static str {
        match self {
            BlocStatus::Active { .. } => "active",
            BlocStatus::InactiveWaiting => "inactive-waiting",
            BlocStatus::Displaced { .. } => "displaced",
            BlocStatus::Attached { .. } => "attached",
            BlocStatus::Revived { .. } => "revived",
        }
    }

    /// The legal edges of the automaton.
    pub fn may_become(&self, next: &BlocStatus) -> bool {
        use BlocStatus::*;
        matches!(
            (self, next),
            (Active { .. } | Revived { .. }, InactiveWaiting | Displaced { .. })
                | (InactiveWaiting, Attached { .. })
                | (Displaced { .. }, Revived { .. } | Attached { .. })
        )
    }
}

impl fmt::Display for BlocStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bloc {
    pub class: ClassId,
    pub rep: Element,
    pub status: BlocStatus,
    pub waiting_since: Option<Stage>,
    stuck_reported: bool,
}

/// What a quadruple b_i currently stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    /// Inactive with no class of its own to look after.
    Gone,
    /// Active and represented by a bloc acting as a class.
    Represented(usize),
    /// Active but displaced by a marker; its old bloc, if still unattached.
    Displaced { marker: u64, bloc: Option<usize> },
}

#[derive(Clone, Debug)]
struct Quad {
    watch: Watch,
    role: Role,
}

pub struct FromS1Program {
    r: Predicate,
    f: MonotoneReader,
    quads: BEnumerator,
    admitted: Vec<Quad>,
    /// Admitted quadruples that are still active.
    live: Vec<usize>,
    blocs: Vec<Bloc>,
    /// Waiting blocs keyed by (size, representative).
    waiting: BTreeSet<(u64, Element, usize)>,
    /// marker j → (bloc, current value).
    markers: BTreeMap<u64, (usize, u64)>,
    transitions: u64,
    horizon_factor: u64,
}

impl FromS1Program {
    pub fn new(f: SFunctionSpec, r: Predicate) -> Result<Self> {
        let quads = BEnumerator::new(r.clone())?;
        Ok(FromS1Program {
            r,
            f: MonotoneReader::new(f),
            quads,
            admitted: Vec::new(),
            live: Vec::new(),
            blocs: Vec::new(),
            waiting: BTreeSet::new(),
            markers: BTreeMap::new(),
            transitions: 0,
            horizon_factor: 10,
        })
    }

    /// A bloc waiting since stage t is reported stuck at stage ≥ factor·(t+1).
    pub fn with_horizon_factor(mut self, factor: u64) -> Self {
        self.horizon_factor = factor;
        self
    }

    pub fn blocs(&self) -> &[Bloc] {
        &self.blocs
    }

    /// (marker, class, current value) for every marker in use.
    pub fn markers(&self) -> Vec<(u64, ClassId, u64)> {
        self.markers.iter().map(|(&j, &(b, v))| (j, self.blocs[b].class, v)).collect()
    }

    pub fn transition_count(&self) -> u64 {
        self.transitions
    }

    fn transition(&mut self, part: &mut Partition, bloc: usize, to: BlocStatus) -> Result<()> {
        let from = self.blocs[bloc].status;
        if !from.may_become(&to) {
            return Err(Error::IllegalTransition { bloc, from: from.to_string(), to: to.to_string() });
        }
        let s = part.stage();
        let waits = |st: &BlocStatus| matches!(st, BlocStatus::InactiveWaiting | BlocStatus::Displaced { .. });
        let key = (part.size(self.blocs[bloc].class), self.blocs[bloc].rep, bloc);
        if waits(&from) {
            self.waiting.remove(&key);
        }
        let b = &mut self.blocs[bloc];
        b.status = to;
        if waits(&to) {
            if !waits(&from) {
                b.waiting_since = Some(s);
                b.stuck_reported = false;
            }
            self.waiting.insert(key);
        } else {
            b.waiting_since = None;
        }
        self.transitions += 1;
        part.log("bloc", json!({ "bloc": bloc, "from": from, "to": to }));
        Ok(())
    }

    fn open_bloc(&mut self, part: &mut Partition, rep: Element, k: u64, status: BlocStatus) -> Result<usize> {
        let class = part.new_class(rep)?;
        part.add_fillers(class, FILL, k.saturating_sub(1))?;
        self.blocs.push(Bloc { class, rep, status, waiting_since: None, stuck_reported: false });
        Ok(self.blocs.len() - 1)
    }

    /// f'(j, s) for j ≤ s.
    fn normalized(&mut self, s: Stage) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(s as usize + 1);
        let mut prev = 0u64;
        for j in 0..=s {
            let v = self.f.read(j, s)?.max(prev.saturating_add(1)).max(1);
            out.push(v);
            prev = v;
        }
        Ok(out)
    }

    fn marker_sizes(&self) -> BTreeMap<u64, u64> {
        self.markers.iter().map(|(&j, &(_, v))| (v, j)).collect()
    }

    fn admit(&mut self, part: &mut Partition, s: Stage) -> Result<()> {
        let q = self.quads.next().expect("B is infinite");
        let rep = part.take(REPS)?;
        let mut watch = Watch::new(q);
        let active = watch.check(&self.r, s);
        let i = self.admitted.len();
        let role = if !active {
            part.set_aside(rep);
            Role::Gone
        } else if let Some(&j) = self.marker_sizes().get(&q.k).filter(|_| q.n == 1) {
            part.set_aside(rep);
            Role::Displaced { marker: j, bloc: None }
        } else {
            Role::Represented(self.open_bloc(part, rep, q.k, BlocStatus::Active { b: i })?)
        };
        part.log("admit", json!({ "b": i, "q": q, "rep": rep, "active": active }));
        self.admitted.push(Quad { watch, role });
        if active {
            self.live.push(i);
        }
        Ok(())
    }

    fn deactivate(&mut self, part: &mut Partition, s: Stage) -> Result<()> {
        let mut still = Vec::with_capacity(self.live.len());
        for i in std::mem::take(&mut self.live) {
            if self.admitted[i].watch.check(&self.r, s) {
                still.push(i);
                continue;
            }
            if let Role::Represented(bl) = self.admitted[i].role {
                self.transition(part, bl, BlocStatus::InactiveWaiting)?;
            }
            self.admitted[i].role = Role::Gone;
            part.log("deactivate", json!({ "b": i, "z": self.admitted[i].watch.refuted_at }));
        }
        self.live = still;
        Ok(())
    }

    fn attach(&mut self, part: &mut Partition, s: Stage, cur: &[u64]) -> Result<()> {
        let Some(&(size, _, bl)) = self.waiting.iter().next() else {
            return Ok(());
        };
        let lo = cur.partition_point(|&v| v < size) as u64;
        let Some(j) = (lo..=s).find(|j| !self.markers.contains_key(j)) else {
            return Ok(());
        };
        let v = cur[j as usize];
        if let BlocStatus::Displaced { b, .. } = self.blocs[bl].status {
            if let Role::Displaced { marker, bloc: Some(x) } = self.admitted[b].role {
                if x == bl {
                    self.admitted[b].role = Role::Displaced { marker, bloc: None };
                }
            }
        }
        self.transition(part, bl, BlocStatus::Attached { marker: j })?;
        part.add_fillers(self.blocs[bl].class, FILL, v - size)?;
        self.markers.insert(j, (bl, v));
        part.log("attach", json!({ "bloc": bl, "marker": j, "value": v }));
        Ok(())
    }

    fn grow_markers(&mut self, part: &mut Partition, cur: &[u64]) -> Result<()> {
        for (&j, m) in self.markers.iter_mut() {
            let v = cur[j as usize];
            if v > m.1 {
                part.add_fillers(self.blocs[m.0].class, FILL, v - m.1)?;
                m.1 = v;
            }
        }
        Ok(())
    }

    /// Make every active (k, 1) quadruple represented iff no marker has
    /// size k.
    fn reconcile(&mut self, part: &mut Partition) -> Result<()> {
        let sizes = self.marker_sizes();
        for idx in 0..self.live.len() {
            let i = self.live[idx];
            let q = self.admitted[i].watch.q;
            if q.n != 1 {
                continue;
            }
            match (self.admitted[i].role, sizes.get(&q.k)) {
                (Role::Represented(bl), Some(&j)) => {
                    self.transition(part, bl, BlocStatus::Displaced { b: i, marker: j })?;
                    self.admitted[i].role = Role::Displaced { marker: j, bloc: Some(bl) };
                    part.log("displace", json!({ "b": i, "marker": j, "size": q.k }));
                }
                (Role::Displaced { bloc, .. }, Some(&j)) => {
                    self.admitted[i].role = Role::Displaced { marker: j, bloc };
                }
                (Role::Displaced { bloc, .. }, None) => {
                    let revived = match bloc {
                        Some(bl) if matches!(self.blocs[bl].status, BlocStatus::Displaced { .. }) => {
                            let rep = self.blocs[bl].rep;
                            self.transition(part, bl, BlocStatus::Revived { b: i, rep })?;
                            bl
                        }
                        _ => {
                            let rep = part.take_filler(FILL)?;
                            self.open_bloc(part, rep, q.k, BlocStatus::Revived { b: i, rep })?
                        }
                    };
                    self.admitted[i].role = Role::Represented(revived);
                    part.log("revive", json!({ "b": i, "bloc": revived, "rep": self.blocs[revived].rep }));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn audit(&mut self, part: &mut Partition, s: Stage) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (&j, &(bl, v)) in &self.markers {
            let size = part.size(self.blocs[bl].class);
            if size != v || !seen.insert(size) {
                return Err(Error::CharacterViolation(format!(
                    "marker {j} class has size {size} (expected {v}, distinct from other markers)"
                )));
            }
        }
        let horizon = self.horizon_factor;
        let mut stuck = Vec::new();
        for &(_, _, bl) in &self.waiting {
            let b = &self.blocs[bl];
            if let Some(t) = b.waiting_since {
                if !b.stuck_reported && s >= horizon.saturating_mul(t + 1) {
                    stuck.push((bl, t));
                }
            }
        }
        for (bl, t) in stuck {
            self.blocs[bl].stuck_reported = true;
            part.log("stuck-bloc", json!({ "bloc": bl, "waiting_since": t }));
        }
        Ok(())
    }
}

impl StageProgram for FromS1Program {
    fn name(&self) -> &'static str {
        "from-s1"
    }

    fn pools(&self) -> Vec<PoolSpec> {
        vec![PoolSpec::residue(2, 0), PoolSpec::residue(2, 1)]
    }

    fn step(&mut self, part: &mut Partition) -> Result<()> {
        let s = part.stage();
        let cur = self.normalized(s)?;
        self.admit(part, s)?;
        self.deactivate(part, s)?;
        self.attach(part, s, &cur)?;
        self.grow_markers(part, &cur)?;
        self.reconcile(part)?;
        self.audit(part, s)
    }

    fn fin_decider(&self, _x: Element) -> Option<bool> {
        Some(true)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

pub fn build_from_s1(f: SFunctionSpec, r: Predicate) -> Result<StageStructure> {
    Ok(StageStructure::new(Box::new(FromS1Program::new(f, r)?)))
}
