//! A structure realizing a Σ⁰₂ character, with infinitely many infinite
//! classes.
//!
//! Layout: the i-th quadruple of B is represented by element 2i and admitted
//! at stage i.  Odd elements split by residue mod 4: 4c+1 are representatives
//! of the infinite family (class c opens at stage 2c), 4c+3 form the filler
//! pool C.  Every infinite class grows by one element of C per stage.

use super::bset::{BEnumerator, BQuadruple, Watch};
use crate::error::{Error, Result};
use crate::predicates::Predicate;
use crate::structure::{ClassId, Element, GroupId, Partition, PoolSpec, Stage, StageProgram, StageStructure};
use serde_json::json;
use std::any::Any;
use std::collections::BTreeMap;

const REPS: usize = 0;
const FAMILY: usize = 1;
const FILL: usize = 2;

#[derive(Clone, Debug)]
pub struct Admitted {
    pub watch: Watch,
    pub class: ClassId,
}

pub struct Sigma2Program {
    r: Predicate,
    quads: BEnumerator,
    admitted: Vec<Admitted>,
    /// Indices of admitted quadruples not yet refuted.
    live: Vec<usize>,
    growth: Option<GroupId>,
    family: Vec<ClassId>,
}

impl Sigma2Program {
    pub fn new(r: Predicate) -> Result<Self> {
        let quads = BEnumerator::new(r.clone())?;
        Ok(Sigma2Program { r, quads, admitted: Vec::new(), live: Vec::new(), growth: None, family: Vec::new() })
    }

    pub fn admitted(&self) -> &[Admitted] {
        &self.admitted
    }

    pub fn family(&self) -> &[ClassId] {
        &self.family
    }

    fn refute(&mut self, part: &mut Partition, i: usize, g: GroupId) -> Result<()> {
        let a = &self.admitted[i];
        let c = a.class;
        part.declare_infinite(c);
        let have = part.size(c);
        part.add_fillers(c, FILL, part.stage().saturating_sub(have))?;
        part.join_group(g, c)?;
        part.log("refute", json!({ "b": i, "q": a.watch.q, "z": a.watch.refuted_at }));
        Ok(())
    }

    fn audit(&self, s: Stage) -> Result<()> {
        let mut by_pair: BTreeMap<(u64, u64), Vec<&Watch>> = BTreeMap::new();
        for &i in &self.live {
            let w = &self.admitted[i].watch;
            by_pair.entry((w.q.k, w.q.n)).or_default().push(w);
        }
        for ((k, n), ws) in by_pair {
            // A live duplicate is only legitimate while the larger-witness
            // quadruple's refutation bound has not been fully checked.
            if ws.len() > 1 && ws.iter().all(|w| s >= w.q.z) {
                return Err(Error::CharacterViolation(format!(
                    "two surviving finite classes for ({k}, {n}) at stage {s}"
                )));
            }
        }
        Ok(())
    }
}

impl StageProgram for Sigma2Program {
    fn name(&self) -> &'static str {
        "sigma2-inf"
    }

    fn pools(&self) -> Vec<PoolSpec> {
        vec![PoolSpec::residue(2, 0), PoolSpec::residue(4, 1), PoolSpec::residue(4, 3)]
    }

    fn step(&mut self, part: &mut Partition) -> Result<()> {
        let s = part.stage();
        let g = match self.growth {
            Some(g) => g,
            None => *self.growth.insert(part.new_group(FILL)),
        };
        part.grow_group(g)?;

        let mut still = Vec::with_capacity(self.live.len());
        for i in std::mem::take(&mut self.live) {
            if s > 0 && !self.admitted[i].watch.check(&self.r, s - 1) {
                self.refute(part, i, g)?;
            } else {
                still.push(i);
            }
        }
        self.live = still;

        let q: BQuadruple = self.quads.next().expect("B is infinite");
        let rep = part.take(REPS)?;
        let class = part.new_class(rep)?;
        let i = self.admitted.len();
        self.admitted.push(Admitted { watch: Watch::new(q), class });
        part.log("admit", json!({ "b": i, "q": q, "rep": rep }));
        if s > 0 && !self.admitted[i].watch.check(&self.r, s - 1) {
            self.refute(part, i, g)?;
        } else {
            part.add_fillers(class, FILL, q.k.saturating_sub(1))?;
            self.live.push(i);
        }

        if s % 2 == 0 {
            let c = part.new_class_fresh(FAMILY)?;
            part.declare_infinite(c);
            part.join_group(g, c)?;
            self.family.push(c);
        }
        self.audit(s)
    }

    fn high_water(&self, x: Element) -> Option<Stage> {
        match x % 4 {
            0 | 2 => Some(x / 2),
            1 => Some(2 * (x / 4)),
            _ => Some(x / 4 + 1),
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

pub fn build_sigma2_inf(r: Predicate) -> Result<StageStructure> {
    Ok(StageStructure::new(Box::new(Sigma2Program::new(r)?)))
}
