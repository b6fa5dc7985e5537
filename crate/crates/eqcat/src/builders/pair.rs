//! Two copies C, D of a structure with infinitely many classes of sizes
//! k1 < k2 ≤ ω, where the size-k1 elements are decidable in C but code an
//! enumerable set M in D.
//!
//! C is the union of the blocks {m·k1, …, m·k1 + k1 − 1} (on evens) with a
//! copy B of the base that has no class of size k1 (on odds).  D is the
//! union of the gadget C′ (on evens) with the base itself (on odds).  In C′
//! the class with representative 2a — its a-th class, found in D at 4a —
//! has size k1 while a ∉ M and grows to k2 when a enters M.

use super::basic::periodic_structure;
use super::bounded::{build_bounded, BoundedCharSpec};
use super::from_s1::build_from_s1;
use super::sets::{SetEnumerator, SetSpec};
use super::sfunc::SFunctionSpec;
use super::union::{effective_union, Coder};
use crate::error::{Error, Result};
use crate::predicates::{sigma2_member_at, Builtin, Predicate};
use crate::structure::{ClassId, Element, GroupId, Partition, PoolSpec, Size, Stage, StageProgram, StageStructure};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::any::Any;
use std::collections::BTreeSet;

/// The structure A whose two copies are built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "kebab-case")]
pub enum PairBase {
    Bounded { spec: BoundedCharSpec },
    /// Character given by R, realized through the s₁-function f.
    S1 { f: SFunctionSpec, r: Predicate },
}

/// The gadget C′: classes [2i] of size k1 until i enters M, then k2.
pub struct CPrimeProgram {
    k1: u64,
    k2: Size,
    m: SetEnumerator,
    entered: BTreeSet<u64>,
    classes: Vec<ClassId>,
    growth: Option<GroupId>,
}

impl CPrimeProgram {
    pub fn new(k1: u64, k2: Size, m: &SetSpec) -> Result<Self> {
        if k1 == 0 || k2.finite().is_some_and(|k2| k2 <= k1) {
            return Err(Error::InvalidSpec("need 1 ≤ k1 < k2".into()));
        }
        Ok(CPrimeProgram { k1, k2, m: m.enumerator()?, entered: BTreeSet::new(), classes: Vec::new(), growth: None })
    }

    /// Class of representative 2a.
    pub fn class_of_index(&self, a: usize) -> Option<ClassId> {
        self.classes.get(a).copied()
    }

    fn enlarge(&self, part: &mut Partition, c: ClassId, g: GroupId) -> Result<()> {
        let have = part.size(c);
        match self.k2 {
            Size::Finite(k2) => part.add_fillers(c, 1, k2.saturating_sub(have)),
            Size::Omega => {
                part.declare_infinite(c);
                let want = self.k1.max(part.stage());
                part.add_fillers(c, 1, want.saturating_sub(have))?;
                part.join_group(g, c)
            }
        }
    }
}

impl StageProgram for CPrimeProgram {
    fn name(&self) -> &'static str {
        "c-prime"
    }

    fn pools(&self) -> Vec<PoolSpec> {
        vec![PoolSpec::residue(2, 0), PoolSpec::residue(2, 1)]
    }

    fn step(&mut self, part: &mut Partition) -> Result<()> {
        let s = part.stage();
        let before = part.reserved(1);
        let g = match self.growth {
            Some(g) => g,
            None => *self.growth.insert(part.new_group(1)),
        };
        part.grow_group(g)?;
        for i in self.m.advance(s) {
            self.entered.insert(i);
            if let Some(&c) = self.classes.get(i as usize) {
                self.enlarge(part, c, g)?;
                part.log("enter", json!({ "i": i }));
            }
        }
        let rep = part.take(0)?;
        let c = part.new_class(rep)?;
        self.classes.push(c);
        part.add_fillers(c, 1, self.k1 - 1)?;
        if self.entered.contains(&s) {
            self.enlarge(part, c, g)?;
            part.log("enter", json!({ "i": s }));
        }
        if part.reserved(1) == before {
            // Keep the odd pool moving: an extra size-k1 class leaves the
            // character unchanged.
            let p = part.new_class_fresh(1)?;
            part.add_fresh(p, 1, self.k1 - 1)?;
        }
        Ok(())
    }

    fn high_water(&self, x: Element) -> Option<Stage> {
        Some(x / 2)
    }

    fn fin_decider(&self, _x: Element) -> Option<bool> {
        self.k2.finite().map(|_| true)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// Stage at which s₁-limits are probed to locate a column equal to k1.
pub const SKIP_PROBE_STAGE: Stage = 1000;

pub struct Pair {
    pub c: StageStructure,
    pub d: StageStructure,
    /// Column removed from the s₁-function, if its limit looked like k1.
    pub skip_index: Option<u64>,
}

impl Pair {
    /// The D-element representing the a-th class of C′.
    pub fn d_index_element(a: u64) -> Element {
        4 * a
    }
}

fn without_size(spec: &BoundedCharSpec, k: u64) -> BoundedCharSpec {
    BoundedCharSpec {
        repeat_sizes: spec.repeat_sizes.iter().copied().filter(|&x| x != k).collect(),
        fixed_sizes: spec.fixed_sizes.iter().copied().filter(|p| p.0 != k).collect(),
        r: spec.r,
    }
}

pub fn build_pair_t4(base: &PairBase, k1: u64, k2: Size, m: &SetSpec) -> Result<Pair> {
    let (a, b, skip_index) = match base {
        PairBase::Bounded { spec } => {
            let ok2 = match k2 {
                Size::Finite(k) => spec.repeats(k),
                Size::Omega => spec.r == Size::Omega,
            };
            if !spec.repeats(k1) || !ok2 {
                return Err(Error::SpecMismatch(format!(
                    "base needs infinitely many classes of sizes {k1} and {k2}"
                )));
            }
            (build_bounded(spec.clone())?, build_bounded(without_size(spec, k1))?, None)
        }
        PairBase::S1 { f, r } => {
            let Size::Finite(k2f) = k2 else {
                return Err(Error::SpecMismatch("an s₁ base has no infinite classes".into()));
            };
            for k in [k1, k2f] {
                if !(1..=3).all(|n| sigma2_member_at(r, k, n, 64).unwrap_or(false)) {
                    return Err(Error::SpecMismatch(format!("size {k} is not seen repeating in the base character")));
                }
            }
            let skip = (0..=k1).find(|&i| f.eval(i, SKIP_PROBE_STAGE) == k1);
            let g = skip.map_or_else(|| f.clone(), |i| f.skip(i));
            let rb = Predicate::builtin(4, Builtin::ExcludeSize { size: k1, inner: Box::new(r.clone()) })?;
            (build_from_s1(f.clone(), r.clone())?, build_from_s1(g, rb)?, skip)
        }
    };
    if k2.finite().is_some_and(|k| k <= k1) {
        return Err(Error::InvalidSpec("need k1 < k2".into()));
    }
    let blocks = periodic_structure(&[k1])?;
    let c = effective_union(vec![blocks, b], &Coder::Default)?;
    let gadget = StageStructure::new(Box::new(CPrimeProgram::new(k1, k2, m)?));
    let d = effective_union(vec![gadget, a], &Coder::Default)?;
    Ok(Pair { c, d, skip_index })
}
