//! The migrating test class: classes C_i of limit size lim_s g(i, s), one of
//! which absorbs 2u whenever T(u) holds and then takes over index u.  The
//! test class is infinite iff T holds infinitely often.
//!
//! Element 2u is placed at stage u: in the test class when T(u), otherwise
//! as the representative of a fresh C_u.  Odd numbers fill classes.  As in
//! the s₁ builder, g is read through max_{i≤j}(g(i,s) + j − i), so the
//! migrating class never exceeds its new target.

use super::sfunc::{MonotoneReader, SFunctionSpec};
use crate::error::{Error, Result};
use crate::predicates::Predicate;
use crate::structure::{ClassId, Element, Partition, PoolSpec, Stage, StageProgram, StageStructure};
use serde_json::json;
use std::any::Any;

pub struct TestClassProgram {
    g: MonotoneReader,
    t: Predicate,
    classes: Vec<ClassId>,
    test: usize,
    migrations: u64,
}

impl TestClassProgram {
    pub fn new(g: SFunctionSpec, t: Predicate) -> Result<Self> {
        t.require_arity(1)?;
        Ok(TestClassProgram { g: MonotoneReader::new(g), t, classes: Vec::new(), test: 0, migrations: 0 })
    }

    /// Index and class of the current test class.
    pub fn test_class(&self) -> Option<(usize, ClassId)> {
        self.classes.get(self.test).map(|&c| (self.test, c))
    }

    pub fn class_of_index(&self, i: usize) -> Option<ClassId> {
        self.classes.get(i).copied()
    }

    pub fn migrations(&self) -> u64 {
        self.migrations
    }

    fn targets(&mut self, s: Stage) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(s as usize + 1);
        let mut prev = 0u64;
        for j in 0..=s {
            let v = self.g.read(j, s)?.max(prev.saturating_add(1)).max(1);
            out.push(v);
            prev = v;
        }
        Ok(out)
    }
}

fn top_up(part: &mut Partition, c: ClassId, want: u64) -> Result<()> {
    let have = part.size(c);
    part.add_fresh(c, 1, want.saturating_sub(have))
}

impl StageProgram for TestClassProgram {
    fn name(&self) -> &'static str {
        "test-class"
    }

    fn pools(&self) -> Vec<PoolSpec> {
        vec![PoolSpec::residue(2, 0), PoolSpec::residue(2, 1)]
    }

    fn step(&mut self, part: &mut Partition) -> Result<()> {
        let u = part.stage();
        let g = self.targets(u)?;
        for (j, &c) in self.classes.iter().enumerate() {
            top_up(part, c, g[j])?;
        }
        let even = part.take(0)?;
        if u > 0 && self.t.holds(&[u]) {
            let i = self.test;
            let c = self.classes[i];
            part.add(c, even)?;
            if part.size(c) > g[u as usize] {
                return Err(Error::Invariant(format!("test class exceeds g({u}, {u})")));
            }
            top_up(part, c, g[u as usize])?;
            let fresh = part.new_class_fresh(1)?;
            top_up(part, fresh, g[i])?;
            self.classes[i] = fresh;
            self.classes.push(c);
            self.test = u as usize;
            self.migrations += 1;
            part.log("migrate", json!({ "from": i, "to": u }));
        } else {
            let c = part.new_class(even)?;
            top_up(part, c, g[u as usize])?;
            self.classes.push(c);
        }
        Ok(())
    }

    fn high_water(&self, x: Element) -> Option<Stage> {
        Some(x / 2 + 1)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

pub fn build_test_class(g: SFunctionSpec, t: Predicate) -> Result<StageStructure> {
    Ok(StageStructure::new(Box::new(TestClassProgram::new(g, t)?)))
}
