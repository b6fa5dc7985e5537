//! Bounded characters with exactly r infinite classes and a decidable
//! Fin-set.

use crate::error::{Error, Result};
use crate::structure::{ClassId, Element, GroupId, Partition, PoolSpec, Size, Stage, StageProgram, StageStructure};
use serde::{Deserialize, Serialize};
use std::any::Any;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundedCharSpec {
    /// Sizes realized by infinitely many classes.
    pub repeat_sizes: Vec<u64>,
    /// `(size, count)`: exactly `count` further classes of `size`.
    pub fixed_sizes: Vec<(u64, u64)>,
    /// Number of infinite classes.
    pub r: Size,
}

impl BoundedCharSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repeat_sizes.contains(&0) || self.fixed_sizes.iter().any(|&(k, n)| k == 0 || n == 0) {
            return Err(Error::InvalidSpec("class sizes and counts start at 1".into()));
        }
        if self.repeat_sizes.is_empty() && self.r == Size::Finite(0) {
            return Err(Error::InvalidSpec("a structure on ω needs a repeated size or an infinite class".into()));
        }
        Ok(())
    }

    /// Largest finite class size.
    pub fn bound(&self) -> u64 {
        let a = self.repeat_sizes.iter().copied().max().unwrap_or(0);
        let b = self.fixed_sizes.iter().map(|p| p.0).max().unwrap_or(0);
        a.max(b)
    }

    /// Number of fixed elements, Σ size·count.
    fn fixed_total(&self) -> u64 {
        self.fixed_sizes.iter().map(|&(k, n)| k * n).sum()
    }

    /// Does the character have infinitely many classes of size `k`?
    pub fn repeats(&self, k: u64) -> bool {
        self.repeat_sizes.contains(&k)
    }

    /// Number of fixed classes of size `k`.
    pub fn fixed_count(&self, k: u64) -> u64 {
        self.fixed_sizes.iter().filter(|p| p.0 == k).map(|p| p.1).sum()
    }
}

pub struct BoundedProgram {
    spec: BoundedCharSpec,
    repeat: Vec<u64>,
    pools: Vec<PoolSpec>,
    growth: Option<GroupId>,
    infinite: Vec<ClassId>,
}

const FIN: usize = 0;
const INF: usize = 1;

impl BoundedProgram {
    pub fn new(spec: BoundedCharSpec) -> Result<Self> {
        spec.validate()?;
        let mut repeat = spec.repeat_sizes.clone();
        repeat.sort_unstable();
        repeat.dedup();
        let pools = if spec.r == Size::Finite(0) {
            vec![PoolSpec::all()]
        } else if repeat.is_empty() {
            let f = spec.fixed_total();
            vec![PoolSpec::range(0, f), PoolSpec::from(f)]
        } else {
            vec![PoolSpec::residue(2, 0), PoolSpec::residue(2, 1)]
        };
        Ok(BoundedProgram { spec, repeat, pools, growth: None, infinite: Vec::new() })
    }

    pub fn spec(&self) -> &BoundedCharSpec {
        &self.spec
    }

    pub fn infinite_classes(&self) -> &[ClassId] {
        &self.infinite
    }

    fn open_infinite(&mut self, part: &mut Partition, g: GroupId) -> Result<()> {
        let c = part.new_class_fresh(INF)?;
        part.declare_infinite(c);
        part.join_group(g, c)?;
        self.infinite.push(c);
        Ok(())
    }
}

impl StageProgram for BoundedProgram {
    fn name(&self) -> &'static str {
        "bounded"
    }

    fn pools(&self) -> Vec<PoolSpec> {
        self.pools.clone()
    }

    fn step(&mut self, part: &mut Partition) -> Result<()> {
        let s = part.stage();
        let g = match self.growth {
            Some(g) => g,
            None if self.pools.len() > 1 => *self.growth.insert(part.new_group(INF)),
            None => {
                // r = 0: everything lives in the single finite pool.
                self.growth = Some(GroupId::MAX);
                GroupId::MAX
            }
        };
        if g != GroupId::MAX {
            part.grow_group(g)?;
        }
        if s == 0 {
            for &(k, n) in &self.spec.fixed_sizes {
                for _ in 0..n {
                    let c = part.new_class_fresh(FIN)?;
                    part.add_fresh(c, FIN, k - 1)?;
                }
            }
            if let Size::Finite(r) = self.spec.r {
                for _ in 0..r {
                    self.open_infinite(part, g)?;
                }
            }
        }
        if !self.repeat.is_empty() {
            let k = self.repeat[(s % self.repeat.len() as u64) as usize];
            let c = part.new_class_fresh(FIN)?;
            part.add_fresh(c, FIN, k - 1)?;
        }
        if self.spec.r == Size::Omega && s % 2 == 0 {
            self.open_infinite(part, g)?;
        }
        Ok(())
    }

    fn high_water(&self, x: Element) -> Option<Stage> {
        self.pools.iter().find_map(|p| p.local(x))
    }

    fn fin_decider(&self, x: Element) -> Option<bool> {
        Some(self.pools[FIN].local(x).is_some())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

pub fn build_bounded(spec: BoundedCharSpec) -> Result<StageStructure> {
    Ok(StageStructure::new(Box::new(BoundedProgram::new(spec)?)))
}
