//! Class sizes following an s-function: [a_i] has f(i, s) elements at stage
//! s, plus r infinite classes.
//!
//! All elements come from one pool in increasing order, so the universe is
//! all of ω even when every limit is 1.  The representative a_i is the least
//! unused element at stage i.

use super::sfunc::{MonotoneReader, SFunctionSpec};
use crate::error::Result;
use crate::structure::{ClassId, Element, GroupId, Partition, PoolSpec, Size, Stage, StageProgram, StageStructure};
use std::any::Any;

pub struct FromSProgram {
    f: MonotoneReader,
    r: Size,
    reps: Vec<ClassId>,
    growth: Option<GroupId>,
    infinite: Vec<ClassId>,
}

impl FromSProgram {
    pub fn new(f: SFunctionSpec, r: Size) -> Self {
        FromSProgram { f: MonotoneReader::new(f), r, reps: Vec::new(), growth: None, infinite: Vec::new() }
    }

    /// Class of a_i, once opened.
    pub fn class_of_index(&self, i: usize) -> Option<ClassId> {
        self.reps.get(i).copied()
    }

    pub fn infinite_classes(&self) -> &[ClassId] {
        &self.infinite
    }

    fn open_infinite(&mut self, part: &mut Partition, g: GroupId) -> Result<()> {
        let c = part.new_class_fresh(0)?;
        part.declare_infinite(c);
        part.join_group(g, c)?;
        self.infinite.push(c);
        Ok(())
    }
}

impl StageProgram for FromSProgram {
    fn name(&self) -> &'static str {
        "from-s"
    }

    fn pools(&self) -> Vec<PoolSpec> {
        vec![PoolSpec::all()]
    }

    fn step(&mut self, part: &mut Partition) -> Result<()> {
        let s = part.stage();
        let g = match self.growth {
            Some(g) => g,
            None => *self.growth.insert(part.new_group(0)),
        };
        part.grow_group(g)?;
        for (i, &c) in self.reps.iter().enumerate() {
            let want = self.f.read(i as u64, s)?.max(1);
            let have = part.size(c);
            part.add_fresh(c, 0, want.saturating_sub(have))?;
        }
        let c = part.new_class_fresh(0)?;
        let want = self.f.read(s, s)?.max(1);
        part.add_fresh(c, 0, want - 1)?;
        self.reps.push(c);
        match self.r {
            Size::Finite(r) if s == 0 => {
                for _ in 0..r {
                    self.open_infinite(part, g)?;
                }
            }
            Size::Omega if s % 2 == 0 => self.open_infinite(part, g)?,
            _ => {}
        }
        Ok(())
    }

    fn high_water(&self, x: Element) -> Option<Stage> {
        Some(x)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

pub fn build_from_s(f: SFunctionSpec, r: Size) -> Result<StageStructure> {
    Ok(StageStructure::new(Box::new(FromSProgram::new(f, r))))
}
