//! Frozen finite-shape structures: explicit blocks followed by a periodic
//! tail.  Element x is placed at stage x.

use crate::error::{Error, Result};
use crate::structure::{ClassId, Element, Partition, PoolSpec, Stage, StageProgram, StageStructure};
use std::any::Any;

pub struct ExplicitProgram {
    /// Class index of each element below `head`.
    owner: Vec<usize>,
    head: u64,
    /// Block sizes repeated forever after the head.
    tail: Vec<u64>,
    head_ids: Vec<Option<ClassId>>,
    tail_pos: usize,
    tail_left: u64,
    tail_class: Option<ClassId>,
}

impl ExplicitProgram {
    /// `blocks` must partition `0..N` for some N; `tail` (nonempty, sizes
    /// ≥ 1) then cuts the rest of ω into consecutive runs.
    pub fn new(blocks: &[Vec<Element>], tail: &[u64]) -> Result<Self> {
        if tail.is_empty() || tail.contains(&0) {
            return Err(Error::InvalidSpec("tail pattern needs positive sizes".into()));
        }
        let head: u64 = blocks.iter().map(|b| b.len() as u64).sum();
        let mut owner = vec![usize::MAX; head as usize];
        for (i, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(Error::InvalidSpec("empty block".into()));
            }
            for &x in b {
                let slot = owner
                    .get_mut(x as usize)
                    .ok_or_else(|| Error::InvalidSpec(format!("blocks do not cover 0..{head} (element {x})")))?;
                if *slot != usize::MAX {
                    return Err(Error::InvalidSpec(format!("element {x} in two blocks")));
                }
                *slot = i;
            }
        }
        Ok(ExplicitProgram {
            owner,
            head,
            tail: tail.to_vec(),
            head_ids: vec![None; blocks.len()],
            tail_pos: 0,
            tail_left: 0,
            tail_class: None,
        })
    }
}

impl StageProgram for ExplicitProgram {
    fn name(&self) -> &'static str {
        "explicit"
    }

    fn pools(&self) -> Vec<PoolSpec> {
        vec![PoolSpec::all()]
    }

    fn step(&mut self, part: &mut Partition) -> Result<()> {
        let x = part.take(0)?;
        if x < self.head {
            let b = self.owner[x as usize];
            match self.head_ids[b] {
                Some(c) => part.add(c, x)?,
                None => self.head_ids[b] = Some(part.new_class(x)?),
            }
            return Ok(());
        }
        match self.tail_class {
            Some(c) if self.tail_left > 0 => part.add(c, x)?,
            _ => {
                self.tail_left = self.tail[self.tail_pos % self.tail.len()];
                self.tail_pos += 1;
                self.tail_class = Some(part.new_class(x)?);
            }
        }
        self.tail_left -= 1;
        Ok(())
    }

    fn high_water(&self, x: Element) -> Option<Stage> {
        Some(x)
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

/// Every class a singleton.
pub fn identity_structure() -> StageStructure {
    periodic_structure(&[1]).expect("valid pattern")
}

/// Explicit blocks covering `0..N`, singletons afterwards.
pub fn explicit_structure(blocks: &[Vec<Element>]) -> Result<StageStructure> {
    Ok(StageStructure::new(Box::new(ExplicitProgram::new(blocks, &[1])?)))
}

/// Consecutive runs with sizes cycling through `pattern`.
pub fn periodic_structure(pattern: &[u64]) -> Result<StageStructure> {
    Ok(StageStructure::new(Box::new(ExplicitProgram::new(&[], pattern)?)))
}
