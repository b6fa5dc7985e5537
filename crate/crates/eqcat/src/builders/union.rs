//! Effective union: several structures laid side by side on disjoint
//! arithmetic progressions of ω.
//!
//! Parts run in lock step with the composite; every partition mutation of a
//! part is replayed on the composite through the part's coder x ↦ mul·x + add,
//! so nothing is copied element by element.

use crate::error::{Error, Result};
use crate::structure::{Element, MirrorLink, PoolSpec, Stage, StageProgram, StageStructure};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::any::Any;

/// Element coders for the parts of a union.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "coder", rename_all = "kebab-case")]
pub enum Coder {
    /// Part 0 on 2x; part c (0 < c < N−1) on 2^{c+1}x + 2^c − 1; the last
    /// part on 2^{N−1}x + 2^{N−1} − 1.  For two parts: evens and odds.
    Default,
    /// Explicit `(mul, add)` per part.
    Affine { maps: Vec<(u64, u64)> },
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Coder {
    pub fn maps(&self, parts: usize) -> Result<Vec<(u64, u64)>> {
        let maps = match self {
            Coder::Default => match parts {
                0 => Vec::new(),
                1 => vec![(1, 0)],
                n => (0..n)
                    .map(|c| {
                        if c == 0 {
                            (2, 0)
                        } else if c + 1 < n {
                            (1u64 << (c + 1), (1u64 << c) - 1)
                        } else {
                            (1u64 << c, (1u64 << c) - 1)
                        }
                    })
                    .collect(),
            },
            Coder::Affine { maps } => {
                if maps.len() != parts {
                    return Err(Error::InvalidSpec(format!("{} coders for {parts} parts", maps.len())));
                }
                maps.clone()
            }
        };
        check_maps(&maps)?;
        Ok(maps)
    }
}

/// Injectivity across parts, and coverage of ω.
fn check_maps(maps: &[(u64, u64)]) -> Result<()> {
    for (i, &(m1, a1)) in maps.iter().enumerate() {
        if m1 == 0 {
            return Err(Error::CoderCollision(format!("part {i} has multiplier 0")));
        }
        for (j, &(m2, a2)) in maps.iter().enumerate().skip(i + 1) {
            let g = gcd(m1, m2);
            if a1 % g == a2 % g {
                let x = (0..m2).map(|y| m1 * y + a1).find(|v| *v >= a2 && (v - a2) % m2 == 0);
                return Err(Error::CoderCollision(format!(
                    "parts {i} and {j} share element {}",
                    x.map_or("(some)".to_string(), |v| v.to_string())
                )));
            }
        }
    }
    // Disjoint progressions cover ω iff every residue mod their lcm is hit
    // and no part starts past its own residue.
    let l = maps.iter().fold(1u64, |l, &(m, _)| l / gcd(l, m) * m);
    if l > 1 << 20 {
        return Err(Error::InvalidSpec("coder moduli too large to check coverage".into()));
    }
    for x in 0..l {
        if !maps.iter().any(|&(m, a)| x % m == a % m) {
            return Err(Error::InvalidSpec(format!("coder leaves element {x} uncovered")));
        }
    }
    if let Some((i, &(m, a))) = maps.iter().enumerate().find(|(_, &(m, a))| a >= m) {
        return Err(Error::InvalidSpec(format!("part {i} (×{m} + {a}) leaves small elements uncovered")));
    }
    Ok(())
}

pub struct UnionProgram {
    parts: Vec<StageStructure>,
    maps: Vec<(u64, u64)>,
    links: Vec<MirrorLink>,
    pools: Vec<PoolSpec>,
}

impl UnionProgram {
    pub fn new(mut parts: Vec<StageStructure>, coder: &Coder) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidSpec("a union needs at least one part".into()));
        }
        let maps = coder.maps(parts.len())?;
        let mut pools = Vec::new();
        let mut links = Vec::new();
        for (p, &(mul, add)) in parts.iter_mut().zip(&maps) {
            if p.built().is_some() {
                return Err(Error::InvalidSpec("union parts must not have been advanced yet".into()));
            }
            p.enable_ops();
            let mut link = MirrorLink::default();
            for spec in p.partition().pool_specs() {
                link.pool_map.push(pools.len());
                pools.push(spec.image(mul, add));
            }
            links.push(link);
        }
        Ok(UnionProgram { parts, maps, links, pools })
    }

    pub fn parts(&self) -> &[StageStructure] {
        &self.parts
    }

    pub fn part_mut(&mut self, c: usize) -> &mut StageStructure {
        &mut self.parts[c]
    }

    /// Composite element of part `c`'s element `x`.
    pub fn encode(&self, c: usize, x: Element) -> Element {
        let (m, a) = self.maps[c];
        m * x + a
    }

    /// Part and part element of a composite element.
    pub fn decode(&self, x: Element) -> Option<(usize, Element)> {
        self.maps.iter().enumerate().find_map(|(c, &(m, a))| (x >= a && (x - a) % m == 0).then(|| (c, (x - a) / m)))
    }
}

impl StageProgram for UnionProgram {
    fn name(&self) -> &'static str {
        "union"
    }

    fn pools(&self) -> Vec<PoolSpec> {
        self.pools.clone()
    }

    fn step(&mut self, part: &mut crate::structure::Partition) -> Result<()> {
        let s = part.stage();
        for (c, p) in self.parts.iter_mut().enumerate() {
            p.advance_to(s)?;
            let tag = json!(c);
            for op in p.take_ops() {
                part.mirror(&op, &mut self.links[c], &tag)?;
            }
        }
        Ok(())
    }

    fn high_water(&self, x: Element) -> Option<Stage> {
        let (c, y) = self.decode(x)?;
        self.parts[c].program().high_water(y)
    }

    fn fin_decider(&self, x: Element) -> Option<bool> {
        let (c, y) = self.decode(x)?;
        self.parts[c].program().fin_decider(y)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// The union of `parts` under `coder`.
pub fn effective_union(parts: Vec<StageStructure>, coder: &Coder) -> Result<StageStructure> {
    Ok(StageStructure::new(Box::new(UnionProgram::new(parts, coder)?)))
}
