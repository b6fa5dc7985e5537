//! Brute-force ground truth on finite truncations.

use crate::error::{Error, Result};
use crate::structure::{CharacterApprox, Element, Stage, StageStructure};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Default limit on the number of blocks for [`brute_iso_search`].
pub const ISO_SEARCH_BLOCK_LIMIT: usize = 12;

/// A partition of {0, …, n} (or of ∅) into nonempty blocks, each sorted,
/// ordered by least element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinitePartition {
    blocks: Vec<Vec<Element>>,
}

impl FinitePartition {
    pub fn new(blocks: Vec<Vec<Element>>) -> Result<Self> {
        let mut blocks: Vec<Vec<Element>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        if blocks.iter().any(Vec::is_empty) {
            return Err(Error::InvalidSpec("empty block".into()));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        let mut all: Vec<Element> = blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.iter().enumerate().any(|(i, &x)| x != i as Element) {
            return Err(Error::InvalidSpec("blocks must be disjoint and cover 0..=n".into()));
        }
        Ok(FinitePartition { blocks })
    }

    pub fn blocks(&self) -> &[Vec<Element>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Number of elements.
    pub fn universe(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Index of the block holding `x`.
    pub fn block_of(&self, x: Element) -> Option<usize> {
        self.blocks.iter().position(|b| b.binary_search(&x).is_ok())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

/// The partition induced on {0, …, n} at `stage`.
pub fn truncate(st: &mut StageStructure, n: Element, stage: Stage) -> Result<FinitePartition> {
    st.advance_to(stage)?;
    let part = st.partition();
    let mut by_class: BTreeMap<u32, Vec<Element>> = BTreeMap::new();
    for x in 0..=n {
        let c = part.class_of_at(x, stage).ok_or(Error::Unplaced(x))?;
        by_class.entry(c).or_default().push(x);
    }
    FinitePartition::new(by_class.into_values().collect())
}

/// Exact (size, count) pairs of a finite partition.
pub fn brute_character(p: &FinitePartition) -> CharacterApprox {
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for b in p.blocks() {
        *counts.entry(b.len() as u64).or_default() += 1;
    }
    CharacterApprox::from_counts(0, &counts)
}

/// [`brute_iso_search_with_limit`] with the default block limit.
pub fn brute_iso_search(
    p: &FinitePartition,
    q: &FinitePartition,
    seed: &BTreeMap<Element, Element>,
) -> Result<Option<BTreeMap<Element, Element>>> {
    brute_iso_search_with_limit(p, q, seed, ISO_SEARCH_BLOCK_LIMIT)
}

/// Backtracking search for an isomorphism P → Q extending `seed`: blocks are
/// assigned in order to unused blocks of equal size whose elements can
/// honour the seed, and each block pair is then mapped with seed pairs fixed
/// and the remaining elements in increasing order.
pub fn brute_iso_search_with_limit(
    p: &FinitePartition,
    q: &FinitePartition,
    seed: &BTreeMap<Element, Element>,
    limit: usize,
) -> Result<Option<BTreeMap<Element, Element>>> {
    if p.len() > limit || q.len() > limit {
        return Err(Error::InvalidSpec(format!(
            "{} and {} blocks exceed the search limit of {limit}",
            p.len(),
            q.len()
        )));
    }
    let (mut ps, mut qs) = (p.sizes(), q.sizes());
    ps.sort_unstable();
    qs.sort_unstable();
    if ps != qs {
        return Ok(None);
    }
    // Seed pairs grouped by P-block; None if the seed leaves the universes
    // or is not injective.
    let mut pinned: Vec<Vec<(Element, Element)>> = vec![Vec::new(); p.len()];
    let mut targets = BTreeSet::new();
    for (&x, &y) in seed {
        let (Some(i), Some(_)) = (p.block_of(x), q.block_of(y)) else {
            return Ok(None);
        };
        if !targets.insert(y) {
            return Ok(None);
        }
        pinned[i].push((x, y));
    }
    let fits = |i: usize, j: usize| {
        q.blocks[j].len() == p.blocks[i].len() && pinned[i].iter().all(|&(_, y)| q.blocks[j].binary_search(&y).is_ok())
    };
    // Pinned blocks first: their candidates are forced, so a conflict is
    // found before any free block is permuted.
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by_key(|&i| pinned[i].is_empty());
    let mut assign = vec![usize::MAX; p.len()];
    let mut used = vec![false; q.len()];
    fn go(k: usize, order: &[usize], assign: &mut [usize], used: &mut [bool], fits: &dyn Fn(usize, usize) -> bool) -> bool {
        let Some(&i) = order.get(k) else {
            return true;
        };
        for j in 0..used.len() {
            if !used[j] && fits(i, j) {
                used[j] = true;
                assign[i] = j;
                if go(k + 1, order, assign, used, fits) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    if !go(0, &order, &mut assign, &mut used, &fits) {
        return Ok(None);
    }
    let mut out = BTreeMap::new();
    for (i, &j) in assign.iter().enumerate() {
        let fixed: BTreeMap<Element, Element> = pinned[i].iter().copied().collect();
        let taken: BTreeSet<Element> = fixed.values().copied().collect();
        let mut free = q.blocks[j].iter().copied().filter(|y| !taken.contains(y));
        for &x in &p.blocks[i] {
            let y = match fixed.get(&x) {
                Some(&y) => y,
                None => free.next().expect("equal sizes"),
            };
            out.insert(x, y);
        }
    }
    Ok(Some(out))
}
