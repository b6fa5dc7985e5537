//! The set B of quadruples (k, n, w, z) behind every Σ⁰₂ construction.
//!
//! (k, n, w, z) ∈ B when, looking only below z, w is the least surviving
//! witness for (k, n) and z is the first point at which every smaller
//! candidate has failed.  Concretely: w = 0 pairs with z = 0, and for w > 0
//! every v < w has a first failure below z, the latest of them is z − 1, and
//! w itself survives below z.

use crate::error::Result;
use crate::predicates::Predicate;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BQuadruple {
    pub k: u64,
    pub n: u64,
    pub w: u64,
    pub z: u64,
}

/// Brute-force membership test by direct enumeration of the quantifiers:
///
/// 1. (∀y<z) R(k,n,w,y)
/// 2. (∀v<w)(∃y<z) ¬R(k,n,v,y)
/// 3. (∀y<z)(∃v<w)(∀y'<y) R(k,n,v,y')
pub fn b_set_member(r: &Predicate, k: u64, n: u64, w: u64, z: u64) -> Result<bool> {
    r.require_arity(4)?;
    let rr = |v: u64, y: u64| r.holds(&[k, n, v, y]);
    let c1 = (0..z).all(|y| rr(w, y));
    let c2 = (0..w).all(|v| (0..z).any(|y| !rr(v, y)));
    let c3 = (0..z).all(|y| (0..w).any(|v| (0..y).all(|y2| rr(v, y2))));
    Ok(c1 && c2 && c3)
}

#[derive(Clone, Copy, Debug, Default)]
struct FirstFail {
    checked: u64,
    fail: Option<u64>,
}

/// Lazily enumerates B in order of coordinate sum k+n+w+z, then
/// lexicographically.
#[derive(Clone, Debug)]
pub struct BEnumerator {
    r: Predicate,
    sum: u64,
    buffer: VecDeque<BQuadruple>,
    ff: HashMap<(u64, u64, u64), FirstFail>,
}

impl BEnumerator {
    pub fn new(r: Predicate) -> Result<Self> {
        r.require_arity(4)?;
        Ok(BEnumerator { r, sum: 1, buffer: VecDeque::new(), ff: HashMap::new() })
    }

    /// First y < cap with ¬R(k,n,v,y), if any.
    fn first_fail(&mut self, k: u64, n: u64, v: u64, cap: u64) -> Option<u64> {
        let e = self.ff.entry((k, n, v)).or_default();
        while e.fail.is_none() && e.checked < cap {
            if !self.r.holds(&[k, n, v, e.checked]) {
                e.fail = Some(e.checked);
            } else {
                e.checked += 1;
            }
        }
        e.fail.filter(|&y| y < cap)
    }

    fn fill(&mut self) {
        self.sum += 1;
        let s = self.sum;
        for k in 1..s {
            for n in 1..s - k + 1 {
                let zmax = s - k - n;
                // w = 0 pairs only with z = 0.
                if zmax == 0 {
                    self.buffer.push_back(BQuadruple { k, n, w: 0, z: 0 });
                    continue;
                }
                // w ≥ 1, z = zmax - w ≥ 1.
                let mut max_ff = 0u64;
                for w in 1..zmax {
                    let z = zmax - w;
                    match self.first_fail(k, n, w - 1, zmax) {
                        Some(y) => max_ff = max_ff.max(y),
                        None => break,
                    }
                    if max_ff + 1 > z {
                        break;
                    }
                    if max_ff + 1 == z && self.first_fail(k, n, w, z).is_none() {
                        self.buffer.push_back(BQuadruple { k, n, w, z });
                    }
                }
            }
        }
    }
}

impl Iterator for BEnumerator {
    type Item = BQuadruple;
    fn next(&mut self) -> Option<BQuadruple> {
        while self.buffer.is_empty() {
            self.fill();
        }
        self.buffer.pop_front()
    }
}

/// Incremental "active" test for a quadruple: R(k,n,w,z) for every z
/// checked so far.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Watch {
    pub q: BQuadruple,
    /// All z < `checked` satisfy R.
    pub checked: u64,
    pub refuted_at: Option<u64>,
}

impl Watch {
    pub fn new(q: BQuadruple) -> Self {
        Watch { q, checked: 0, refuted_at: None }
    }

    /// Check z ≤ upto; returns true if the quadruple is (still) active.
    pub fn check(&mut self, r: &Predicate, upto: u64) -> bool {
        while self.refuted_at.is_none() && self.checked <= upto {
            if !r.holds(&[self.q.k, self.q.n, self.q.w, self.checked]) {
                self.refuted_at = Some(self.checked);
            } else {
                self.checked += 1;
            }
        }
        self.refuted_at.is_none()
    }
}
