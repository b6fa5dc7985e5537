//! Shared fixtures: a catalog of builder configs covering every builder.
#![allow(dead_code)]

use eqcat::builders::{opponent_family, BoundedCharSpec, Coder, PairBase, SFunctionSpec, SKind, SetSpec};
use eqcat::config::{BuilderConfig, DiagSide, PairSide};
use eqcat::predicates::{Builtin, FiniteSupportTable, TableRow};
use eqcat::{Predicate, Size};

pub fn r4(src: &str) -> Predicate {
    Predicate::r4(src).unwrap()
}

pub fn s(src: &str) -> SFunctionSpec {
    SFunctionSpec::dsl(src, SKind::S).unwrap()
}

pub fn s1(src: &str) -> SFunctionSpec {
    SFunctionSpec::dsl(src, SKind::S1).unwrap()
}

pub fn t(src: &str) -> Predicate {
    Predicate::dsl(src, &["t"]).unwrap()
}

pub fn row(k: u64, n: u64, witness: Option<u64>, refute_at: u64) -> TableRow {
    TableRow { k, n, witness, refute_at }
}

pub fn table(rows: Vec<TableRow>) -> Predicate {
    Predicate::builtin(4, Builtin::Table(FiniteSupportTable::new(rows).unwrap())).unwrap()
}

pub fn bounded(repeat: &[u64], fixed: &[(u64, u64)], r: Size) -> BuilderConfig {
    BuilderConfig::Bounded(BoundedCharSpec { repeat_sizes: repeat.to_vec(), fixed_sizes: fixed.to_vec(), r })
}

pub fn odd_m() -> SetSpec {
    SetSpec::Residue { modulus: 2, residue: 1, delay: 0 }
}

pub fn pair(side: PairSide) -> BuilderConfig {
    BuilderConfig::Pair {
        base: PairBase::Bounded {
            spec: BoundedCharSpec { repeat_sizes: vec![1, 3], fixed_sizes: vec![], r: Size::Finite(0) },
        },
        k1: 1,
        k2: Size::Finite(3),
        m: odd_m(),
        side,
    }
}

pub fn diag(side: DiagSide) -> BuilderConfig {
    BuilderConfig::Diag { f: s1("2 * i + 1"), r: r4("w == 0 and n == 1"), opponents: opponent_family(), side }
}

/// One or more configs per builder.
pub fn catalog() -> Vec<(&'static str, BuilderConfig)> {
    vec![
        ("identity", BuilderConfig::Identity),
        ("periodic-123", BuilderConfig::Periodic { pattern: vec![1, 2, 3] }),
        ("explicit", BuilderConfig::Explicit { blocks: vec![vec![0, 1], vec![2], vec![3, 4, 5]], tail: vec![1] }),
        ("sigma2-one-each", BuilderConfig::Sigma2Inf { r: r4("w == 0 and n == 1") }),
        (
            "sigma2-table",
            BuilderConfig::Sigma2Inf { r: table(vec![row(2, 1, Some(1), 3), row(2, 2, None, 4), row(3, 1, Some(0), 2)]) },
        ),
        ("bounded-2-fixed-3x2-r1", bounded(&[2], &[(3, 2)], Size::Finite(1))),
        ("bounded-12-omega", bounded(&[1, 2], &[], Size::Omega)),
        ("from-s-odd", BuilderConfig::FromS { f: s("2 * i + 1"), r: Size::Finite(0) }),
        ("from-s-ramp-r2", BuilderConfig::FromS { f: s("min(s + 1, i + 1)"), r: Size::Finite(2) }),
        ("from-s1-odd", BuilderConfig::FromS1 { f: s1("2 * i + 1"), r: r4("w == 0 and (k mod 2) == 1 and n == 1") }),
        ("from-s1-late-refute", BuilderConfig::FromS1 { f: s1("2 * i + 1"), r: r4("n == 1 or z < 50") }),
        ("test-class-false", BuilderConfig::TestClass { g: s("2 * i + 1"), t: t("false") }),
        ("test-class-t4", BuilderConfig::TestClass { g: s("2 * i + 1"), t: t("t == 4") }),
        (
            "union-identity-explicit",
            BuilderConfig::Union {
                parts: vec![
                    BuilderConfig::Explicit { blocks: vec![vec![0, 1]], tail: vec![1] },
                    BuilderConfig::Identity,
                ],
                coder: Coder::Default,
            },
        ),
        ("pair-c", pair(PairSide::C)),
        ("pair-d", pair(PairSide::D)),
        ("diag-b1", diag(DiagSide::B1)),
        ("diag-b2", diag(DiagSide::B2)),
    ]
}

/// Independent check for `brute_iso_search`: enumerate every permutation of
/// block indices and accept one that preserves sizes and agrees with the
/// seed.  Shares no code with the library search.
pub fn perm_oracle(
    p: &eqcat::oracle::FinitePartition,
    q: &eqcat::oracle::FinitePartition,
    seed: &std::collections::BTreeMap<u64, u64>,
) -> bool {
    let pb = p.blocks();
    let qb = q.blocks();
    if pb.len() != qb.len() {
        return false;
    }
    let find = |bs: &[Vec<u64>], x: u64| bs.iter().position(|b| b.contains(&x));
    let mut seen = std::collections::BTreeSet::new();
    let mut pinned = Vec::new();
    for (&x, &y) in seed {
        match (find(pb, x), find(qb, y)) {
            (Some(i), Some(j)) if seen.insert(y) => pinned.push((i, j)),
            _ => return false,
        }
    }
    let mut perm: Vec<usize> = (0..pb.len()).collect();
    loop {
        let ok = (0..pb.len()).all(|i| pb[i].len() == qb[perm[i]].len())
            && pinned.iter().all(|&(i, j)| perm[i] == j);
        if ok {
            return true;
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// True if `h` is a bijection P → Q carrying blocks onto blocks and
/// extending `seed`.
pub fn is_extension(
    p: &eqcat::oracle::FinitePartition,
    q: &eqcat::oracle::FinitePartition,
    seed: &std::collections::BTreeMap<u64, u64>,
    h: &std::collections::BTreeMap<u64, u64>,
) -> bool {
    let n = p.universe();
    if h.len() != n || q.universe() != n || seed.iter().any(|(x, y)| h.get(x) != Some(y)) {
        return false;
    }
    let image: std::collections::BTreeSet<u64> = h.values().copied().collect();
    if image.len() != n || image.iter().any(|&y| q.block_of(y).is_none()) {
        return false;
    }
    p.blocks().iter().all(|b| {
        let j = q.block_of(h[&b[0]]);
        q.blocks()[j.unwrap()].len() == b.len() && b.iter().all(|x| q.block_of(h[x]) == j)
    })
}
