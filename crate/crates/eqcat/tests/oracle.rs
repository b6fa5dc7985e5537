mod common;

use common::{catalog, is_extension, perm_oracle};
use eqcat::builders::{explicit_structure, identity_structure};
use eqcat::oracle::{brute_character, brute_iso_search, brute_iso_search_with_limit, truncate, FinitePartition};
use eqcat::{Element, Error, StageStructure};
use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

fn part(blocks: &[&[Element]]) -> FinitePartition {
    FinitePartition::new(blocks.iter().map(|b| b.to_vec()).collect()).unwrap()
}

fn pairs(v: &[(u64, u64)]) -> BTreeSet<(u64, u64)> {
    v.iter().copied().collect()
}

/// Largest n with every element ≤ n placed by stage s.
fn placed_prefix(st: &StageStructure, s: u64) -> Option<Element> {
    let p = st.partition();
    (0..).take_while(|&x| p.class_of_at(x, s).is_some()).last()
}

#[test]
fn truncate_identity() {
    let got = truncate(&mut identity_structure(), 3, 3).unwrap();
    assert_eq!(got.blocks(), &[vec![0], vec![1], vec![2], vec![3]]);
}

#[test]
fn truncate_explicit_blocks() {
    let mut st = explicit_structure(&[vec![0, 1], vec![2], vec![3, 4, 5]]).unwrap();
    let got = truncate(&mut st, 5, 5).unwrap();
    assert_eq!(got.len(), 3);
    assert_eq!(got.blocks(), &[vec![0, 1], vec![2], vec![3, 4, 5]]);
}

#[test]
fn truncate_beyond_placement() {
    let err = truncate(&mut identity_structure(), 10, 3).unwrap_err();
    assert!(matches!(err, Error::Unplaced(4)), "{err:?}");
}

#[test]
fn finite_partition_rejects_bad_blocks() {
    assert!(FinitePartition::new(vec![vec![0], vec![0, 1]]).is_err());
    assert!(FinitePartition::new(vec![vec![0], vec![2]]).is_err());
    assert!(FinitePartition::new(vec![vec![]]).is_err());
    assert!(FinitePartition::new(vec![]).unwrap().is_empty());
}

#[test]
fn brute_character_examples() {
    assert_eq!(brute_character(&part(&[&[0], &[1]])).pairs, pairs(&[(1, 1), (1, 2)]));
    assert_eq!(brute_character(&part(&[&[0, 1, 2]])).pairs, pairs(&[(3, 1)]));
    assert!(brute_character(&part(&[])).pairs.is_empty());
}

#[test]
fn brute_iso_search_examples() {
    let none = BTreeMap::new();
    let p = part(&[&[0], &[1]]);
    let h = brute_iso_search(&p, &p, &none).unwrap().unwrap();
    assert!(is_extension(&p, &p, &none, &h));

    assert_eq!(brute_iso_search(&part(&[&[0, 1]]), &part(&[&[0], &[1]]), &none).unwrap(), None);

    let p = part(&[&[0], &[1, 2], &[3, 4, 5]]);
    let q = part(&[&[0, 1, 2], &[3], &[4, 5]]);
    let seed: BTreeMap<_, _> = [(4, 1)].into();
    let h = brute_iso_search(&p, &q, &seed).unwrap().unwrap();
    assert_eq!(h[&4], 1);
    assert!(is_extension(&p, &q, &seed, &h));

    // A seed that crosses block sizes cannot be extended.
    let bad: BTreeMap<_, _> = [(0, 0)].into();
    assert_eq!(brute_iso_search(&p, &q, &bad).unwrap(), None);
}

#[test]
fn brute_iso_search_block_limit() {
    let p = FinitePartition::new((0..13).map(|x| vec![x]).collect()).unwrap();
    let none = BTreeMap::new();
    assert!(brute_iso_search(&p, &p, &none).is_err());
    assert!(brute_iso_search_with_limit(&p, &p, &none, 13).unwrap().is_some());
}

/// Character of the classes lying wholly inside the truncation and not
/// declared infinite, recomputed by brute force on a relabelled partition.
#[test]
fn brute_character_matches_staged_character() {
    for (name, cfg) in catalog() {
        let mut st = cfg.build().unwrap();
        for s in [0u64, 7, 30, 120] {
            st.advance_to(s).unwrap();
            let Some(n) = placed_prefix(&st, s) else { continue };
            let n = n.min(400);
            let tr = truncate(&mut st, n, s).unwrap();
            let p = st.partition();
            let whole: Vec<&Vec<Element>> = tr
                .blocks()
                .iter()
                .filter(|b| {
                    let c = p.class_of_at(b[0], s).unwrap();
                    !p.is_infinite_at(c, s) && p.size_at(c, s) == b.len() as u64
                })
                .collect();
            let mut next = 0;
            let relabelled: Vec<Vec<Element>> = whole
                .iter()
                .map(|b| {
                    let r: Vec<Element> = (next..next + b.len() as u64).collect();
                    next += b.len() as u64;
                    r
                })
                .collect();
            let brute = brute_character(&FinitePartition::new(relabelled).unwrap());

            let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
            for c in 0..p.class_count_at(s) as u32 {
                if p.is_infinite_at(c, s) {
                    continue;
                }
                let members = p.members_at(c, s);
                if members.iter().all(|&x| x <= n) {
                    *counts.entry(members.len() as u64).or_default() += 1;
                }
            }
            let staged = eqcat::CharacterApprox::from_counts(s, &counts);
            assert_eq!(brute.pairs, staged.pairs, "{name} at stage {s}");
            // And the restriction never exceeds the full staged character.
            let full = st.character_at_stage(s).unwrap();
            assert!(brute.pairs.is_subset(&full.pairs), "{name} at stage {s}");
        }
    }
}

fn partition_strategy() -> impl Strategy<Value = FinitePartition> {
    // Up to 6 blocks of size 1..=3, elements shuffled into them.
    prop::collection::vec(1usize..=3, 0..=6).prop_flat_map(|sizes| {
        let n: usize = sizes.iter().sum();
        (Just(sizes), Just((0..n as u64).collect::<Vec<_>>()).prop_shuffle())
    })
    .prop_map(|(sizes, elems)| {
        let mut it = elems.into_iter();
        FinitePartition::new(sizes.iter().map(|&k| it.by_ref().take(k).collect()).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn search_agrees_with_permutation_oracle(
        p in partition_strategy(),
        q in partition_strategy(),
        raw_seed in prop::collection::vec((0u64..18, 0u64..18), 0..3),
    ) {
        let seed: BTreeMap<u64, u64> = raw_seed.into_iter().collect();
        let got = brute_iso_search(&p, &q, &seed).unwrap();
        prop_assert_eq!(got.is_some(), perm_oracle(&p, &q, &seed));
        if let Some(h) = got {
            prop_assert!(is_extension(&p, &q, &seed, &h));
        }
    }

    #[test]
    fn self_search_extends_any_consistent_seed(p in partition_strategy(), pick in 0usize..20) {
        let n = p.universe();
        let seed: BTreeMap<u64, u64> = if n == 0 { BTreeMap::new() } else {
            let x = (pick % n) as u64;
            [(x, x)].into()
        };
        let h = brute_iso_search(&p, &p, &seed).unwrap().unwrap();
        prop_assert!(is_extension(&p, &p, &seed, &h));
    }

    #[test]
    fn brute_character_is_size_multiset(p in partition_strategy()) {
        let c = brute_character(&p);
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for k in p.sizes() {
            *counts.entry(k as u64).or_default() += 1;
        }
        for (&k, &m) in &counts {
            prop_assert_eq!(c.count_of(k), m);
        }
        prop_assert_eq!(c.pairs.len() as u64, counts.values().sum::<u64>());
    }
}
