mod common;

use eqcat::builders::{explicit_structure, identity_structure};
use eqcat::structure::{validate_character, validate_character_strict};
use eqcat::{Error, SizeVerdict, StageStructure};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn three_blocks() -> StageStructure {
    explicit_structure(&[vec![0, 1], vec![2], vec![3, 4, 5]]).unwrap()
}

fn set(pairs: &[(u64, u64)]) -> BTreeSet<(u64, u64)> {
    pairs.iter().copied().collect()
}

#[test]
fn related_examples() {
    let mut id = identity_structure();
    assert!(id.related(3, 3).unwrap());
    assert!(!id.related(3, 4).unwrap());
    assert!(three_blocks().related(3, 5).unwrap());
}

#[test]
fn card_at_stage_examples() {
    let mut st = three_blocks();
    assert_eq!(st.card_at_stage(0, 5).unwrap(), 2);
    assert_eq!(st.card_at_stage(3, 3).unwrap(), 1);
    assert!(st.card_at_stage(0, 0).unwrap() <= 1);
}

#[test]
fn size_query_examples() {
    let mut st = explicit_structure(&[vec![0, 1], vec![2]]).unwrap();
    assert!(matches!(st.size_query(0, 1, 5).unwrap(), SizeVerdict::AtMostImpossible { k: 1, .. }));
    let mut st = identity_structure();
    assert_eq!(st.size_query(4, 3, 10).unwrap(), SizeVerdict::ExactlyCurrent { count: 1, budget: 10 });
    assert!(matches!(st.size_query(4, 0, 10), Err(Error::InvalidSpec(_))));
    assert_eq!(st.size_query(40, 1, 10).unwrap(), SizeVerdict::Unknown { budget: 10 });
}

#[test]
fn size_query_on_infinite_class() {
    // Every bounded structure with r = 1 has one declared-infinite class.
    let mut st = common::bounded(&[2], &[], eqcat::Size::Finite(1)).build().unwrap();
    st.advance_to(200).unwrap();
    let part = st.partition();
    let c = (0..part.class_count() as u32).find(|&c| part.infinite_since(c).is_some()).unwrap();
    let rep = part.rep(c);
    let mut b = 0;
    while st.partition().size_at(c, b) < 6 {
        b += 1;
    }
    assert!(matches!(st.size_query(rep, 5, b).unwrap(), SizeVerdict::AtMostImpossible { k: 5, .. }));
}

#[test]
fn character_examples() {
    let mut st = three_blocks();
    assert_eq!(st.character_at_stage(5).unwrap().pairs, set(&[(1, 1), (2, 1), (3, 1)]));
    let mut id = identity_structure();
    assert_eq!(id.character_at_stage(0).unwrap().pairs, set(&[(1, 1)]));
    assert_eq!(id.character_at_stage(1).unwrap().pairs, set(&[(1, 1), (1, 2)]));
}

#[test]
fn validate_character_examples() {
    assert!(validate_character(&set(&[(2, 1), (2, 2)])));
    assert!(!validate_character(&set(&[(2, 2)])));
    assert!(validate_character(&set(&[])));
    assert!(!validate_character_strict(&set(&[(0, 1)])));
}

#[test]
fn snapshot_json_shape() {
    let mut st = three_blocks();
    let v = serde_json::to_value(st.snapshot(2).unwrap()).unwrap();
    assert_eq!(
        v,
        serde_json::json!({"stage": 2, "classes": [
            {"id": 0, "infinite": false, "members": [0, 1]},
            {"id": 1, "infinite": false, "members": [2]}
        ]})
    );
}

#[test]
fn catalog_snapshots_grow_monotonically() {
    let checkpoints = [0, 1, 2, 5, 10, 50, 100, 300, 700, 1200, 2000];
    for (name, cfg) in common::catalog() {
        let mut st = cfg.build().unwrap();
        let mut prev = st.snapshot(0).unwrap();
        for &s in &checkpoints[1..] {
            let next = st.snapshot(s).unwrap();
            assert!(prev.is_restriction_of(&next), "{name}: snapshot {} not a restriction of {s}", prev.stage);
            let placement = next.placement();
            let members: usize = next.classes.iter().map(|c| c.members.len()).sum();
            assert_eq!(placement.len(), members, "{name}: an element sits in two classes");
            prev = next;
        }
    }
}

#[test]
fn catalog_places_every_small_element() {
    for (name, cfg) in common::catalog() {
        let mut st = cfg.build().unwrap();
        st.advance_to(2000).unwrap();
        for x in 0..=500 {
            assert!(st.partition().class_of(x).is_some(), "{name}: {x} unplaced by stage 2000");
        }
    }
}

#[test]
fn catalog_related_is_an_equivalence() {
    for (name, cfg) in common::catalog() {
        let mut st = cfg.build().unwrap();
        let n = 120;
        let class: Vec<u32> = (0..=n).map(|x| st.ensure_placed(x).unwrap()).collect();
        for a in 0..=n as usize {
            assert!(st.related(a as u64, a as u64).unwrap());
            for b in 0..=n as usize {
                let r = st.related(a as u64, b as u64).unwrap();
                assert_eq!(r, st.related(b as u64, a as u64).unwrap(), "{name}: symmetry");
                assert_eq!(r, class[a] == class[b], "{name}: class identity");
            }
        }
    }
}

#[test]
fn catalog_characters_are_downward_closed() {
    for (name, cfg) in common::catalog() {
        let mut st = cfg.build().unwrap();
        for s in [0, 3, 17, 100, 400, 1000] {
            let ch = st.character_at_stage(s).unwrap();
            assert!(validate_character_strict(&ch.pairs), "{name}: stage {s}");
        }
    }
}

#[test]
fn catalog_replay_is_deterministic() {
    for (name, cfg) in common::catalog() {
        let a = serde_json::to_string(&cfg.build().unwrap().snapshot(2000).unwrap()).unwrap();
        let b = serde_json::to_string(&cfg.build().unwrap().snapshot(2000).unwrap()).unwrap();
        assert!(a == b, "{name}: replays differ");
        let ea = serde_json::to_string(cfg.build().unwrap().events()).unwrap();
        assert!(!ea.is_empty());
    }
}

#[test]
fn related_is_stable_over_stages() {
    for (name, cfg) in common::catalog() {
        let mut st = cfg.build().unwrap();
        st.advance_to(60).unwrap();
        let early: Vec<Option<u32>> = (0..60).map(|x| st.partition().class_of_at(x, 60)).collect();
        st.advance_to(1500).unwrap();
        for (x, c) in early.iter().enumerate() {
            if let Some(c) = c {
                assert_eq!(st.partition().class_of(x as u64), Some(*c), "{name}: {x} moved");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn card_at_stage_is_nondecreasing(pattern in prop::collection::vec(1u64..5, 1..5), a in 0u64..40, s in 0u64..80) {
        let mut st = eqcat::builders::periodic_structure(&pattern).unwrap();
        let x = st.card_at_stage(a, s).unwrap();
        let y = st.card_at_stage(a, s + 1).unwrap();
        prop_assert!(x <= y);
    }

    #[test]
    fn periodic_character_matches_brute_count(pattern in prop::collection::vec(1u64..5, 1..5), s in 0u64..60) {
        let mut st = eqcat::builders::periodic_structure(&pattern).unwrap();
        let ch = st.character_at_stage(s).unwrap();
        // Element x is placed at stage x: count the runs cut from 0..=s.
        let mut counts = std::collections::BTreeMap::<u64, u64>::new();
        let (mut start, mut i) = (0u64, 0usize);
        while start <= s {
            let len = pattern[i % pattern.len()];
            let seen = len.min(s + 1 - start);
            *counts.entry(seen).or_default() += 1;
            start += len;
            i += 1;
        }
        let want: BTreeSet<(u64, u64)> = counts.iter().flat_map(|(&k, &m)| (1..=m).map(move |n| (k, n))).collect();
        prop_assert_eq!(ch.pairs, want);
    }

    #[test]
    fn explicit_snapshots_are_append_only(sizes in prop::collection::vec(1usize..4, 1..6), s in 0u64..20, d in 0u64..20) {
        let mut blocks = Vec::new();
        let mut next = 0u64;
        for k in sizes {
            blocks.push((next..next + k as u64).collect::<Vec<_>>());
            next += k as u64;
        }
        let mut st = explicit_structure(&blocks).unwrap();
        let a = st.snapshot(s).unwrap();
        let b = st.snapshot(s + d).unwrap();
        prop_assert!(a.is_restriction_of(&b));
    }
}
