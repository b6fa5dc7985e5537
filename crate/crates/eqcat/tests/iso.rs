mod common;

use common::{bounded, catalog, r4};
use eqcat::builders::{build_from_s, build_pair_t4, explicit_structure, identity_structure, periodic_structure};
use eqcat::builders::{BoundedCharSpec, PairBase, SFunctionSpec, SKind, SetSpec};
use eqcat::config::BuilderConfig;
use eqcat::iso::{
    iso_computable, iso_delta2, iso_delta3, verify_partial_iso, CategoricityCertificate, Counterexample, FinSideInfo,
    IsoApprox, IsoBudget, Retraction,
};
use eqcat::structure::{Partition, PoolSpec, StageProgram};
use eqcat::{Element, Error, Result, Size, StageStructure};
use proptest::prelude::*;
use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

fn bounded_cert(bound: u64, k: u64) -> CategoricityCertificate {
    CategoricityCertificate::BoundedOneRepeat { bound, k: Some(k), finite: vec![], infinite: vec![], sizes: None }
}

fn injective_everywhere(h: &IsoApprox) -> bool {
    let stages: BTreeSet<u64> = h.history.iter().flat_map(|x| [Some(x.from), x.to]).flatten().collect();
    stages.into_iter().all(|s| {
        let m = h.map_at(s);
        m.values().collect::<BTreeSet<_>>().len() == m.len()
    })
}

fn verify(a: &mut StageStructure, b: &mut StageStructure, h: &IsoApprox, n: Element) -> bool {
    verify_partial_iso(a, b, &h.final_map(), n).unwrap().passed()
}

/// One class that holds a single element until stage `jump`, then receives
/// K more at once and one per stage after; every other stage adds a fresh
/// singleton.
struct Jump {
    k: u64,
    jump: u64,
    big: Option<u32>,
}

impl StageProgram for Jump {
    fn name(&self) -> &'static str {
        "jump"
    }

    fn pools(&self) -> Vec<PoolSpec> {
        vec![PoolSpec::all()]
    }

    fn step(&mut self, part: &mut Partition) -> Result<()> {
        let s = part.stage();
        let Some(big) = self.big else {
            let x = part.take(0)?;
            self.big = Some(part.new_class(x)?);
            return Ok(());
        };
        let x = part.take(0)?;
        part.new_class(x)?;
        let extra = match s.cmp(&self.jump) {
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => self.k,
            std::cmp::Ordering::Greater => 1,
        };
        for _ in 0..extra {
            let y = part.take(0)?;
            part.add(big, y)?;
        }
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

fn jump(k: u64, at: u64) -> StageStructure {
    StageStructure::new(Box::new(Jump { k, jump: at, big: None }))
}

#[test]
fn computable_identity() {
    let (mut a, mut b) = (identity_structure(), identity_structure());
    let cert = bounded_cert(1, 1);
    let h = iso_computable(&mut a, &mut b, &cert, &cert, IsoBudget::new(200, 100)).unwrap();
    assert!(h.is_monotone());
    for x in 0..=100 {
        assert_eq!(h.final_map().get(&x), Some(&x));
    }
}

#[test]
fn computable_named_singleton_shifted() {
    // {0,1},{2},{3,4},{5,6},… against {0,1},{2,3},{4},{5,6},…
    let mut a = explicit_structure_tail(&[vec![0, 1], vec![2]], &[2]);
    let mut b = explicit_structure_tail(&[vec![0, 1], vec![2, 3], vec![4]], &[2]);
    let ca = CategoricityCertificate::BoundedOneRepeat { bound: 2, k: Some(2), finite: vec![2], infinite: vec![], sizes: Some(vec![1]) };
    let cb = CategoricityCertificate::BoundedOneRepeat { bound: 2, k: Some(2), finite: vec![4], infinite: vec![], sizes: Some(vec![1]) };
    let h = iso_computable(&mut a, &mut b, &ca, &cb, IsoBudget::new(450, 200)).unwrap();
    assert_eq!(h.final_map()[&2], 4);
    assert!(h.is_monotone());
    assert!(verify(&mut a, &mut b, &h, 200));
}

#[test]
fn computable_mismatched_certificates() {
    let (mut a, mut b) = (periodic_structure(&[2]).unwrap(), periodic_structure(&[2]).unwrap());
    let err = iso_computable(&mut a, &mut b, &bounded_cert(3, 2), &bounded_cert(3, 3), IsoBudget::new(10, 10)).unwrap_err();
    assert!(matches!(err, Error::CertificateMismatch(_)), "{err:?}");
}

#[test]
fn computable_refuted_certificate() {
    // A size-2 structure claimed to repeat size 1.
    let (mut a, mut b) = (periodic_structure(&[2]).unwrap(), periodic_structure(&[2]).unwrap());
    let cert = bounded_cert(1, 1);
    let err = iso_computable(&mut a, &mut b, &cert, &cert, IsoBudget::new(10, 10)).unwrap_err();
    assert!(matches!(err, Error::CertificateRefuted(_)), "{err:?}");
}

#[test]
fn computable_related_representatives_refuted() {
    let (mut a, mut b) = (periodic_structure(&[2]).unwrap(), periodic_structure(&[2]).unwrap());
    let cert = CategoricityCertificate::FinitelyManyFinite { finite: vec![0, 1], sizes: None };
    let err = iso_computable(&mut a, &mut b, &cert, &cert, IsoBudget::new(10, 10)).unwrap_err();
    assert!(matches!(err, Error::CertificateRefuted(_)), "{err:?}");
}

#[test]
fn delta2_bounded_sigma2() {
    let cfg = BuilderConfig::Sigma2Inf { r: r4("w == 0 and k <= 2") };
    let (mut a, mut b) = (cfg.build().unwrap(), cfg.build().unwrap());
    let h = iso_delta2(&mut a, &mut b, Some(2), None, IsoBudget::new(3000, 100)).unwrap();
    assert!((0..=100).all(|x| h.stable_since(x).is_some()));
    assert!(verify(&mut a, &mut b, &h, 100));
}

#[test]
fn delta2_fin_program_on_pair_with_empty_m() {
    let base = PairBase::Bounded { spec: BoundedCharSpec { repeat_sizes: vec![1, 3], fixed_sizes: vec![], r: Size::Finite(0) } };
    let p = build_pair_t4(&base, 1, Size::Finite(3), &SetSpec::Empty).unwrap();
    let (mut a, mut b) = (p.c, p.d);
    let fin = Some((FinSideInfo::Program, FinSideInfo::Program));
    let h = iso_delta2(&mut a, &mut b, None, fin, IsoBudget::new(600, 100)).unwrap();
    assert!(h.is_monotone());
    assert!(h.retractions.is_empty());
    assert!(verify(&mut a, &mut b, &h, 100));
}

#[test]
fn delta2_needs_side_information() {
    let (mut a, mut b) = (identity_structure(), identity_structure());
    let err = iso_delta2(&mut a, &mut b, None, None, IsoBudget::new(5, 5)).unwrap_err();
    assert!(matches!(err, Error::PreconditionUnverifiable(_)), "{err:?}");
}

#[test]
fn delta2_flip_at_stage_50() {
    // B's copy of the class only jumps at stage 70, so the pair made on
    // the finite verdict breaks at 50 and is re-made at 70.
    let (mut a, mut b) = (jump(2, 50), jump(2, 70));
    let h = iso_delta2(&mut a, &mut b, Some(2), None, IsoBudget::new(120, 60)).unwrap();
    // Meanwhile B's still-finite class is lent to A's singleton 50.
    let maps: Vec<_> = h.retractions.iter().filter(|r| matches!(r, Retraction::Map { .. })).collect();
    assert_eq!(maps, vec![&Retraction::Map { stage: 50, a: 0, b: 0 }, &Retraction::Map { stage: 70, a: 50, b: 0 }]);
    assert_eq!(h.retraction_counts(), BTreeMap::from([(0, 1), (50, 1)]));
    assert_eq!(h.final_map()[&0], 0);
    assert_eq!(h.stable_since(0), Some(70));
    assert!(verify(&mut a, &mut b, &h, 60));
}

#[test]
fn delta2_lockstep_flip_keeps_the_pair() {
    // Both copies jump together: the pair is broken and re-made in the same
    // stage, so h never changes and only the verdict layer is logged.
    let (mut a, mut b) = (jump(2, 50), jump(2, 50));
    let h = iso_delta2(&mut a, &mut b, Some(2), None, IsoBudget::new(120, 60)).unwrap();
    assert!(h.retraction_counts().is_empty());
    assert!(h.is_monotone());
    assert_eq!(h.stable_since(0), Some(0));
    let flips: Vec<_> = h.retractions.iter().filter(|r| matches!(r, Retraction::Verdict { .. })).collect();
    assert_eq!(flips.len(), 2);
}

#[test]
fn delta3_from_s_with_one_infinite_class() {
    let f = SFunctionSpec::dsl("i + 1", SKind::S).unwrap();
    let (mut a, mut b) = (build_from_s(f.clone(), Size::Finite(1)).unwrap(), build_from_s(f, Size::Finite(1)).unwrap());
    let h = iso_delta3(&mut a, &mut b, IsoBudget::new(2000, 50)).unwrap();
    assert!((0..=50).all(|x| h.stable_since(x).is_some()));
    assert!(verify(&mut a, &mut b, &h, 50));
}

#[test]
fn delta3_identity_is_immediate() {
    let (mut a, mut b) = (identity_structure(), identity_structure());
    let h = iso_delta3(&mut a, &mut b, IsoBudget::new(100, 40)).unwrap();
    assert!(h.retractions.is_empty());
    for x in 0..=40 {
        assert_eq!(h.final_map().get(&x), Some(&x));
    }
}

#[test]
fn verify_examples() {
    let (mut a, mut b) = (identity_structure(), identity_structure());
    let id: BTreeMap<_, _> = (0..=100).map(|x| (x, x)).collect();
    assert!(verify_partial_iso(&mut a, &mut b, &id, 100).unwrap().passed());

    // {0,1},{2},{3} → 0,1 onto the singletons 2 and 3.
    let mut a = explicit_structure(&[vec![0, 1], vec![2], vec![3]]).unwrap();
    let mut b = explicit_structure(&[vec![0, 1], vec![2], vec![3]]).unwrap();
    let h: BTreeMap<_, _> = [(0, 2), (1, 3), (2, 0), (3, 1)].into();
    let v = verify_partial_iso(&mut a, &mut b, &h, 3).unwrap();
    assert_eq!(v.counterexample, Some(Counterexample::Relation { a1: 0, a2: 1, b1: 2, b2: 3, related_a: true }));

    // Nothing placed yet: vacuous.
    let (mut a, mut b) = (identity_structure(), identity_structure());
    let v = verify_partial_iso(&mut a, &mut b, &BTreeMap::new(), 0).unwrap();
    assert!(v.passed() && v.checked == 0);
    // Once 0 is placed the empty map misses it.
    a.advance_to(0).unwrap();
    let v = verify_partial_iso(&mut a, &mut b, &BTreeMap::new(), 0).unwrap();
    assert_eq!(v.counterexample, Some(Counterexample::Missing { a: 0 }));
}

#[test]
fn verify_detects_non_injective_maps() {
    let (mut a, mut b) = (identity_structure(), identity_structure());
    let h: BTreeMap<_, _> = [(0, 5), (1, 5)].into();
    let v = verify_partial_iso(&mut a, &mut b, &h, 1).unwrap();
    assert_eq!(v.counterexample, Some(Counterexample::NotInjective { a1: 0, a2: 1, b: 5 }));
}

#[test]
fn computable_maps_grow_monotonically() {
    let pairs: Vec<(StageStructure, StageStructure, CategoricityCertificate)> = vec![
        (identity_structure(), identity_structure(), bounded_cert(1, 1)),
        (periodic_structure(&[2]).unwrap(), explicit_structure_tail(&[vec![0, 2], vec![1, 3]], &[2]), bounded_cert(2, 2)),
    ];
    for (mut a, mut b, cert) in pairs {
        let h = iso_computable(&mut a, &mut b, &cert, &cert, IsoBudget::new(300, 120)).unwrap();
        assert!(h.is_monotone());
        for s in (0..300).step_by(25) {
            let (now, later) = (h.map_at(s), h.map_at(s + 25));
            assert!(now.iter().all(|(x, y)| later.get(x) == Some(y)));
        }
        assert!(injective_everywhere(&h));
        assert!(verify(&mut a, &mut b, &h, 120));
    }
}

fn explicit_structure_tail(blocks: &[Vec<Element>], tail: &[u64]) -> StageStructure {
    StageStructure::new(Box::new(eqcat::builders::basic::ExplicitProgram::new(blocks, tail).unwrap()))
}

#[test]
fn delta3_stabilized_set_grows_with_budget() {
    for (name, cfg) in catalog().into_iter().filter(|(n, _)| !n.starts_with("diag")) {
        let mut prev: BTreeSet<Element> = BTreeSet::new();
        for budget in [150, 300, 600] {
            let (mut a, mut b) = (cfg.build().unwrap(), cfg.build().unwrap());
            let h = iso_delta3(&mut a, &mut b, IsoBudget::new(budget, 20)).unwrap();
            assert!(injective_everywhere(&h), "{name}");
            let now: BTreeSet<Element> = h.stabilized().into_iter().collect();
            assert!(prev.is_subset(&now), "{name} at {budget}: lost {:?}", prev.difference(&now).collect::<Vec<_>>());
            prev = now;
        }
    }
}

#[test]
fn delta2_bounded_maps_are_injective_on_the_catalog() {
    for cfg in [bounded(&[1, 2], &[], Size::Omega), bounded(&[2], &[(3, 2)], Size::Finite(1))] {
        let (mut a, mut b) = (cfg.build().unwrap(), cfg.build().unwrap());
        let h = iso_delta2(&mut a, &mut b, Some(3), None, IsoBudget::new(800, 60)).unwrap();
        assert!(injective_everywhere(&h));
        assert!(verify(&mut a, &mut b, &h, 60));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // A class whose size crosses K exactly once costs each of its elements
    // at most one retraction.
    #[test]
    fn one_crossing_one_retraction(k in 1u64..=3, at in 1u64..80) {
        let (mut a, mut b) = (jump(k, at), jump(k, at));
        let h = iso_delta2(&mut a, &mut b, Some(k), None, IsoBudget::new(at + 40, 40)).unwrap();
        prop_assert!(h.retraction_counts().values().all(|&n| n <= 1));
        prop_assert!(injective_everywhere(&h));
        prop_assert!(verify(&mut a, &mut b, &h, 40));
    }

    #[test]
    fn computable_periodic_self_maps_verify(pattern in prop::collection::vec(1u64..=3, 1..4), n in 10u64..80) {
        let k = pattern[0];
        prop_assume!(pattern.iter().all(|&x| x == k));
        let (mut a, mut b) = (periodic_structure(&pattern).unwrap(), periodic_structure(&pattern).unwrap());
        let cert = bounded_cert(k, k);
        let h = iso_computable(&mut a, &mut b, &cert, &cert, IsoBudget::new(3 * n + 5, n)).unwrap();
        prop_assert!(h.is_monotone());
        prop_assert!(verify(&mut a, &mut b, &h, n));
    }
}
