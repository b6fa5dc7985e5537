//! Computable isomorphisms from categoricity certificates.

use super::engine::{Engine, Rule};
use super::{IsoApprox, IsoBudget, IsoLevel, Verdict};
use crate::error::{Error, Result};
use crate::structure::{ClassId, Element, Stage, StageStructure};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Parameters that make a structure computably categorical.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CategoricityCertificate {
    /// Finitely many finite classes, with these representatives; every other
    /// class is infinite.
    FinitelyManyFinite {
        finite: Vec<Element>,
        /// Claimed sizes of the named classes, if known.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sizes: Option<Vec<u64>>,
    },
    /// Finite sizes ≤ `bound`; every class not named here has size `k`.
    /// `finite` names the finite classes of size ≠ k, `infinite` the
    /// (finitely many) infinite classes.
    BoundedOneRepeat {
        bound: u64,
        #[serde(default)]
        k: Option<u64>,
        #[serde(default)]
        finite: Vec<Element>,
        #[serde(default)]
        infinite: Vec<Element>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sizes: Option<Vec<u64>>,
    },
}

impl CategoricityCertificate {
    fn kind(&self) -> &'static str {
        match self {
            CategoricityCertificate::FinitelyManyFinite { .. } => "finitely-many-finite-classes",
            CategoricityCertificate::BoundedOneRepeat { .. } => "bounded-one-repeat",
        }
    }

    /// Named representatives: finite ones first, then infinite ones.
    fn named(&self) -> Vec<Element> {
        match self {
            CategoricityCertificate::FinitelyManyFinite { finite, .. } => finite.clone(),
            CategoricityCertificate::BoundedOneRepeat { finite, infinite, .. } => {
                finite.iter().chain(infinite).copied().collect()
            }
        }
    }

    fn finite_count(&self) -> usize {
        match self {
            CategoricityCertificate::FinitelyManyFinite { finite, .. }
            | CategoricityCertificate::BoundedOneRepeat { finite, .. } => finite.len(),
        }
    }

    fn sizes(&self) -> Option<&[u64]> {
        match self {
            CategoricityCertificate::FinitelyManyFinite { sizes, .. }
            | CategoricityCertificate::BoundedOneRepeat { sizes, .. } => sizes.as_deref(),
        }
    }

    /// Verdict of every unnamed class, or None if there may be none.
    fn supply(&self) -> Option<Verdict> {
        match self {
            CategoricityCertificate::FinitelyManyFinite { .. } => Some(Verdict::Infinite),
            CategoricityCertificate::BoundedOneRepeat { k, .. } => k.map(Verdict::Finite),
        }
    }

    fn check_shape(&self) -> Result<()> {
        if let Some(sz) = self.sizes() {
            if sz.len() != self.finite_count() || sz.contains(&0) {
                return Err(Error::InvalidSpec("certificate sizes must match the finite representatives".into()));
            }
        }
        if let CategoricityCertificate::BoundedOneRepeat { bound, k, sizes, .. } = self {
            if k.is_some_and(|k| k == 0 || k > *bound) {
                return Err(Error::InvalidSpec("distinguished size must lie in 1..=bound".into()));
            }
            if let Some(sz) = sizes {
                if let Some(&m) = sz.iter().find(|&&m| m > *bound || Some(m) == *k) {
                    return Err(Error::InvalidSpec(format!("named finite size {m} must be ≤ bound and ≠ k")));
                }
            }
        }
        Ok(())
    }

    /// Same kind, same parameters, same counts.
    pub fn compatible(&self, other: &Self) -> Result<()> {
        use CategoricityCertificate::*;
        let mismatch = |m: String| Err(Error::CertificateMismatch(m));
        if self.kind() != other.kind() {
            return mismatch(format!("kinds differ: {} vs {}", self.kind(), other.kind()));
        }
        if let (BoundedOneRepeat { bound: k1, k: r1, infinite: i1, .. }, BoundedOneRepeat { bound: k2, k: r2, infinite: i2, .. }) =
            (self, other)
        {
            if k1 != k2 {
                return mismatch(format!("bounds differ: {k1} vs {k2}"));
            }
            if r1 != r2 {
                let show = |k: &Option<u64>| k.map_or("none".to_string(), |k| k.to_string());
                return mismatch(format!("repeated sizes differ: {} vs {}", show(r1), show(r2)));
            }
            if i1.len() != i2.len() {
                return mismatch(format!("infinite class counts differ: {} vs {}", i1.len(), i2.len()));
            }
        }
        if self.finite_count() != other.finite_count() {
            return mismatch(format!(
                "finite class counts differ: {} vs {}",
                self.finite_count(),
                other.finite_count()
            ));
        }
        if let (Some(a), Some(b)) = (self.sizes(), other.sizes()) {
            if a != b {
                return mismatch(format!("named sizes differ: {a:?} vs {b:?}"));
            }
        }
        Ok(())
    }
}

struct CertRule {
    /// Named index of each named class, per side.
    named: [HashMap<ClassId, usize>; 2],
    finite_count: usize,
    sizes: [Option<Vec<u64>>; 2],
    bound: Option<u64>,
    supply: Option<Verdict>,
}

impl CertRule {
    fn limit(&self, side: usize, v: Verdict) -> Option<u64> {
        match v {
            Verdict::Named(i) if i < self.finite_count => {
                let claimed = self.sizes[side].as_ref().map(|sz| sz[i]);
                match (claimed, self.bound) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                }
            }
            Verdict::Finite(k) => Some(k),
            _ => None,
        }
    }
}

impl Rule for CertRule {
    fn verdict(&mut self, side: usize, st: &StageStructure, c: ClassId, s: Stage, _old: Option<Verdict>) -> Result<Option<Verdict>> {
        let part = st.partition();
        let v = match self.named[side].get(&c) {
            Some(&i) => Verdict::Named(i),
            None => self.supply.ok_or_else(|| {
                Error::CertificateRefuted(format!(
                    "side {side}: class of {} is not named and the certificate allows no other class",
                    part.rep(c)
                ))
            })?,
        };
        if let Some(m) = self.limit(side, v) {
            let size = part.size_at(c, s);
            if size > m {
                return Err(Error::CertificateRefuted(format!(
                    "side {side}: class of {} has {size} elements at stage {s}, certificate allows {m}",
                    part.rep(c)
                )));
            }
        }
        Ok(Some(v))
    }

    fn saturated(&self, v: Option<Verdict>) -> bool {
        // Only classes with a size ceiling need watching while they grow.
        match v {
            Some(v) => self.limit(0, v).is_none() && self.limit(1, v).is_none(),
            None => true,
        }
    }

    fn retractable(&self) -> bool {
        false
    }
}

fn name_classes(st: &mut StageStructure, reps: &[Element], side: usize) -> Result<HashMap<ClassId, usize>> {
    let mut out = HashMap::new();
    for (i, &x) in reps.iter().enumerate() {
        let c = st.ensure_placed(x)?;
        if let Some(j) = out.insert(c, i) {
            return Err(Error::CertificateRefuted(format!(
                "side {side}: representatives {} and {x} are related",
                reps[j]
            )));
        }
    }
    Ok(out)
}

/// Back-and-forth under matching certificates: named classes are paired by
/// index, unnamed ones in discovery order; the map is never retracted.
pub fn iso_computable(
    a: &mut StageStructure,
    b: &mut StageStructure,
    cert_a: &CategoricityCertificate,
    cert_b: &CategoricityCertificate,
    run: IsoBudget,
) -> Result<IsoApprox> {
    cert_a.check_shape()?;
    cert_b.check_shape()?;
    cert_a.compatible(cert_b)?;
    let named = [name_classes(a, &cert_a.named(), 0)?, name_classes(b, &cert_b.named(), 1)?];
    let bound = match cert_a {
        CategoricityCertificate::BoundedOneRepeat { bound, .. } => Some(*bound),
        _ => None,
    };
    let rule = CertRule {
        named,
        finite_count: cert_a.finite_count(),
        sizes: [cert_a.sizes().map(<[u64]>::to_vec), cert_b.sizes().map(<[u64]>::to_vec)],
        bound,
        supply: cert_a.supply(),
    };
    Engine::new(rule, IsoLevel::Delta1, a, b, run).run()
}
