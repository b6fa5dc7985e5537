//! s-functions and s₁-functions f(i, s), with runtime audits.

use crate::error::{Error, Result};
use crate::predicates::TermProgram;
use crate::structure::Stage;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SKind {
    S,
    S1,
}

/// Per-index change points `(stage, value)`, as produced by extraction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tabulation {
    pub columns: Vec<Vec<(Stage, u64)>>,
}

impl Tabulation {
    pub fn value(&self, i: u64, s: Stage) -> u64 {
        let Some(col) = self.columns.get(i as usize) else {
            return 0;
        };
        let p = col.partition_point(|c| c.0 <= s);
        if p == 0 {
            0
        } else {
            col[p - 1].1
        }
    }

    /// Record f(i, s) = v, keeping only change points.
    pub fn set(&mut self, i: usize, s: Stage, v: u64) {
        if self.columns.len() <= i {
            self.columns.resize(i + 1, Vec::new());
        }
        let col = &mut self.columns[i];
        if col.last().is_none_or(|c| c.1 != v) {
            col.push((s, v));
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Where the values of an s-function come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum SFunc {
    /// A DSL term over the variables `i, s`.
    Dsl { dsl: String },
    /// `slope * i + offset`, constant in s.
    Linear { slope: u64, offset: u64 },
    /// `min(s + 1, cap)`.
    Ramp { cap: u64 },
    /// `2^i`, constant in s.
    Pow2,
    /// `f(j)` for `j < index`, `f(j + 1)` for `j ≥ index`: the function with
    /// column `index` removed.
    Skip { inner: Box<SFunc>, index: u64 },
    /// Explicit change points.
    Table(Tabulation),
}

/// An s- or s₁-function, ready to evaluate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SFunctionRepr", into = "SFunctionRepr")]
pub struct SFunctionSpec {
    pub source: SFunc,
    pub kind: SKind,
    compiled: Option<Arc<Compiled>>,
}

#[derive(Debug)]
enum Compiled {
    Term(TermProgram),
    Skip(Box<Compiled>),
    Plain,
}

#[derive(Clone, Serialize, Deserialize)]
struct SFunctionRepr {
    #[serde(flatten)]
    source: SFunc,
    kind: SKind,
}

impl TryFrom<SFunctionRepr> for SFunctionSpec {
    type Error = Error;
    fn try_from(r: SFunctionRepr) -> Result<Self> {
        SFunctionSpec::new(r.source, r.kind)
    }
}

impl From<SFunctionSpec> for SFunctionRepr {
    fn from(s: SFunctionSpec) -> Self {
        SFunctionRepr { source: s.source, kind: s.kind }
    }
}

impl PartialEq for SFunctionSpec {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.kind == other.kind
    }
}

fn compile(src: &SFunc) -> Result<Compiled> {
    Ok(match src {
        SFunc::Dsl { dsl } => Compiled::Term(TermProgram::parse(dsl, &["i", "s"])?),
        SFunc::Skip { inner, .. } => Compiled::Skip(Box::new(compile(inner)?)),
        _ => Compiled::Plain,
    })
}

fn value(src: &SFunc, comp: &Compiled, i: u64, s: Stage) -> u64 {
    match (src, comp) {
        (SFunc::Dsl { .. }, Compiled::Term(t)) => t.eval(&[i, s]).unwrap_or(0),
        (SFunc::Linear { slope, offset }, _) => slope.saturating_mul(i).saturating_add(*offset),
        (SFunc::Ramp { cap }, _) => (s + 1).min(*cap),
        (SFunc::Pow2, _) => 1u64.checked_shl(i as u32).unwrap_or(u64::MAX),
        (SFunc::Skip { inner, index }, Compiled::Skip(c)) => {
            let j = if i < *index { i } else { i + 1 };
            value(inner, c, j, s)
        }
        (SFunc::Table(t), _) => t.value(i, s),
        _ => unreachable!("compiled form matches source"),
    }
}

impl SFunctionSpec {
    pub fn new(source: SFunc, kind: SKind) -> Result<Self> {
        let compiled = Some(Arc::new(compile(&source)?));
        Ok(SFunctionSpec { source, kind, compiled })
    }

    pub fn dsl(src: &str, kind: SKind) -> Result<Self> {
        Self::new(SFunc::Dsl { dsl: src.to_string() }, kind)
    }

    pub fn linear(slope: u64, offset: u64, kind: SKind) -> Self {
        Self::new(SFunc::Linear { slope, offset }, kind).expect("builtin")
    }

    pub fn tabulated(t: Tabulation, kind: SKind) -> Self {
        Self::new(SFunc::Table(t), kind).expect("builtin")
    }

    /// The same function with column `index` removed.
    pub fn skip(&self, index: u64) -> Self {
        Self::new(SFunc::Skip { inner: Box::new(self.source.clone()), index }, self.kind).expect("compiled")
    }

    pub fn eval(&self, i: u64, s: Stage) -> u64 {
        let comp = self.compiled.as_ref().expect("constructed through new");
        value(&self.source, comp, i, s)
    }

    /// Check f(i, s) ≤ f(i, s+1) for i ≤ i_max, s < s_max, and (for s₁)
    /// strictly increasing values f(·, s_max) on i ≤ i_max.
    pub fn audit(&self, i_max: u64, s_max: Stage) -> Result<()> {
        for i in 0..=i_max {
            let mut prev = self.eval(i, 0);
            for s in 1..=s_max {
                let v = self.eval(i, s);
                if v < prev {
                    return Err(Error::MonotonicityViolation { i, s, prev_stage: s - 1, prev, next: v });
                }
                prev = v;
            }
        }
        if self.kind == SKind::S1 {
            for i in 0..i_max {
                let (a, b) = (self.eval(i, s_max), self.eval(i + 1, s_max));
                if a >= b {
                    return Err(Error::LimitOrderViolation { i, s: s_max, a, b });
                }
            }
        }
        Ok(())
    }
}

/// Reads an s-function inside a construction and aborts on any decrease in
/// s between successive reads of the same column.
#[derive(Clone, Debug)]
pub struct MonotoneReader {
    f: SFunctionSpec,
    last: Vec<Option<(Stage, u64)>>,
}

impl MonotoneReader {
    pub fn new(f: SFunctionSpec) -> Self {
        MonotoneReader { f, last: Vec::new() }
    }

    pub fn spec(&self) -> &SFunctionSpec {
        &self.f
    }

    pub fn read(&mut self, i: u64, s: Stage) -> Result<u64> {
        let v = self.f.eval(i, s);
        let ix = i as usize;
        if self.last.len() <= ix {
            self.last.resize(ix + 1, None);
        }
        if let Some((ps, pv)) = self.last[ix] {
            if ps <= s && v < pv {
                return Err(Error::MonotonicityViolation { i, s, prev_stage: ps, prev: pv, next: v });
            }
            if ps > s {
                return Ok(v);
            }
        }
        self.last[ix] = Some((s, v));
        Ok(v)
    }
}
