//! A total expression language for the computable relations that drive the
//! constructions, plus a few builtin predicate families.
//!
//! Grammar (EBNF); keywords are case-sensitive:
//!
//! ```text
//! expr       = or_expr ;
//! or_expr    = and_expr , { "or" , and_expr } ;
//! and_expr   = not_expr , { "and" , not_expr } ;
//! not_expr   = "not" , not_expr | comparison ;
//! comparison = sum , [ relop , sum ] ;
//! relop      = "<" | "<=" | ">" | ">=" | "==" | "!=" ;
//! sum        = product , { ( "+" | "-" ) , product } ;
//! product    = atom , { ( "*" | "/" | "mod" ) , atom } ;
//! atom       = integer | variable | "true" | "false"
//!            | ( "min" | "max" ) , "(" , sum , "," , sum , ")"
//!            | "(" , expr , ")" ;
//! ```
//!
//! Values are naturals; `-` saturates at 0 and `+`/`*` saturate at the top
//! of the 128-bit range.  A divisor that is the literal `0` is rejected when
//! parsing.  A divisor that evaluates to 0 makes the value undefined, and any
//! comparison with an undefined side is false.  There are no loops, so every
//! program terminates.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(u128),
    Ident(String),
    Sym(&'static str),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let v = src[start..i].parse::<u128>().map_err(|_| Error::Syntax {
                pos: start,
                msg: "integer literal too large".into(),
            })?;
            out.push((start, Tok::Int(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else {
            let two = src.get(i..i + 2).unwrap_or("");
            let sym = match two {
                "<=" => Some("<="),
                ">=" => Some(">="),
                "==" => Some("=="),
                "!=" => Some("!="),
                _ => None,
            };
            if let Some(s) = sym {
                out.push((i, Tok::Sym(s)));
                i += 2;
                continue;
            }
            let s = match c {
                '+' => "+",
                '-' => "-",
                '*' => "*",
                '/' => "/",
                '<' => "<",
                '>' => ">",
                '(' => "(",
                ')' => ")",
                ',' => ",",
                _ => {
                    return Err(Error::Syntax { pos: i, msg: format!("unexpected character `{c}`") });
                }
            };
            out.push((i, Tok::Sym(s)));
            i += 1;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Arith {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Clone, Debug, PartialEq)]
enum Expr {
    Lit(u128),
    Var(usize),
    Bool(bool),
    Arith(Arith, Box<Expr>, Box<Expr>),
    Cmp(Rel, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ty {
    Nat,
    Bool,
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    i: usize,
    vars: &'a [String],
    end: usize,
}

impl Parser<'_> {
    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.end, |t| t.0)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.1)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym)
    }

    fn expect_sym(&mut self, sym: &str) -> Result<()> {
        if self.is_sym(sym) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{sym}`")))
        }
    }

    fn err(&self, msg: String) -> Error {
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Int(v)) => format!("`{v}`"),
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(Tok::Sym(s)) => format!("`{s}`"),
        };
        Error::Syntax { pos: self.pos(), msg: format!("{msg}, found {found}") }
    }

    fn want(&self, pos: usize, got: Ty, want: Ty) -> Result<()> {
        if got == want {
            Ok(())
        } else {
            let name = |t| if t == Ty::Nat { "number" } else { "boolean" };
            Err(Error::Syntax { pos, msg: format!("expected a {} expression, found a {}", name(want), name(got)) })
        }
    }

    fn expr(&mut self) -> Result<(Expr, Ty)> {
        let pos = self.pos();
        let (mut lhs, mut ty) = self.and_expr()?;
        while self.is_kw("or") {
            self.want(pos, ty, Ty::Bool)?;
            self.i += 1;
            let p = self.pos();
            let (rhs, rt) = self.and_expr()?;
            self.want(p, rt, Ty::Bool)?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
            ty = Ty::Bool;
        }
        Ok((lhs, ty))
    }

    fn and_expr(&mut self) -> Result<(Expr, Ty)> {
        let pos = self.pos();
        let (mut lhs, mut ty) = self.not_expr()?;
        while self.is_kw("and") {
            self.want(pos, ty, Ty::Bool)?;
            self.i += 1;
            let p = self.pos();
            let (rhs, rt) = self.not_expr()?;
            self.want(p, rt, Ty::Bool)?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
            ty = Ty::Bool;
        }
        Ok((lhs, ty))
    }

    fn not_expr(&mut self) -> Result<(Expr, Ty)> {
        if self.is_kw("not") {
            self.i += 1;
            let p = self.pos();
            let (e, t) = self.not_expr()?;
            self.want(p, t, Ty::Bool)?;
            return Ok((Expr::Not(Box::new(e)), Ty::Bool));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<(Expr, Ty)> {
        let pos = self.pos();
        let (lhs, ty) = self.sum()?;
        let rel = match self.peek() {
            Some(Tok::Sym("<")) => Rel::Lt,
            Some(Tok::Sym("<=")) => Rel::Le,
            Some(Tok::Sym(">")) => Rel::Gt,
            Some(Tok::Sym(">=")) => Rel::Ge,
            Some(Tok::Sym("==")) => Rel::Eq,
            Some(Tok::Sym("!=")) => Rel::Ne,
            _ => return Ok((lhs, ty)),
        };
        self.want(pos, ty, Ty::Nat)?;
        self.i += 1;
        let p = self.pos();
        let (rhs, rt) = self.sum()?;
        self.want(p, rt, Ty::Nat)?;
        Ok((Expr::Cmp(rel, Box::new(lhs), Box::new(rhs)), Ty::Bool))
    }

    fn sum(&mut self) -> Result<(Expr, Ty)> {
        let pos = self.pos();
        let (mut lhs, ty) = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym("+")) => Arith::Add,
                Some(Tok::Sym("-")) => Arith::Sub,
                _ => return Ok((lhs, ty)),
            };
            self.want(pos, ty, Ty::Nat)?;
            self.i += 1;
            let p = self.pos();
            let (rhs, rt) = self.product()?;
            self.want(p, rt, Ty::Nat)?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<(Expr, Ty)> {
        let pos = self.pos();
        let (mut lhs, ty) = self.atom()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym("*")) => Arith::Mul,
                Some(Tok::Sym("/")) => Arith::Div,
                Some(Tok::Ident(s)) if s == "mod" => Arith::Mod,
                _ => return Ok((lhs, ty)),
            };
            self.want(pos, ty, Ty::Nat)?;
            self.i += 1;
            let p = self.pos();
            let (rhs, rt) = self.atom()?;
            self.want(p, rt, Ty::Nat)?;
            if matches!(op, Arith::Div | Arith::Mod) && rhs == Expr::Lit(0) {
                return Err(Error::Syntax { pos: p, msg: "division by the literal 0".into() });
            }
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn atom(&mut self) -> Result<(Expr, Ty)> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.i += 1;
                Ok((Expr::Lit(v), Ty::Nat))
            }
            Some(Tok::Sym("(")) => {
                self.i += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "true" | "false" => {
                    self.i += 1;
                    Ok((Expr::Bool(name == "true"), Ty::Bool))
                }
                "min" | "max" => {
                    self.i += 1;
                    self.expect_sym("(")?;
                    let p = self.pos();
                    let (a, at) = self.sum()?;
                    self.want(p, at, Ty::Nat)?;
                    self.expect_sym(",")?;
                    let p = self.pos();
                    let (b, bt) = self.sum()?;
                    self.want(p, bt, Ty::Nat)?;
                    self.expect_sym(")")?;
                    let op = if name == "min" { Arith::Min } else { Arith::Max };
                    Ok((Expr::Arith(op, Box::new(a), Box::new(b)), Ty::Nat))
                }
                "and" | "or" | "not" | "mod" => Err(self.err("expected an operand".into())),
                _ => match self.vars.iter().position(|v| *v == name) {
                    Some(ix) => {
                        self.i += 1;
                        Ok((Expr::Var(ix), Ty::Nat))
                    }
                    None => {
                        let _ = pos;
                        Err(Error::UnknownVariable(name))
                    }
                },
            },
            _ => Err(self.err("expected an operand".into())),
        }
    }
}

fn compile(source: &str, vars: &[String], want: Ty) -> Result<Expr> {
    let toks = lex(source)?;
    let mut p = Parser { toks, i: 0, vars, end: source.len() };
    let (e, ty) = p.expr()?;
    if p.i < p.toks.len() {
        return Err(p.err("unexpected trailing input".into()));
    }
    p.want(0, ty, want)?;
    Ok(e)
}

fn num(e: &Expr, args: &[u64]) -> Option<u128> {
    match e {
        Expr::Lit(v) => Some(*v),
        Expr::Var(i) => Some(args[*i] as u128),
        Expr::Arith(op, a, b) => {
            let x = num(a, args)?;
            let y = num(b, args)?;
            match op {
                Arith::Add => Some(x.saturating_add(y)),
                Arith::Sub => Some(x.saturating_sub(y)),
                Arith::Mul => Some(x.saturating_mul(y)),
                Arith::Div => x.checked_div(y),
                Arith::Mod => x.checked_rem(y),
                Arith::Min => Some(x.min(y)),
                Arith::Max => Some(x.max(y)),
            }
        }
        _ => unreachable!("type-checked"),
    }
}

fn truth(e: &Expr, args: &[u64]) -> bool {
    match e {
        Expr::Bool(b) => *b,
        Expr::And(a, b) => truth(a, args) && truth(b, args),
        Expr::Or(a, b) => truth(a, args) || truth(b, args),
        Expr::Not(a) => !truth(a, args),
        Expr::Cmp(rel, a, b) => match (num(a, args), num(b, args)) {
            (Some(x), Some(y)) => match rel {
                Rel::Lt => x < y,
                Rel::Le => x <= y,
                Rel::Gt => x > y,
                Rel::Ge => x >= y,
                Rel::Eq => x == y,
                Rel::Ne => x != y,
            },
            _ => false,
        },
        _ => unreachable!("type-checked"),
    }
}

/// A parsed boolean DSL program over declared variables.
#[derive(Clone, Debug, PartialEq)]
pub struct PredicateProgram {
    source: String,
    vars: Vec<String>,
    root: Expr,
}

/// The variable names of the four-place relation R(k, n, w, z).
pub const R4_VARS: [&str; 4] = ["k", "n", "w", "z"];

impl PredicateProgram {
    pub fn parse(source: &str, vars: &[&str]) -> Result<Self> {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let root = compile(source, &vars, Ty::Bool)?;
        Ok(PredicateProgram { source: source.to_string(), vars, root })
    }

    /// Parse over the variables `k, n, w, z`.
    pub fn parse_r4(source: &str) -> Result<Self> {
        Self::parse(source, &R4_VARS)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn eval(&self, args: &[u64]) -> Result<bool> {
        if args.len() != self.arity() {
            return Err(Error::ArityMismatch { expected: self.arity(), got: args.len() });
        }
        Ok(truth(&self.root, args))
    }
}

/// A parsed numeric DSL program, used for s-functions f(i, s).
#[derive(Clone, Debug, PartialEq)]
pub struct TermProgram {
    source: String,
    vars: Vec<String>,
    root: Expr,
}

impl TermProgram {
    pub fn parse(source: &str, vars: &[&str]) -> Result<Self> {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let root = compile(source, &vars, Ty::Nat)?;
        Ok(TermProgram { source: source.to_string(), vars, root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// Value of the term; an undefined value (runtime division by zero)
    /// reads as 0, and values saturate at `u64::MAX`.
    pub fn eval(&self, args: &[u64]) -> Result<u64> {
        if args.len() != self.arity() {
            return Err(Error::ArityMismatch { expected: self.arity(), got: args.len() });
        }
        Ok(num(&self.root, args).map_or(0, |v| v.min(u64::MAX as u128) as u64))
    }
}

/// One row of a finite-support table for R(k, n, w, z).
///
/// For the pair (k, n): the witness `w*` (if any) satisfies R at every z;
/// every other w holds exactly for z < `refute_at`.  Pairs without a row are
/// false everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub k: u64,
    pub n: u64,
    pub witness: Option<u64>,
    pub refute_at: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteSupportTable {
    pub rows: Vec<TableRow>,
}

impl FiniteSupportTable {
    pub fn new(rows: Vec<TableRow>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for r in &rows {
            if r.k == 0 || r.n == 0 {
                return Err(Error::InvalidSpec("table sizes and counts start at 1".into()));
            }
            if !seen.insert((r.k, r.n)) {
                return Err(Error::InvalidSpec(format!("duplicate table row for ({}, {})", r.k, r.n)));
            }
        }
        Ok(FiniteSupportTable { rows })
    }

    pub fn eval(&self, k: u64, n: u64, w: u64, z: u64) -> bool {
        match self.rows.iter().find(|r| r.k == k && r.n == n) {
            None => false,
            Some(r) if r.witness == Some(w) => true,
            Some(r) => z < r.refute_at,
        }
    }

    /// Largest coordinate mentioned by the table.
    pub fn support_bound(&self) -> u64 {
        self.rows
            .iter()
            .map(|r| r.k.max(r.n).max(r.witness.unwrap_or(0)).max(r.refute_at))
            .max()
            .unwrap_or(0)
    }
}

/// Builtin total predicate families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Builtin {
    AlwaysTrue,
    AlwaysFalse,
    /// `args[var] < bound`.
    Threshold { var: usize, bound: u64 },
    /// `args[var] mod modulus == residue`.
    Residue { var: usize, modulus: u64, residue: u64 },
    /// A finite-support table over (k, n, w, z).
    Table(FiniteSupportTable),
    /// `args[0] != size and inner(args)`: a character with one size removed.
    ExcludeSize { size: u64, inner: Box<Predicate> },
}

/// A total predicate: DSL program or builtin family, with a fixed arity.
#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    Dsl(PredicateProgram),
    Builtin { arity: usize, family: Builtin },
}

impl Predicate {
    pub fn dsl(source: &str, vars: &[&str]) -> Result<Self> {
        PredicateProgram::parse(source, vars).map(Predicate::Dsl)
    }

    pub fn r4(source: &str) -> Result<Self> {
        Self::dsl(source, &R4_VARS)
    }

    pub fn builtin(arity: usize, family: Builtin) -> Result<Self> {
        match &family {
            Builtin::Threshold { var, .. } if *var >= arity => {
                Err(Error::InvalidSpec(format!("variable index {var} out of range")))
            }
            Builtin::Residue { var, modulus, .. } if *var >= arity || *modulus == 0 => {
                Err(Error::InvalidSpec("residue family needs a variable in range and modulus ≥ 1".into()))
            }
            Builtin::Table(_) if arity != 4 => Err(Error::InvalidSpec("tables have arity 4".into())),
            Builtin::ExcludeSize { inner, .. } if inner.arity() != arity || arity == 0 => {
                Err(Error::InvalidSpec("excluded predicate must share the arity".into()))
            }
            _ => Ok(Predicate::Builtin { arity, family }),
        }
    }

    pub fn always(arity: usize, value: bool) -> Self {
        let family = if value { Builtin::AlwaysTrue } else { Builtin::AlwaysFalse };
        Predicate::Builtin { arity, family }
    }

    pub fn table(rows: Vec<TableRow>) -> Result<Self> {
        Ok(Predicate::Builtin { arity: 4, family: Builtin::Table(FiniteSupportTable::new(rows)?) })
    }

    pub fn arity(&self) -> usize {
        match self {
            Predicate::Dsl(p) => p.arity(),
            Predicate::Builtin { arity, .. } => *arity,
        }
    }

    pub fn eval(&self, args: &[u64]) -> Result<bool> {
        if args.len() != self.arity() {
            return Err(Error::ArityMismatch { expected: self.arity(), got: args.len() });
        }
        Ok(self.holds(args))
    }

    /// Evaluate without the arity check (callers guarantee it).
    pub fn holds(&self, args: &[u64]) -> bool {
        match self {
            Predicate::Dsl(p) => truth(&p.root, args),
            Predicate::Builtin { family, .. } => match family {
                Builtin::AlwaysTrue => true,
                Builtin::AlwaysFalse => false,
                Builtin::Threshold { var, bound } => args[*var] < *bound,
                Builtin::Residue { var, modulus, residue } => args[*var] % modulus == *residue,
                Builtin::Table(t) => t.eval(args[0], args[1], args[2], args[3]),
                Builtin::ExcludeSize { size, inner } => args[0] != *size && inner.holds(args),
            },
        }
    }

    pub fn require_arity(&self, n: usize) -> Result<()> {
        if self.arity() == n {
            Ok(())
        } else {
            Err(Error::ArityMismatch { expected: n, got: self.arity() })
        }
    }
}

/// Serialized form of a [`Predicate`]: DSL source with its variables, or a
/// builtin family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredicateSpec {
    Dsl { dsl: String, vars: Vec<String> },
    Builtin { arity: usize, builtin: Builtin },
}

impl From<&Predicate> for PredicateSpec {
    fn from(p: &Predicate) -> Self {
        match p {
            Predicate::Dsl(d) => PredicateSpec::Dsl { dsl: d.source.clone(), vars: d.vars.clone() },
            Predicate::Builtin { arity, family } => PredicateSpec::Builtin { arity: *arity, builtin: family.clone() },
        }
    }
}

impl PredicateSpec {
    pub fn compile(&self) -> Result<Predicate> {
        match self {
            PredicateSpec::Dsl { dsl, vars } => {
                let v: Vec<&str> = vars.iter().map(String::as_str).collect();
                Predicate::dsl(dsl, &v)
            }
            PredicateSpec::Builtin { arity, builtin } => Predicate::builtin(*arity, builtin.clone()),
        }
    }
}

impl Serialize for Predicate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PredicateSpec::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        PredicateSpec::deserialize(d)?.compile().map_err(serde::de::Error::custom)
    }
}

/// Budgeted Σ⁰₂ membership: some w ≤ budget with R(k, n, w, z) for all
/// z ≤ budget.
pub fn sigma2_member_at(r: &Predicate, k: u64, n: u64, budget: u64) -> Result<bool> {
    r.require_arity(4)?;
    Ok((0..=budget).any(|w| (0..=budget).all(|z| r.holds(&[k, n, w, z]))))
}
