//! First-order terms and formulas with equality and linear integer
//! arithmetic, plus the structural operations the kernel relies on:
//! capture-avoiding substitution, positional access and alpha-equivalence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod digest;
pub mod eval;
pub mod syntax;

pub use digest::Digest;
pub use syntax::{parse_formula, parse_term, ParseError};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sort {
    Int,
    Named(String),
}

impl Sort {
    pub fn named(name: &str) -> Self {
        if name == "Int" {
            Sort::Int
        } else {
            Sort::Named(name.to_string())
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => f.write_str("Int"),
            Sort::Named(n) => f.write_str(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    /// Bound variable or eigenvariable.
    Var(String, Sort),
    Const(String),
    App(String, Vec<Term>),
    Lit(i64),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    /// Literal coefficient times a term; the only multiplication allowed.
    Mul(i64, Box<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    /// The operator of the negated comparison: `!(a <= b)` is `a > b`.
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
        }
    }

    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Le => a <= b,
            CmpOp::Lt => a < b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Formula {
    True,
    False,
    Pred(String, Vec<Term>),
    Eq(Term, Term),
    Cmp(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Imp(Box<Formula>, Box<Formula>),
    Forall(String, Sort, Box<Formula>),
    Exists(String, Sort, Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("sort mismatch: expected {expected}, found {found}")]
    SortMismatch { expected: Sort, found: Sort },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("`{name}` expects {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("symbol `{0}` is already declared")]
    Duplicate(String),
    #[error("`{0}` is builtin and cannot be redeclared")]
    Reserved(String),
    #[error("position {0} does not resolve")]
    BadPosition(Position),
    #[error("position {0} denotes a formula, not a term")]
    NotATerm(Position),
    #[error("replacement would capture bound variable `{0}`")]
    Capture(String),
    #[error("variable `{0}` has conflicting sorts")]
    VarSort(String),
    #[error("arithmetic overflow")]
    Overflow,
}

pub type Result<T, E = LogicError> = std::result::Result<T, E>;

/// Orientation of an equation used for rewriting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ltr,
    Rtl,
}

/// Path of child indices from a formula root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position(pub Vec<usize>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("]")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subexpr<'a> {
    Term(&'a Term),
    Formula(&'a Formula),
}

impl Term {
    pub fn var(name: &str, sort: Sort) -> Term {
        Term::Var(name.to_string(), sort)
    }

    pub fn cnst(name: &str) -> Term {
        Term::Const(name.to_string())
    }

    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(name.to_string(), args)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(Box::new(a), Box::new(b))
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::App(_, args) => args.iter().collect(),
            Term::Add(a, b) | Term::Sub(a, b) => vec![a, b],
            Term::Mul(_, t) => vec![t],
            Term::Var(..) | Term::Const(_) | Term::Lit(_) => Vec::new(),
        }
    }

    fn child_mut(&mut self, i: usize) -> Option<&mut Term> {
        match self {
            Term::App(_, args) => args.get_mut(i),
            Term::Add(a, b) | Term::Sub(a, b) => match i {
                0 => Some(a),
                1 => Some(b),
                _ => None,
            },
            Term::Mul(_, t) if i == 0 => Some(t),
            _ => None,
        }
    }

    pub fn is_arith(&self) -> bool {
        matches!(self, Term::Lit(_) | Term::Add(..) | Term::Sub(..) | Term::Mul(..))
    }

    pub fn free_vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(n, _) => {
                out.insert(n.clone());
            }
            _ => {
                for c in self.children() {
                    c.free_vars_into(out);
                }
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut out);
        out
    }

    /// Every identifier mentioned (variables, constants, function symbols).
    pub fn names_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(n, _) | Term::Const(n) => {
                out.insert(n.clone());
            }
            Term::App(f, args) => {
                out.insert(f.clone());
                for a in args {
                    a.names_into(out);
                }
            }
            _ => {
                for c in self.children() {
                    c.names_into(out);
                }
            }
        }
    }

    pub fn subst(&self, x: &str, t: &Term) -> Term {
        match self {
            Term::Var(n, _) if n == x => t.clone(),
            Term::Var(..) | Term::Const(_) | Term::Lit(_) => self.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.subst(x, t)).collect()),
            Term::Add(a, b) => Term::Add(Box::new(a.subst(x, t)), Box::new(b.subst(x, t))),
            Term::Sub(a, b) => Term::Sub(Box::new(a.subst(x, t)), Box::new(b.subst(x, t))),
            Term::Mul(k, a) => Term::Mul(*k, Box::new(a.subst(x, t))),
        }
    }

    /// Replaces child `i` of this term, if it exists.
    pub fn with_child(&self, i: usize, t: Term) -> Option<Term> {
        let mut out = self.clone();
        *out.child_mut(i)? = t;
        Some(out)
    }

    fn rename_var(&self, from: &str, to: &str) -> Term {
        match self {
            Term::Var(n, s) if n == from => Term::Var(to.to_string(), s.clone()),
            _ => {
                let mut out = self.clone();
                for i in 0..self.children().len() {
                    let renamed = self.children()[i].rename_var(from, to);
                    *out.child_mut(i).expect("child index in range") = renamed;
                }
                out
            }
        }
    }

    /// Replace every `Const(name)` whose name is in `vars` by the variable.
    pub fn bind_consts(&self, vars: &BTreeMap<String, Sort>) -> Term {
        match self {
            Term::Const(n) => match vars.get(n) {
                Some(s) => Term::Var(n.clone(), s.clone()),
                None => self.clone(),
            },
            Term::Var(..) | Term::Lit(_) => self.clone(),
            _ => {
                let mut out = self.clone();
                for i in 0..self.children().len() {
                    let b = self.children()[i].bind_consts(vars);
                    *out.child_mut(i).expect("child index in range") = b;
                }
                out
            }
        }
    }
}

impl Formula {
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn imp(a: Formula, b: Formula) -> Formula {
        Formula::Imp(Box::new(a), Box::new(b))
    }

    pub fn forall(x: &str, s: Sort, body: Formula) -> Formula {
        Formula::Forall(x.to_string(), s, Box::new(body))
    }

    pub fn exists(x: &str, s: Sort, body: Formula) -> Formula {
        Formula::Exists(x.to_string(), s, Box::new(body))
    }

    pub fn pred(p: &str, args: Vec<Term>) -> Formula {
        Formula::Pred(p.to_string(), args)
    }

    pub fn children(&self) -> Vec<Subexpr<'_>> {
        match self {
            Formula::True | Formula::False => Vec::new(),
            Formula::Pred(_, args) => args.iter().map(Subexpr::Term).collect(),
            Formula::Eq(a, b) | Formula::Cmp(_, a, b) => vec![Subexpr::Term(a), Subexpr::Term(b)],
            Formula::Not(a) => vec![Subexpr::Formula(a)],
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
                vec![Subexpr::Formula(a), Subexpr::Formula(b)]
            }
            Formula::Forall(_, _, b) | Formula::Exists(_, _, b) => vec![Subexpr::Formula(b)],
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Forall(..) | Formula::Exists(..) => false,
            Formula::Not(a) => a.is_quantifier_free(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
            _ => true,
        }
    }

    pub fn free_vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Pred(_, args) => args.iter().for_each(|a| a.free_vars_into(out)),
            Formula::Eq(a, b) | Formula::Cmp(_, a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            Formula::Not(a) => a.free_vars_into(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            Formula::Forall(x, _, b) | Formula::Exists(x, _, b) => {
                let mut inner = BTreeSet::new();
                b.free_vars_into(&mut inner);
                inner.remove(x);
                out.extend(inner);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut out);
        out
    }

    /// Free variables together with the sorts they occur at.
    pub fn free_var_sorts(&self) -> BTreeMap<String, BTreeSet<Sort>> {
        fn term(t: &Term, bound: &mut Vec<String>, out: &mut BTreeMap<String, BTreeSet<Sort>>) {
            match t {
                Term::Var(n, s) if !bound.contains(n) => {
                    out.entry(n.clone()).or_default().insert(s.clone());
                }
                _ => t.children().into_iter().for_each(|c| term(c, bound, out)),
            }
        }
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeMap<String, BTreeSet<Sort>>) {
            match f {
                Formula::Forall(x, _, b) | Formula::Exists(x, _, b) => {
                    bound.push(x.clone());
                    go(b, bound, out);
                    bound.pop();
                }
                _ => {
                    for c in f.children() {
                        match c {
                            Subexpr::Term(t) => term(t, bound, out),
                            Subexpr::Formula(g) => go(g, bound, out),
                        }
                    }
                }
            }
        }
        let mut out = BTreeMap::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn names_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Pred(p, args) => {
                out.insert(p.clone());
                args.iter().for_each(|a| a.names_into(out));
            }
            Formula::Forall(x, _, b) | Formula::Exists(x, _, b) => {
                out.insert(x.clone());
                b.names_into(out);
            }
            _ => {
                for c in self.children() {
                    match c {
                        Subexpr::Term(t) => t.names_into(out),
                        Subexpr::Formula(g) => g.names_into(out),
                    }
                }
            }
        }
    }

    /// Capture-avoiding substitution of the free variable `x` by `t`.
    pub fn subst(&self, x: &str, t: &Term) -> Formula {
        let fv_t = t.free_vars();
        self.subst_inner(x, t, &fv_t)
    }

    fn subst_inner(&self, x: &str, t: &Term, fv_t: &BTreeSet<String>) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Pred(p, args) => Formula::Pred(p.clone(), args.iter().map(|a| a.subst(x, t)).collect()),
            Formula::Eq(a, b) => Formula::Eq(a.subst(x, t), b.subst(x, t)),
            Formula::Cmp(op, a, b) => Formula::Cmp(*op, a.subst(x, t), b.subst(x, t)),
            Formula::Not(a) => Formula::not(a.subst_inner(x, t, fv_t)),
            Formula::And(a, b) => Formula::and(a.subst_inner(x, t, fv_t), b.subst_inner(x, t, fv_t)),
            Formula::Or(a, b) => Formula::or(a.subst_inner(x, t, fv_t), b.subst_inner(x, t, fv_t)),
            Formula::Imp(a, b) => Formula::imp(a.subst_inner(x, t, fv_t), b.subst_inner(x, t, fv_t)),
            Formula::Forall(y, s, body) | Formula::Exists(y, s, body) => {
                let rebuild = |y: String, body: Formula| match self {
                    Formula::Forall(..) => Formula::Forall(y, s.clone(), Box::new(body)),
                    _ => Formula::Exists(y, s.clone(), Box::new(body)),
                };
                if y == x || !body.free_vars().contains(x) {
                    return self.clone();
                }
                if fv_t.contains(y) {
                    let mut avoid = BTreeSet::new();
                    body.names_into(&mut avoid);
                    t.names_into(&mut avoid);
                    avoid.insert(x.to_string());
                    let fresh = fresh_name(y, &avoid);
                    let renamed = body.rename_free(y, &fresh);
                    rebuild(fresh, renamed.subst_inner(x, t, fv_t))
                } else {
                    rebuild(y.clone(), body.subst_inner(x, t, fv_t))
                }
            }
        }
    }

    /// Renames free occurrences of variable `from` to `to`; `to` must not be
    /// bound anywhere inside (guaranteed by callers picking a fresh name).
    fn rename_free(&self, from: &str, to: &str) -> Formula {
        match self {
            Formula::Forall(y, _, _) | Formula::Exists(y, _, _) if y == from => self.clone(),
            Formula::Forall(y, s, b) => Formula::Forall(y.clone(), s.clone(), Box::new(b.rename_free(from, to))),
            Formula::Exists(y, s, b) => Formula::Exists(y.clone(), s.clone(), Box::new(b.rename_free(from, to))),
            Formula::True | Formula::False => self.clone(),
            Formula::Pred(p, args) => Formula::Pred(p.clone(), args.iter().map(|a| a.rename_var(from, to)).collect()),
            Formula::Eq(a, b) => Formula::Eq(a.rename_var(from, to), b.rename_var(from, to)),
            Formula::Cmp(op, a, b) => Formula::Cmp(*op, a.rename_var(from, to), b.rename_var(from, to)),
            Formula::Not(a) => Formula::not(a.rename_free(from, to)),
            Formula::And(a, b) => Formula::and(a.rename_free(from, to), b.rename_free(from, to)),
            Formula::Or(a, b) => Formula::or(a.rename_free(from, to), b.rename_free(from, to)),
            Formula::Imp(a, b) => Formula::imp(a.rename_free(from, to), b.rename_free(from, to)),
        }
    }

    /// Replace free constants named in `vars` by variables of the given sort.
    pub fn bind_consts(&self, vars: &BTreeMap<String, Sort>) -> Formula {
        if vars.is_empty() {
            return self.clone();
        }
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Pred(p, args) => Formula::Pred(p.clone(), args.iter().map(|a| a.bind_consts(vars)).collect()),
            Formula::Eq(a, b) => Formula::Eq(a.bind_consts(vars), b.bind_consts(vars)),
            Formula::Cmp(op, a, b) => Formula::Cmp(*op, a.bind_consts(vars), b.bind_consts(vars)),
            Formula::Not(a) => Formula::not(a.bind_consts(vars)),
            Formula::And(a, b) => Formula::and(a.bind_consts(vars), b.bind_consts(vars)),
            Formula::Or(a, b) => Formula::or(a.bind_consts(vars), b.bind_consts(vars)),
            Formula::Imp(a, b) => Formula::imp(a.bind_consts(vars), b.bind_consts(vars)),
            Formula::Forall(y, s, b) => Formula::Forall(y.clone(), s.clone(), Box::new(b.bind_consts(vars))),
            Formula::Exists(y, s, b) => Formula::Exists(y.clone(), s.clone(), Box::new(b.bind_consts(vars))),
        }
    }

    /// Alpha-equivalence: equal up to renaming of bound variables.
    pub fn alpha_eq(&self, other: &Formula) -> bool {
        alpha_formula(self, other, &mut Vec::new(), &mut Vec::new())
    }
}

/// A name based on `base` that does not occur in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '_');
    let stem = if stem.is_empty() { "v" } else { stem };
    (1..)
        .map(|i| format!("{stem}_{i}"))
        .find(|n| !avoid.contains(n))
        .expect("unbounded supply of names")
}

fn alpha_term(a: &Term, b: &Term, ea: &[String], eb: &[String]) -> bool {
    match (a, b) {
        (Term::Var(x, sx), Term::Var(y, sy)) => {
            if sx != sy {
                return false;
            }
            let ix = ea.iter().rposition(|v| v == x);
            let iy = eb.iter().rposition(|v| v == y);
            match (ix, iy) {
                (Some(i), Some(j)) => ea.len() - i == eb.len() - j,
                (None, None) => x == y,
                _ => false,
            }
        }
        (Term::Const(x), Term::Const(y)) => x == y,
        (Term::Lit(x), Term::Lit(y)) => x == y,
        (Term::App(f, xs), Term::App(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| alpha_term(x, y, ea, eb))
        }
        (Term::Add(a1, a2), Term::Add(b1, b2)) | (Term::Sub(a1, a2), Term::Sub(b1, b2)) => {
            alpha_term(a1, b1, ea, eb) && alpha_term(a2, b2, ea, eb)
        }
        (Term::Mul(k, x), Term::Mul(j, y)) => k == j && alpha_term(x, y, ea, eb),
        _ => false,
    }
}

fn alpha_formula(a: &Formula, b: &Formula, ea: &mut Vec<String>, eb: &mut Vec<String>) -> bool {
    match (a, b) {
        (Formula::True, Formula::True) | (Formula::False, Formula::False) => true,
        (Formula::Pred(p, xs), Formula::Pred(q, ys)) => {
            p == q && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| alpha_term(x, y, ea, eb))
        }
        (Formula::Eq(a1, a2), Formula::Eq(b1, b2)) => alpha_term(a1, b1, ea, eb) && alpha_term(a2, b2, ea, eb),
        (Formula::Cmp(o1, a1, a2), Formula::Cmp(o2, b1, b2)) => {
            o1 == o2 && alpha_term(a1, b1, ea, eb) && alpha_term(a2, b2, ea, eb)
        }
        (Formula::Not(x), Formula::Not(y)) => alpha_formula(x, y, ea, eb),
        (Formula::And(a1, a2), Formula::And(b1, b2))
        | (Formula::Or(a1, a2), Formula::Or(b1, b2))
        | (Formula::Imp(a1, a2), Formula::Imp(b1, b2)) => {
            alpha_formula(a1, b1, ea, eb) && alpha_formula(a2, b2, ea, eb)
        }
        (Formula::Forall(x, sx, bx), Formula::Forall(y, sy, by))
        | (Formula::Exists(x, sx, bx), Formula::Exists(y, sy, by)) => {
            if sx != sy {
                return false;
            }
            ea.push(x.clone());
            eb.push(y.clone());
            let r = alpha_formula(bx, by, ea, eb);
            ea.pop();
            eb.pop();
            r
        }
        _ => false,
    }
}

/// The subexpression at `p`; index `i` selects the `i`-th child at each step.
pub fn subterm_at<'a>(f: &'a Formula, p: &Position) -> Result<Subexpr<'a>> {
    let mut cur = Subexpr::Formula(f);
    for &i in &p.0 {
        cur = match cur {
            Subexpr::Formula(g) => *g.children().get(i).ok_or_else(|| LogicError::BadPosition(p.clone()))?,
            Subexpr::Term(t) => Subexpr::Term(
                t.children()
                    .get(i)
                    .copied()
                    .ok_or_else(|| LogicError::BadPosition(p.clone()))?,
            ),
        };
    }
    Ok(cur)
}

/// Like [`subterm_at`] but requires a term and also reports the variables
/// bound along the path.
pub fn term_at<'a>(f: &'a Formula, p: &Position) -> Result<(&'a Term, Vec<String>)> {
    let mut bound = Vec::new();
    let mut cur = Subexpr::Formula(f);
    for &i in &p.0 {
        cur = match cur {
            Subexpr::Formula(g) => {
                if let Formula::Forall(x, _, _) | Formula::Exists(x, _, _) = g {
                    bound.push(x.clone());
                }
                *g.children().get(i).ok_or_else(|| LogicError::BadPosition(p.clone()))?
            }
            Subexpr::Term(t) => Subexpr::Term(
                t.children()
                    .get(i)
                    .copied()
                    .ok_or_else(|| LogicError::BadPosition(p.clone()))?,
            ),
        };
    }
    match cur {
        Subexpr::Term(t) => Ok((t, bound)),
        Subexpr::Formula(_) => Err(LogicError::NotATerm(p.clone())),
    }
}

/// `f` with the term at `p` replaced by `t`.
pub fn replace_at(f: &Formula, p: &Position, t: &Term, sig: &Signature) -> Result<Formula> {
    let (old, bound) = term_at(f, p)?;
    let fv = t.free_vars();
    if let Some(v) = bound.iter().find(|b| fv.contains(*b)) {
        return Err(LogicError::Capture(v.clone()));
    }
    let (so, st) = (sig.sort_of(old)?, sig.sort_of(t)?);
    if so != st {
        return Err(LogicError::SortMismatch {
            expected: so,
            found: st,
        });
    }
    Ok(replace_unchecked(f, &p.0, t))
}

fn replace_term(t: &Term, path: &[usize], new: &Term) -> Term {
    match path.split_first() {
        None => new.clone(),
        Some((&i, rest)) => {
            let child = replace_term(t.children()[i], rest, new);
            t.with_child(i, child).expect("validated position")
        }
    }
}

fn replace_unchecked(f: &Formula, path: &[usize], new: &Term) -> Formula {
    let (&i, rest) = path.split_first().expect("term positions are never empty");
    let rt = |t: &Term| replace_term(t, rest, new);
    let rf = |g: &Formula| replace_unchecked(g, rest, new);
    match f {
        Formula::Pred(p, args) => {
            let mut args = args.clone();
            args[i] = rt(&args[i]);
            Formula::Pred(p.clone(), args)
        }
        Formula::Eq(a, b) if i == 0 => Formula::Eq(rt(a), b.clone()),
        Formula::Eq(a, b) => Formula::Eq(a.clone(), rt(b)),
        Formula::Cmp(op, a, b) if i == 0 => Formula::Cmp(*op, rt(a), b.clone()),
        Formula::Cmp(op, a, b) => Formula::Cmp(*op, a.clone(), rt(b)),
        Formula::Not(a) => Formula::not(rf(a)),
        Formula::And(a, b) if i == 0 => Formula::and(rf(a), (**b).clone()),
        Formula::And(a, b) => Formula::and((**a).clone(), rf(b)),
        Formula::Or(a, b) if i == 0 => Formula::or(rf(a), (**b).clone()),
        Formula::Or(a, b) => Formula::or((**a).clone(), rf(b)),
        Formula::Imp(a, b) if i == 0 => Formula::imp(rf(a), (**b).clone()),
        Formula::Imp(a, b) => Formula::imp((**a).clone(), rf(b)),
        Formula::Forall(x, s, b) => Formula::Forall(x.clone(), s.clone(), Box::new(rf(b))),
        Formula::Exists(x, s, b) => Formula::Exists(x.clone(), s.clone(), Box::new(rf(b))),
        Formula::True | Formula::False => unreachable!("validated position"),
    }
}

/// Declared sorts and symbols. `Int` and the arithmetic operators are builtin.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub sorts: BTreeSet<String>,
    pub functions: BTreeMap<String, (Vec<Sort>, Sort)>,
    pub predicates: BTreeMap<String, Vec<Sort>>,
    pub constants: BTreeMap<String, Sort>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    fn is_declared(&self, name: &str) -> bool {
        self.sorts.contains(name)
            || self.functions.contains_key(name)
            || self.predicates.contains_key(name)
            || self.constants.contains_key(name)
    }

    fn claim(&self, name: &str) -> Result<()> {
        if name == "Int" {
            return Err(LogicError::Reserved(name.to_string()));
        }
        if self.is_declared(name) {
            return Err(LogicError::Duplicate(name.to_string()));
        }
        Ok(())
    }

    fn known_sort(&self, s: &Sort) -> Result<()> {
        match s {
            Sort::Int => Ok(()),
            Sort::Named(n) if self.sorts.contains(n) => Ok(()),
            Sort::Named(n) => Err(LogicError::UnknownSort(n.clone())),
        }
    }

    pub fn add_sort(&mut self, name: &str) -> Result<()> {
        self.claim(name)?;
        self.sorts.insert(name.to_string());
        Ok(())
    }

    pub fn add_function(&mut self, name: &str, args: Vec<Sort>, result: Sort) -> Result<()> {
        self.claim(name)?;
        args.iter().chain([&result]).try_for_each(|s| self.known_sort(s))?;
        self.functions.insert(name.to_string(), (args, result));
        Ok(())
    }

    pub fn add_predicate(&mut self, name: &str, args: Vec<Sort>) -> Result<()> {
        self.claim(name)?;
        args.iter().try_for_each(|s| self.known_sort(s))?;
        self.predicates.insert(name.to_string(), args);
        Ok(())
    }

    pub fn add_constant(&mut self, name: &str, sort: Sort) -> Result<()> {
        self.claim(name)?;
        self.known_sort(&sort)?;
        self.constants.insert(name.to_string(), sort);
        Ok(())
    }

    pub fn sort_of(&self, t: &Term) -> Result<Sort> {
        match t {
            Term::Var(_, s) => {
                self.known_sort(s)?;
                Ok(s.clone())
            }
            Term::Const(c) => self
                .constants
                .get(c)
                .cloned()
                .ok_or_else(|| LogicError::UnknownSymbol(c.clone())),
            Term::App(f, args) => {
                let (params, res) = self
                    .functions
                    .get(f)
                    .ok_or_else(|| LogicError::UnknownSymbol(f.clone()))?;
                self.check_args(f, params, args)?;
                Ok(res.clone())
            }
            Term::Lit(_) => Ok(Sort::Int),
            Term::Add(a, b) | Term::Sub(a, b) => {
                self.expect(a, &Sort::Int)?;
                self.expect(b, &Sort::Int)?;
                Ok(Sort::Int)
            }
            Term::Mul(_, a) => {
                self.expect(a, &Sort::Int)?;
                Ok(Sort::Int)
            }
        }
    }

    fn expect(&self, t: &Term, s: &Sort) -> Result<()> {
        let found = self.sort_of(t)?;
        if &found != s {
            return Err(LogicError::SortMismatch {
                expected: s.clone(),
                found,
            });
        }
        Ok(())
    }

    fn check_args(&self, name: &str, params: &[Sort], args: &[Term]) -> Result<()> {
        if params.len() != args.len() {
            return Err(LogicError::Arity {
                name: name.to_string(),
                expected: params.len(),
                found: args.len(),
            });
        }
        params.iter().zip(args).try_for_each(|(s, a)| self.expect(a, s))
    }

    /// Well-sortedness of `f`. Free variables are allowed; a variable used at
    /// two different sorts is rejected.
    pub fn check_formula(&self, f: &Formula) -> Result<()> {
        self.check_inner(f, &mut Vec::new())?;
        for (v, sorts) in f.free_var_sorts() {
            if sorts.len() > 1 {
                return Err(LogicError::VarSort(v));
            }
        }
        Ok(())
    }

    fn check_inner(&self, f: &Formula, bound: &mut Vec<(String, Sort)>) -> Result<()> {
        let check_bound = |t: &Term, bound: &[(String, Sort)]| -> Result<()> {
            let mut ok = Ok(());
            visit_vars(t, &mut |n, s| {
                if let Some((_, bs)) = bound.iter().rev().find(|(b, _)| b == n) {
                    if bs != s && ok.is_ok() {
                        ok = Err(LogicError::VarSort(n.to_string()));
                    }
                }
            });
            ok
        };
        match f {
            Formula::True | Formula::False => Ok(()),
            Formula::Pred(p, args) => {
                let params = self
                    .predicates
                    .get(p)
                    .ok_or_else(|| LogicError::UnknownSymbol(p.clone()))?;
                self.check_args(p, params, args)?;
                args.iter().try_for_each(|a| check_bound(a, bound))
            }
            Formula::Eq(a, b) => {
                let sa = self.sort_of(a)?;
                self.expect(b, &sa)?;
                check_bound(a, bound)?;
                check_bound(b, bound)
            }
            Formula::Cmp(_, a, b) => {
                self.expect(a, &Sort::Int)?;
                self.expect(b, &Sort::Int)?;
                check_bound(a, bound)?;
                check_bound(b, bound)
            }
            Formula::Not(a) => self.check_inner(a, bound),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
                self.check_inner(a, bound)?;
                self.check_inner(b, bound)
            }
            Formula::Forall(x, s, b) | Formula::Exists(x, s, b) => {
                self.known_sort(s)?;
                bound.push((x.clone(), s.clone()));
                let r = self.check_inner(b, bound);
                bound.pop();
                r
            }
        }
    }
}

fn visit_vars(t: &Term, f: &mut impl FnMut(&str, &Sort)) {
    match t {
        Term::Var(n, s) => f(n, s),
        _ => t.children().into_iter().for_each(|c| visit_vars(c, f)),
    }
}

/// A named hypothesis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hyp {
    pub name: String,
    pub formula: Formula,
}

impl Hyp {
    pub fn new(name: impl Into<String>, formula: Formula) -> Self {
        Hyp {
            name: name.into(),
            formula,
        }
    }
}

/// `context ⊢ goal` with uniquely named hypotheses.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sequent {
    pub context: Vec<Hyp>,
    pub goal: Formula,
}

impl Sequent {
    pub fn new(context: Vec<Hyp>, goal: Formula) -> Self {
        Sequent { context, goal }
    }

    pub fn hyp(&self, name: &str) -> Option<&Formula> {
        self.context.iter().find(|h| h.name == name).map(|h| &h.formula)
    }

    /// Alpha-equivalent goals and the same named hypotheses, in any order.
    pub fn alpha_eq(&self, other: &Sequent) -> bool {
        self.context.len() == other.context.len()
            && self.goal.alpha_eq(&other.goal)
            && self
                .context
                .iter()
                .all(|h| other.hyp(&h.name).is_some_and(|g| g.alpha_eq(&h.formula)))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = self.goal.free_vars();
        for h in &self.context {
            h.formula.free_vars_into(&mut out);
        }
        out
    }

    pub fn digest(&self) -> Digest {
        digest::canonical_digest(self)
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, h) in self.context.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", h.name, h.formula)?;
        }
        write!(f, " |- {}", self.goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn sig() -> Signature {
        let mut s = Signature::new();
        s.add_sort("S").unwrap();
        s.add_constant("a", Sort::named("S")).unwrap();
        s.add_constant("b", Sort::named("S")).unwrap();
        s.add_constant("c", Sort::named("S")).unwrap();
        s.add_constant("d", Sort::named("S")).unwrap();
        s.add_function("f", vec![Sort::named("S"), Sort::named("S")], Sort::named("S"))
            .unwrap();
        s.add_function("g", vec![Sort::named("S")], Sort::named("S")).unwrap();
        s.add_predicate("P", vec![Sort::named("S")]).unwrap();
        s.add_predicate("A", vec![]).unwrap();
        s.add_predicate("B", vec![]).unwrap();
        s
    }

    #[test]
    fn substitute_examples() {
        let x = "x";
        let px = Formula::pred("P", vec![Term::var(x, Sort::named("S"))]);
        assert_eq!(px.subst(x, &Term::cnst("c")), f("P(c)"));
        let all = Formula::forall(x, Sort::named("S"), px.clone());
        assert_eq!(all.subst(x, &Term::cnst("c")), all);
        let arith = Formula::Cmp(
            CmpOp::Ge,
            Term::add(Term::var(x, Sort::Int), Term::Lit(1)),
            Term::Lit(0),
        );
        assert_eq!(arith.subst(x, &Term::Lit(3)), f("3 + 1 >= 0"));
    }

    #[test]
    fn substitution_avoids_capture() {
        // (exists y:Int. x < y)[x := y] must not become exists y. y < y
        let body = f("exists y:Int. 0 < y");
        let g = Formula::Exists(
            "y".into(),
            Sort::Int,
            Box::new(Formula::Cmp(
                CmpOp::Lt,
                Term::var("x", Sort::Int),
                Term::var("y", Sort::Int),
            )),
        );
        let out = g.subst("x", &Term::var("y", Sort::Int));
        let Formula::Exists(z, _, inner) = &out else { panic!() };
        assert_ne!(z, "y");
        assert_eq!(
            **inner,
            Formula::Cmp(CmpOp::Lt, Term::var("y", Sort::Int), Term::var(z, Sort::Int))
        );
        assert!(body.alpha_eq(&f("exists z:Int. 0 < z")));
    }

    #[test]
    fn subterm_examples() {
        let g = f("P(f(a,b))");
        assert_eq!(
            subterm_at(&g, &Position(vec![0, 1])).unwrap(),
            Subexpr::Term(&Term::cnst("b"))
        );
        let ab = f("A /\\ B");
        assert_eq!(subterm_at(&ab, &Position::root()).unwrap(), Subexpr::Formula(&ab));
        let all = f("forall x:S. P(x)");
        assert_eq!(
            subterm_at(&all, &Position(vec![0, 0])).unwrap(),
            Subexpr::Term(&Term::var("x", Sort::named("S")))
        );
        assert!(matches!(
            subterm_at(&g, &Position(vec![0, 2])),
            Err(LogicError::BadPosition(_))
        ));
    }

    #[test]
    fn replace_examples() {
        let s = sig();
        let g = f("P(g(a))");
        assert_eq!(
            replace_at(&g, &Position(vec![0]), &Term::cnst("b"), &s).unwrap(),
            f("P(b)")
        );
        let e = f("g(a) = g(a)");
        assert_eq!(
            replace_at(&e, &Position(vec![1]), &Term::cnst("b"), &s).unwrap(),
            f("g(a) = b")
        );
        let p = f("P(c)");
        assert!(matches!(
            replace_at(&p, &Position::root(), &Term::cnst("d"), &s),
            Err(LogicError::NotATerm(_))
        ));
        assert!(matches!(
            replace_at(&p, &Position(vec![0]), &Term::Lit(1), &s),
            Err(LogicError::SortMismatch { .. })
        ));
        let all = f("forall x:S. P(g(a))");
        assert!(matches!(
            replace_at(&all, &Position(vec![0, 0]), &Term::var("x", Sort::named("S")), &s),
            Err(LogicError::Capture(_))
        ));
    }

    #[test]
    fn alpha_equivalence() {
        assert!(f("forall x:S. P(x)").alpha_eq(&f("forall y:S. P(y)")));
        assert!(!f("forall x:S. P(x)").alpha_eq(&f("forall y:S. P(a)")));
        assert!(!f("forall x:S. forall y:S. f(x,y) = x").alpha_eq(&f("forall y:S. forall x:S. f(x,y) = x")));
        assert!(!f("A /\\ B").alpha_eq(&f("B /\\ A")));
    }

    #[test]
    fn signature_rejects_redeclaration() {
        let mut s = sig();
        assert_eq!(s.add_constant("a", Sort::Int), Err(LogicError::Duplicate("a".into())));
        assert_eq!(s.add_sort("Int"), Err(LogicError::Reserved("Int".into())));
        assert!(s.check_formula(&f("P(1)")).is_err());
        assert!(s.check_formula(&f("forall x:S. P(x) /\\ x = a")).is_ok());
    }
}
