//! Translation of sequents into solver problems. Part of the trusted base:
//! the certificate checker re-runs it to bind certificates to sequents.
//!
//! Validity of `Γ ⊢ φ` is encoded as unsatisfiability of `Γ ∪ {¬φ}`.
//! Quantified hypotheses are dropped (a weakening, so unsatisfiability of the
//! reduced problem still implies validity); a quantified goal is unsupported.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{CmpOp, Digest, Formula, Sequent, Sort, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unsupported {
    #[error("quantified-after-flattening")]
    QuantifiedAfterFlattening,
    #[error("mixed-fragment")]
    MixedFragment,
    #[error("arithmetic-overflow")]
    ArithmeticOverflow,
}

/// Propositional problem in clausal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfProblem {
    num_vars: u32,
    clauses: Vec<Vec<i32>>,
    atoms: Vec<Option<Formula>>,
    exact: bool,
    origin: Digest,
}

impl CnfProblem {
    /// A free-standing problem, bound to a digest of its own content.
    pub fn new(num_vars: u32, clauses: Vec<Vec<i32>>) -> Self {
        let clauses = normalize_clauses(clauses);
        let origin = Digest::of_json(&("cnf", num_vars, &clauses));
        CnfProblem {
            num_vars,
            clauses,
            atoms: vec![None; num_vars as usize],
            exact: true,
            origin,
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    /// The atom behind variable `v`, or `None` for auxiliary variables.
    pub fn atom(&self, v: u32) -> Option<&Formula> {
        self.atoms.get(v.checked_sub(1)? as usize)?.as_ref()
    }

    /// True when a model of the clauses is a genuine countermodel: no
    /// theory atoms were abstracted and no hypotheses were dropped.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Digest of the sequent this problem encodes (or of its own content).
    pub fn origin(&self) -> Digest {
        self.origin
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                out.push_str(&l.to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }

    pub fn parse_dimacs(text: &str) -> Result<Self, String> {
        let mut num_vars = None;
        let mut clauses = Vec::new();
        let mut cur = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("p cnf") {
                let nums: Vec<u32> = rest
                    .split_whitespace()
                    .map(|x| x.parse().map_err(|_| "bad header"))
                    .collect::<Result<_, _>>()?;
                num_vars = Some(*nums.first().ok_or("bad header")?);
                continue;
            }
            for tok in line.split_whitespace() {
                let l: i32 = tok.parse().map_err(|_| format!("bad literal `{tok}`"))?;
                if l == 0 {
                    clauses.push(std::mem::take(&mut cur));
                } else {
                    cur.push(l);
                }
            }
        }
        if !cur.is_empty() {
            return Err("unterminated clause".into());
        }
        let n = num_vars.ok_or("missing `p cnf` header")?;
        if clauses.iter().flatten().any(|l| l.unsigned_abs() > n) {
            return Err("literal exceeds declared variable count".into());
        }
        let mut p = CnfProblem::new(n, clauses);
        p.origin = Digest::of_json(&("dimacs", text));
        Ok(p)
    }
}

fn normalize_clauses(clauses: Vec<Vec<i32>>) -> Vec<Vec<i32>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for c in clauses {
        let mut lits: Vec<i32> = Vec::new();
        for l in c {
            if !lits.contains(&l) {
                lits.push(l);
            }
        }
        if lits.iter().any(|l| lits.contains(&-l)) {
            continue;
        }
        let mut key = lits.clone();
        key.sort_unstable();
        if seen.insert(key) {
            out.push(lits);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinOp {
    Le,
    Ge,
    Eq,
}

impl LinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            LinOp::Le => "<=",
            LinOp::Ge => ">=",
            LinOp::Eq => "=",
        }
    }
}

/// `Σ coeff·x op rhs` over integer variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinConstraint {
    pub coeffs: Vec<(usize, i64)>,
    pub op: LinOp,
    pub rhs: i64,
}

impl LinConstraint {
    pub fn new(coeffs: Vec<(usize, i64)>, op: LinOp, rhs: i64) -> Self {
        let mut m: BTreeMap<usize, i64> = BTreeMap::new();
        for (v, c) in coeffs {
            *m.entry(v).or_default() += c;
        }
        LinConstraint {
            coeffs: m.into_iter().filter(|(_, c)| *c != 0).collect(),
            op,
            rhs,
        }
    }

    pub fn holds(&self, model: &[i64]) -> bool {
        let lhs: i128 = self.coeffs.iter().map(|&(v, c)| c as i128 * model[v] as i128).sum();
        let rhs = self.rhs as i128;
        match self.op {
            LinOp::Le => lhs <= rhs,
            LinOp::Ge => lhs >= rhs,
            LinOp::Eq => lhs == rhs,
        }
    }
}

/// One row of the `≤`-normalized system: `Σ coeff·x ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<(usize, i128)>,
    pub rhs: i128,
}

impl Row {
    pub fn upper(var: usize, bound: i128) -> Row {
        Row {
            coeffs: vec![(var, 1)],
            rhs: bound,
        }
    }

    pub fn lower(var: usize, bound: i128) -> Row {
        Row {
            coeffs: vec![(var, -1)],
            rhs: -bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiaProblem {
    vars: Vec<String>,
    constraints: Vec<LinConstraint>,
    terms: Vec<Option<Term>>,
    exact: bool,
    origin: Digest,
}

impl LiaProblem {
    pub fn new(vars: Vec<String>, constraints: Vec<LinConstraint>) -> Self {
        let origin = Digest::of_json(&("lia", &vars, &constraints));
        LiaProblem {
            terms: vec![None; vars.len()],
            vars,
            constraints,
            exact: true,
            origin,
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn constraints(&self) -> &[LinConstraint] {
        &self.constraints
    }

    /// The term abstracted as variable `i`, when translated from a sequent.
    pub fn term(&self, i: usize) -> Option<&Term> {
        self.terms.get(i)?.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn origin(&self) -> Digest {
        self.origin
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// The `≤`-normalized rows; an equation contributes `≤` then `≥`.
    pub fn rows(&self) -> Vec<Row> {
        let mut out = Vec::new();
        for c in &self.constraints {
            let pos: Vec<(usize, i128)> = c.coeffs.iter().map(|&(v, a)| (v, a as i128)).collect();
            let neg: Vec<(usize, i128)> = pos.iter().map(|&(v, a)| (v, -a)).collect();
            let b = c.rhs as i128;
            match c.op {
                LinOp::Le => out.push(Row { coeffs: pos, rhs: b }),
                LinOp::Ge => out.push(Row { coeffs: neg, rhs: -b }),
                LinOp::Eq => {
                    out.push(Row { coeffs: pos, rhs: b });
                    out.push(Row { coeffs: neg, rhs: -b });
                }
            }
        }
        out
    }

    pub fn holds(&self, model: &[i64]) -> bool {
        self.constraints.iter().all(|c| c.holds(model))
    }
}

impl fmt::Display for LiaProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.constraints.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            if c.coeffs.is_empty() {
                f.write_str("0")?;
            }
            for (j, (v, a)) in c.coeffs.iter().enumerate() {
                if j > 0 {
                    f.write_str(" + ")?;
                }
                write!(f, "{a}*{}", self.vars[*v])?;
            }
            write!(f, " {} {}", c.op.symbol(), c.rhs)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Translation {
    Cnf(CnfProblem),
    Lia(LiaProblem),
}

/// Negation normal form over `~ /\ \/` with constants folded. Returns `None`
/// if a quantifier is met.
fn nnf(f: &Formula, positive: bool) -> Option<Formula> {
    use Formula as F;
    let and = |a: F, b: F| match (a, b) {
        (F::False, _) | (_, F::False) => F::False,
        (F::True, x) | (x, F::True) => x,
        (a, b) => F::and(a, b),
    };
    let or = |a: F, b: F| match (a, b) {
        (F::True, _) | (_, F::True) => F::True,
        (F::False, x) | (x, F::False) => x,
        (a, b) => F::or(a, b),
    };
    Some(match (f, positive) {
        (F::True, true) | (F::False, false) => F::True,
        (F::True, false) | (F::False, true) => F::False,
        (F::Pred(..) | F::Eq(..) | F::Cmp(..), true) => f.clone(),
        (F::Pred(..) | F::Eq(..) | F::Cmp(..), false) => F::not(f.clone()),
        (F::Not(a), p) => nnf(a, !p)?,
        (F::And(a, b), true) => and(nnf(a, true)?, nnf(b, true)?),
        (F::And(a, b), false) => or(nnf(a, false)?, nnf(b, false)?),
        (F::Or(a, b), true) => or(nnf(a, true)?, nnf(b, true)?),
        (F::Or(a, b), false) => and(nnf(a, false)?, nnf(b, false)?),
        (F::Imp(a, b), true) => or(nnf(a, false)?, nnf(b, true)?),
        (F::Imp(a, b), false) => and(nnf(a, true)?, nnf(b, false)?),
        (F::Forall(..) | F::Exists(..), _) => return None,
    })
}

fn conjuncts(f: Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::And(a, b) => {
            conjuncts(*a, out);
            conjuncts(*b, out);
        }
        Formula::True => {}
        f => out.push(f),
    }
}

/// Hypothesis formulas in NNF, quantified ones dropped, and whether any was.
fn hypotheses(seq: &Sequent) -> (Vec<Formula>, bool) {
    let mut dropped = false;
    let mut out = Vec::new();
    for h in &seq.context {
        match nnf(&h.formula, true) {
            Some(f) => out.push(f),
            None => dropped = true,
        }
    }
    (out, dropped)
}

fn negated_goal(seq: &Sequent) -> Result<Formula, Unsupported> {
    nnf(&seq.goal, false).ok_or(Unsupported::QuantifiedAfterFlattening)
}

fn is_int_term(t: &Term) -> bool {
    t.is_arith() || matches!(t, Term::Var(_, Sort::Int))
}

/// Opaque Int terms (constants, applications, variables) become solver
/// variables, numbered by first occurrence.
#[derive(Default)]
struct Roster {
    index: BTreeMap<Term, usize>,
    terms: Vec<Term>,
    names: Vec<String>,
}

fn display_name(t: &Term) -> String {
    let s = t.to_string();
    let ident = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '.');
    if ident {
        s
    } else {
        format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

impl Roster {
    fn var(&mut self, t: &Term) -> usize {
        if let Some(&i) = self.index.get(t) {
            return i;
        }
        let i = self.terms.len();
        let mut name = display_name(t);
        while self.names.contains(&name) {
            name.push('\'');
        }
        self.index.insert(t.clone(), i);
        self.terms.push(t.clone());
        self.names.push(name);
        i
    }

    fn linear(&mut self, t: &Term, k: i64, acc: &mut BTreeMap<usize, i64>, c: &mut i64) -> Option<()> {
        match t {
            Term::Lit(n) => *c = c.checked_add(k.checked_mul(*n)?)?,
            Term::Add(a, b) => {
                self.linear(a, k, acc, c)?;
                self.linear(b, k, acc, c)?;
            }
            Term::Sub(a, b) => {
                self.linear(a, k, acc, c)?;
                self.linear(b, k.checked_neg()?, acc, c)?;
            }
            Term::Mul(j, a) => self.linear(a, k.checked_mul(*j)?, acc, c)?,
            _ => {
                let v = self.var(t);
                let e = acc.entry(v).or_default();
                *e = e.checked_add(k)?;
            }
        }
        Some(())
    }

    /// `a - b op 0` as a constraint; `Lt`/`Gt` are tightened over the integers.
    fn constraint(&mut self, a: &Term, b: &Term, op: Option<CmpOp>) -> Result<LinConstraint, Unsupported> {
        let mut acc = BTreeMap::new();
        let mut c = 0i64;
        let ok = self
            .linear(a, 1, &mut acc, &mut c)
            .and_then(|_| self.linear(b, -1, &mut acc, &mut c));
        let rhs = ok
            .and_then(|_| c.checked_neg())
            .ok_or(Unsupported::ArithmeticOverflow)?;
        let (op, rhs) = match op {
            None => (LinOp::Eq, Some(rhs)),
            Some(CmpOp::Le) => (LinOp::Le, Some(rhs)),
            Some(CmpOp::Lt) => (LinOp::Le, rhs.checked_sub(1)),
            Some(CmpOp::Ge) => (LinOp::Ge, Some(rhs)),
            Some(CmpOp::Gt) => (LinOp::Ge, rhs.checked_add(1)),
        };
        Ok(LinConstraint::new(
            acc.into_iter().collect(),
            op,
            rhs.ok_or(Unsupported::ArithmeticOverflow)?,
        ))
    }

    /// The constraint for an NNF literal, if it is a linear one.
    fn literal(&mut self, f: &Formula) -> Option<Result<LinConstraint, Unsupported>> {
        match f {
            Formula::Cmp(op, a, b) => Some(self.constraint(a, b, Some(*op))),
            Formula::Not(g) => match &**g {
                Formula::Cmp(op, a, b) => Some(self.constraint(a, b, Some(op.negate()))),
                _ => None,
            },
            Formula::Eq(a, b) if is_int_term(a) || is_int_term(b) => Some(self.constraint(a, b, None)),
            _ => None,
        }
    }
}

fn is_lia_literal(f: &Formula) -> bool {
    match f {
        Formula::Cmp(..) => true,
        Formula::Not(g) => matches!(**g, Formula::Cmp(..)),
        Formula::Eq(a, b) => is_int_term(a) || is_int_term(b),
        _ => false,
    }
}

/// The LIA encoding, when `¬φ` flattens to a conjunction of linear literals.
/// Hypothesis conjuncts that are not linear literals are dropped.
pub fn lia_translation(seq: &Sequent) -> Result<Option<LiaProblem>, Unsupported> {
    let mut goal = Vec::new();
    conjuncts(negated_goal(seq)?, &mut goal);
    if !goal.iter().all(is_lia_literal) {
        return Ok(None);
    }
    let (hyps, mut dropped) = hypotheses(seq);
    let mut lits = Vec::new();
    for h in hyps {
        let mut cs = Vec::new();
        conjuncts(h, &mut cs);
        for c in cs {
            if is_lia_literal(&c) {
                lits.push(c);
            } else {
                dropped = true;
            }
        }
    }
    lits.extend(goal);
    let mut roster = Roster::default();
    let mut constraints = Vec::new();
    for l in &lits {
        let c = roster.literal(l).expect("filtered to linear literals")?;
        if !constraints.contains(&c) {
            constraints.push(c);
        }
    }
    Ok(Some(LiaProblem {
        vars: roster.names,
        terms: roster.terms.into_iter().map(Some).collect(),
        constraints,
        exact: !dropped,
        origin: seq.digest(),
    }))
}

struct Tseitin {
    atoms: Vec<Option<Formula>>,
    index: BTreeMap<Formula, i32>,
    clauses: Vec<Vec<i32>>,
    theory: bool,
}

impl Tseitin {
    fn fresh(&mut self, atom: Option<Formula>) -> i32 {
        self.atoms.push(atom);
        self.atoms.len() as i32
    }

    fn atom(&mut self, f: &Formula) -> i32 {
        if let Some(&v) = self.index.get(f) {
            return v;
        }
        if matches!(f, Formula::Eq(..) | Formula::Cmp(..)) {
            self.theory = true;
        }
        let v = self.fresh(Some(f.clone()));
        self.index.insert(f.clone(), v);
        v
    }

    /// Literal standing for an NNF formula (positive polarity only).
    fn lit(&mut self, f: &Formula) -> i32 {
        match f {
            Formula::Not(a) => -self.atom(a),
            Formula::And(..) => {
                let v = self.fresh(None);
                let mut cs = Vec::new();
                conjuncts(f.clone(), &mut cs);
                for c in cs {
                    let l = self.lit(&c);
                    self.clauses.push(vec![-v, l]);
                }
                v
            }
            Formula::Or(..) => {
                let v = self.fresh(None);
                let mut clause = vec![-v];
                self.disjuncts(f, &mut clause);
                self.clauses.push(clause);
                v
            }
            _ => self.atom(f),
        }
    }

    fn disjuncts(&mut self, f: &Formula, out: &mut Vec<i32>) {
        match f {
            Formula::Or(a, b) => {
                self.disjuncts(a, out);
                self.disjuncts(b, out);
            }
            Formula::False => {}
            _ => {
                let l = self.lit(f);
                out.push(l);
            }
        }
    }

    fn top(&mut self, f: Formula) {
        let mut cs = Vec::new();
        conjuncts(f, &mut cs);
        for c in cs {
            let mut clause = Vec::new();
            self.disjuncts(&c, &mut clause);
            self.clauses.push(clause);
        }
    }
}

/// Clausal encoding with theory atoms treated as opaque propositions.
pub fn cnf_translation(seq: &Sequent) -> Result<CnfProblem, Unsupported> {
    let neg = negated_goal(seq)?;
    let (hyps, dropped) = hypotheses(seq);
    let mut t = Tseitin {
        atoms: Vec::new(),
        index: BTreeMap::new(),
        clauses: Vec::new(),
        theory: false,
    };
    for h in hyps {
        t.top(h);
    }
    t.top(neg);
    Ok(CnfProblem {
        num_vars: t.atoms.len() as u32,
        clauses: normalize_clauses(t.clauses),
        atoms: t.atoms,
        exact: !dropped && !t.theory,
        origin: seq.digest(),
    })
}

/// The preferred encoding: LIA when the negated goal is a non-empty
/// conjunction of linear literals, clausal otherwise.
pub fn translate(seq: &Sequent) -> Result<Translation, Unsupported> {
    let mut goal = Vec::new();
    conjuncts(negated_goal(seq)?, &mut goal);
    if !goal.is_empty() {
        if let Some(p) = lia_translation(seq)? {
            return Ok(Translation::Lia(p));
        }
    }
    Ok(Translation::Cnf(cnf_translation(seq)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, Hyp};

    fn seq(hyps: &[&str], goal: &str) -> Sequent {
        Sequent::new(
            hyps.iter()
                .enumerate()
                .map(|(i, h)| Hyp::new(format!("h{i}"), parse_formula(h).unwrap()))
                .collect(),
            parse_formula(goal).unwrap(),
        )
    }

    #[test]
    fn propositional_encoding() {
        let Translation::Cnf(p) = translate(&seq(&["A"], "A \\/ B")).unwrap() else {
            panic!()
        };
        // A, ¬A, ¬B
        assert_eq!(p.num_vars(), 2);
        assert_eq!(p.clauses(), &[vec![1], vec![-1], vec![-2]]);
        assert!(p.is_exact());
        assert_eq!(p.atom(2), Some(&parse_formula("B").unwrap()));
        assert_eq!(p.origin(), seq(&["A"], "A \\/ B").digest());
    }

    #[test]
    fn negation_normalizes_arithmetic() {
        let Translation::Lia(p) = translate(&seq(&[], "x >= 1 -> x >= 0")).unwrap() else {
            panic!()
        };
        assert_eq!(p.vars(), ["x"]);
        assert_eq!(
            p.constraints(),
            &[
                LinConstraint::new(vec![(0, 1)], LinOp::Ge, 1),
                LinConstraint::new(vec![(0, 1)], LinOp::Le, -1)
            ]
        );
        assert_eq!(p.to_string(), "1*x >= 1, 1*x <= -1");
    }

    #[test]
    fn quantified_goal_unsupported() {
        assert_eq!(
            translate(&seq(&[], "forall x:S. P(x)")),
            Err(Unsupported::QuantifiedAfterFlattening)
        );
        // A quantified hypothesis is dropped instead.
        let Translation::Cnf(p) = translate(&seq(&["forall x:S. P(x)"], "P(a)")).unwrap() else {
            panic!()
        };
        assert!(!p.is_exact());
    }

    #[test]
    fn opaque_terms_become_variables() {
        let s = seq(&["n >= 0"], "plus(n, 0) + 1 >= 1 - 0");
        let Translation::Lia(p) = translate(&s).unwrap() else {
            panic!()
        };
        assert_eq!(p.vars(), ["n", "\"plus(n, 0)\""]);
        assert!(p.is_exact());
    }

    #[test]
    fn equality_of_uninterpreted_terms_is_opaque() {
        let Translation::Cnf(p) = translate(&seq(&["a = b"], "b = a")).unwrap() else {
            panic!()
        };
        assert_eq!(p.num_vars(), 2);
        assert!(!p.is_exact());
    }

    #[test]
    fn tautological_clauses_removed() {
        let p = CnfProblem::new(2, vec![vec![1, -1], vec![2, 2], vec![2]]);
        assert_eq!(p.clauses(), &[vec![2]]);
        let d = CnfProblem::parse_dimacs("c x\np cnf 2 2\n1 -2 0\n2 0\n").unwrap();
        assert_eq!(d.clauses(), &[vec![1, -2], vec![2]]);
        assert_eq!(CnfProblem::parse_dimacs(&d.to_dimacs()).unwrap().clauses(), d.clauses());
        assert!(CnfProblem::parse_dimacs("p cnf 1 1\n2 0\n").is_err());
    }
}
