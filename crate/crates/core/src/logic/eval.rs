//! Bounded Tarskian semantics, used as a brute-force oracle in tests.
//!
//! Elements of an uninterpreted sort of size `k` are `0..k`; Int quantifiers
//! range over a finite interval. Tabled functions clamp Int arguments into
//! that interval, which keeps them total on all of Int.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{Formula, Sequent, Signature, Sort, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("interpretation does not cover `{0}`")]
    Uncovered(String),
    #[error("arithmetic overflow")]
    Overflow,
}

pub type NativeFn = Arc<dyn Fn(&[i64]) -> i64 + Send + Sync>;

#[derive(Clone)]
pub enum FnInterp {
    Table(BTreeMap<Vec<i64>, i64>),
    Native(NativeFn),
}

impl fmt::Debug for FnInterp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FnInterp::Table(t) => f.debug_tuple("Table").field(t).finish(),
            FnInterp::Native(_) => f.write_str("Native(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Interpretation {
    pub carriers: BTreeMap<String, i64>,
    pub int_range: (i64, i64),
    pub constants: BTreeMap<String, i64>,
    pub functions: BTreeMap<String, FnInterp>,
    /// Argument tuples for which the predicate holds.
    pub predicates: BTreeMap<String, BTreeSet<Vec<i64>>>,
    /// Values of free variables.
    pub vars: BTreeMap<String, i64>,
    arg_sorts: BTreeMap<String, Vec<Sort>>,
}

impl Interpretation {
    pub fn new(int_range: (i64, i64)) -> Self {
        Interpretation {
            carriers: BTreeMap::new(),
            int_range,
            constants: BTreeMap::new(),
            functions: BTreeMap::new(),
            predicates: BTreeMap::new(),
            vars: BTreeMap::new(),
            arg_sorts: BTreeMap::new(),
        }
    }

    /// Function argument sorts are needed to know which arguments to clamp.
    pub fn with_signature(mut self, sig: &Signature) -> Self {
        for (f, (args, _)) in &sig.functions {
            self.arg_sorts.insert(f.clone(), args.clone());
        }
        self
    }

    fn clamp(&self, f: &str, args: &mut [i64]) {
        if let Some(sorts) = self.arg_sorts.get(f) {
            for (a, s) in args.iter_mut().zip(sorts) {
                if *s == Sort::Int {
                    *a = (*a).clamp(self.int_range.0, self.int_range.1);
                }
            }
        }
    }

    fn domain(&self, s: &Sort) -> Result<std::ops::RangeInclusive<i64>, EvalError> {
        match s {
            Sort::Int => Ok(self.int_range.0..=self.int_range.1),
            Sort::Named(n) => {
                let k = *self.carriers.get(n).ok_or_else(|| EvalError::Uncovered(n.clone()))?;
                Ok(0..=k - 1)
            }
        }
    }
}

fn term(t: &Term, i: &Interpretation, env: &mut Vec<(String, i64)>) -> Result<i64, EvalError> {
    Ok(match t {
        Term::Var(n, _) => match env.iter().rev().find(|(b, _)| b == n) {
            Some((_, v)) => *v,
            None => *i.vars.get(n).ok_or_else(|| EvalError::Uncovered(n.clone()))?,
        },
        Term::Const(c) => *i.constants.get(c).ok_or_else(|| EvalError::Uncovered(c.clone()))?,
        Term::Lit(n) => *n,
        Term::App(f, args) => {
            let mut vals = args.iter().map(|a| term(a, i, env)).collect::<Result<Vec<_>, _>>()?;
            match i.functions.get(f).ok_or_else(|| EvalError::Uncovered(f.clone()))? {
                FnInterp::Native(g) => g(&vals),
                FnInterp::Table(tab) => {
                    i.clamp(f, &mut vals);
                    *tab.get(&vals).ok_or_else(|| EvalError::Uncovered(f.clone()))?
                }
            }
        }
        Term::Add(a, b) => term(a, i, env)?
            .checked_add(term(b, i, env)?)
            .ok_or(EvalError::Overflow)?,
        Term::Sub(a, b) => term(a, i, env)?
            .checked_sub(term(b, i, env)?)
            .ok_or(EvalError::Overflow)?,
        Term::Mul(k, a) => k.checked_mul(term(a, i, env)?).ok_or(EvalError::Overflow)?,
    })
}

fn formula(f: &Formula, i: &Interpretation, env: &mut Vec<(String, i64)>) -> Result<bool, EvalError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Pred(p, args) => {
            let vals = args.iter().map(|a| term(a, i, env)).collect::<Result<Vec<_>, _>>()?;
            i.predicates
                .get(p)
                .ok_or_else(|| EvalError::Uncovered(p.clone()))?
                .contains(&vals)
        }
        Formula::Eq(a, b) => term(a, i, env)? == term(b, i, env)?,
        Formula::Cmp(op, a, b) => op.holds(term(a, i, env)?, term(b, i, env)?),
        Formula::Not(a) => !formula(a, i, env)?,
        Formula::And(a, b) => formula(a, i, env)? & formula(b, i, env)?,
        Formula::Or(a, b) => formula(a, i, env)? | formula(b, i, env)?,
        Formula::Imp(a, b) => !formula(a, i, env)? | formula(b, i, env)?,
        Formula::Forall(x, s, b) | Formula::Exists(x, s, b) => {
            let universal = matches!(f, Formula::Forall(..));
            let mut result = universal;
            for v in i.domain(s)? {
                env.push((x.clone(), v));
                let r = formula(b, i, env);
                env.pop();
                if r? != universal {
                    result = !universal;
                    break;
                }
            }
            result
        }
    })
}

pub fn eval(f: &Formula, i: &Interpretation) -> Result<bool, EvalError> {
    formula(f, i, &mut Vec::new())
}

/// Truth of `Γ ⊢ φ` in `i`: if every hypothesis holds, the goal holds.
pub fn eval_sequent(s: &Sequent, i: &Interpretation) -> Result<bool, EvalError> {
    for h in &s.context {
        if !eval(&h.formula, i)? {
            return Ok(true);
        }
    }
    eval(&s.goal, i)
}

enum Slot {
    Const(String, Vec<i64>),
    Var(String, Vec<i64>),
    FnEntry(String, Vec<i64>, Vec<i64>),
    PredEntry(String, Vec<i64>),
}

impl Slot {
    fn arity(&self) -> usize {
        match self {
            Slot::Const(_, d) | Slot::Var(_, d) | Slot::FnEntry(_, _, d) => d.len(),
            Slot::PredEntry(..) => 2,
        }
    }
}

/// Every interpretation of the given symbols and free variables over fixed
/// carrier sizes, enumerated odometer-style.
pub struct Enumerator {
    base: Interpretation,
    slots: Vec<Slot>,
    counter: Vec<usize>,
    done: bool,
}

fn tuples(domains: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for d in domains {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                d.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

impl Enumerator {
    /// `symbols` restricts which declared symbols get interpreted; `free`
    /// lists free variables with their sorts.
    pub fn new(
        sig: &Signature,
        symbols: &BTreeSet<String>,
        free: &BTreeMap<String, Sort>,
        carrier: i64,
        int_range: (i64, i64),
    ) -> Self {
        let mut base = Interpretation::new(int_range).with_signature(sig);
        for s in &sig.sorts {
            base.carriers.insert(s.clone(), carrier);
        }
        let dom = |s: &Sort| -> Vec<i64> {
            match s {
                Sort::Int => (int_range.0..=int_range.1).collect(),
                Sort::Named(_) => (0..carrier).collect(),
            }
        };
        let mut slots = Vec::new();
        for (c, s) in &sig.constants {
            if symbols.contains(c) {
                slots.push(Slot::Const(c.clone(), dom(s)));
            }
        }
        for (f, (args, res)) in &sig.functions {
            if symbols.contains(f) {
                base.functions.insert(f.clone(), FnInterp::Table(BTreeMap::new()));
                let ds: Vec<_> = args.iter().map(dom).collect();
                for t in tuples(&ds) {
                    slots.push(Slot::FnEntry(f.clone(), t, dom(res)));
                }
            }
        }
        for (p, args) in &sig.predicates {
            if symbols.contains(p) {
                base.predicates.insert(p.clone(), BTreeSet::new());
                let ds: Vec<_> = args.iter().map(dom).collect();
                for t in tuples(&ds) {
                    slots.push(Slot::PredEntry(p.clone(), t));
                }
            }
        }
        for (v, s) in free {
            slots.push(Slot::Var(v.clone(), dom(s)));
        }
        let counter = vec![0; slots.len()];
        Enumerator {
            base,
            slots,
            counter,
            done: false,
        }
    }

    /// Number of interpretations, saturating.
    pub fn size(&self) -> u128 {
        self.slots
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.arity() as u128))
    }

    fn build(&self) -> Interpretation {
        let mut i = self.base.clone();
        for (slot, &c) in self.slots.iter().zip(&self.counter) {
            match slot {
                Slot::Const(n, d) => {
                    i.constants.insert(n.clone(), d[c]);
                }
                Slot::Var(n, d) => {
                    i.vars.insert(n.clone(), d[c]);
                }
                Slot::FnEntry(f, args, d) => {
                    if let Some(FnInterp::Table(t)) = i.functions.get_mut(f) {
                        t.insert(args.clone(), d[c]);
                    }
                }
                Slot::PredEntry(p, args) => {
                    if c == 1 {
                        i.predicates
                            .get_mut(p)
                            .expect("predicate registered")
                            .insert(args.clone());
                    }
                }
            }
        }
        i
    }
}

impl Iterator for Enumerator {
    type Item = Interpretation;

    fn next(&mut self) -> Option<Interpretation> {
        if self.done || self.slots.iter().any(|s| s.arity() == 0) {
            return None;
        }
        let out = self.build();
        let mut k = 0;
        loop {
            if k == self.slots.len() {
                self.done = true;
                break;
            }
            self.counter[k] += 1;
            if self.counter[k] < self.slots[k].arity() {
                break;
            }
            self.counter[k] = 0;
            k += 1;
        }
        Some(out)
    }
}

/// Declared symbols occurring in a sequent.
pub fn sequent_symbols(s: &Sequent) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    s.goal.names_into(&mut out);
    for h in &s.context {
        h.formula.names_into(&mut out);
    }
    out
}

/// Free variables of a sequent with a sort per variable.
pub fn sequent_free_vars(s: &Sequent) -> BTreeMap<String, Sort> {
    let mut out = BTreeMap::new();
    let mut add = |f: &Formula| {
        for (v, sorts) in f.free_var_sorts() {
            if let Some(s) = sorts.into_iter().next() {
                out.entry(v).or_insert(s);
            }
        }
    };
    add(&s.goal);
    s.context.iter().for_each(|h| add(&h.formula));
    out
}

/// Whether `s` holds in every interpretation with carriers of size
/// `1..=max_carrier`. Returns the first counterexample otherwise.
pub fn valid_bounded(
    s: &Sequent,
    sig: &Signature,
    max_carrier: i64,
    int_range: (i64, i64),
) -> Result<Option<Interpretation>, EvalError> {
    let symbols = sequent_symbols(s);
    let free = sequent_free_vars(s);
    // Free variables are quantified inside the evaluator rather than
    // enumerated as part of each interpretation.
    let body = s
        .context
        .iter()
        .rev()
        .fold(s.goal.clone(), |acc, h| Formula::imp(h.formula.clone(), acc));
    let closed = free
        .iter()
        .rev()
        .fold(body, |acc, (v, sort)| Formula::forall(v, sort.clone(), acc));
    for k in 1..=max_carrier {
        for i in Enumerator::new(sig, &symbols, &BTreeMap::new(), k, int_range) {
            if !eval(&closed, &i)? {
                let ds: Vec<Vec<i64>> = free
                    .values()
                    .map(|sort| i.domain(sort).map(Iterator::collect))
                    .collect::<Result<_, _>>()?;
                for vals in tuples(&ds) {
                    let mut j = i.clone();
                    j.vars.extend(free.keys().cloned().zip(vals));
                    if !eval_sequent(s, &j)? {
                        return Ok(Some(j));
                    }
                }
                unreachable!("closed sequent is false but no assignment falsifies it");
            }
        }
    }
    Ok(None)
}
