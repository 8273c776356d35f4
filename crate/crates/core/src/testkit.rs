//! Random generators and brute-force oracles shared by the property suites,
//! the acceptance harness and the benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cert::{certify, LiaCert, RupProof};
use crate::kernel::{Kernel, Rule, Theorem};
use crate::logic::eval::{sequent_free_vars, sequent_symbols, valid_bounded, Enumerator, Interpretation};
use crate::logic::{
    replace_at, term_at, CmpOp, Direction, Formula, Hyp, Position, Sequent, Signature, Sort, Subexpr, Term,
};
use crate::solver::{discharge, Budgets, DischargeOutcome};
use crate::translate::{CnfProblem, LiaProblem, LinConstraint, LinOp};
use num_rational::BigRational;

/// Sort `S` with `a, b: S`, `f: S -> S`, `P, Q: S`, props `A, B` and `k: Int`.
pub fn soundness_signature() -> Signature {
    let s = || Sort::named("S");
    let mut sig = Signature::new();
    sig.add_sort("S").expect("fresh");
    sig.add_constant("a", s()).expect("fresh");
    sig.add_constant("b", s()).expect("fresh");
    sig.add_constant("k", Sort::Int).expect("fresh");
    sig.add_function("f", vec![s()], s()).expect("fresh");
    sig.add_predicate("P", vec![s()]).expect("fresh");
    sig.add_predicate("Q", vec![s()]).expect("fresh");
    sig.add_predicate("A", vec![]).expect("fresh");
    sig.add_predicate("B", vec![]).expect("fresh");
    sig
}

const HYP_NAMES: [&str; 4] = ["h0", "h1", "h2", "h3"];
const FREE_S: [&str; 2] = ["u", "v"];
const RULES: usize = 26;
const POOL_CAP: usize = 48;

fn s_sort() -> Sort {
    Sort::named("S")
}

/// Builds random kernel derivations over [`soundness_signature`]. Each rule
/// has a targeted constructor so that most attempts produce a theorem.
pub struct DerivationGen<'k, R: Rng> {
    kernel: &'k Kernel,
    rng: R,
    pool: Vec<Theorem>,
    fresh: usize,
    /// Attempts per rule id, and how many the kernel accepted.
    pub attempts: Vec<(usize, usize)>,
}

impl<'k, R: Rng> DerivationGen<'k, R> {
    pub fn new(kernel: &'k Kernel, rng: R) -> Self {
        DerivationGen {
            kernel,
            rng,
            pool: Vec::new(),
            fresh: 0,
            attempts: vec![(0, 0); RULES],
        }
    }

    /// Runs `attempts` random rule applications on a fresh pool and returns
    /// every theorem the kernel accepted.
    pub fn derive(&mut self, attempts: usize) -> Vec<Theorem> {
        self.pool.clear();
        let mut out = Vec::new();
        for _ in 0..attempts {
            if let Some(t) = self.step() {
                out.push(t);
            }
        }
        out
    }

    /// One random rule application against the current pool.
    pub fn step(&mut self) -> Option<Theorem> {
        let which = if self.pool.is_empty() {
            *[0usize, 14, 15, 25].choose(&mut self.rng).expect("nonempty")
        } else {
            self.rng.gen_range(0..RULES)
        };
        self.attempts[which].0 += 1;
        let t = self.try_rule(which)?;
        self.attempts[which].1 += 1;
        if self.pool.len() >= POOL_CAP {
            let i = self.rng.gen_range(0..self.pool.len());
            self.pool.swap_remove(i);
        }
        self.pool.push(t.clone());
        Some(t)
    }

    fn fresh(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    fn apply(&self, rule: Rule, premises: &[Theorem]) -> Option<Theorem> {
        self.kernel.apply(rule, premises).ok()
    }

    fn pick(&mut self) -> Option<Theorem> {
        self.pool.choose(&mut self.rng).cloned()
    }

    fn pick_where(&mut self, p: impl Fn(&Formula) -> bool) -> Option<Theorem> {
        let c: Vec<&Theorem> = self.pool.iter().filter(|t| p(&t.sequent().goal)).collect();
        c.choose(&mut self.rng).map(|t| (*t).clone())
    }

    fn hyp_name(&mut self) -> String {
        HYP_NAMES.choose(&mut self.rng).expect("nonempty").to_string()
    }

    fn s_term(&mut self, depth: usize, bound: &[String]) -> Term {
        match self.rng.gen_range(0..if depth == 0 { 3 } else { 4 }) {
            0 => Term::cnst(if self.rng.gen_bool(0.5) { "a" } else { "b" }),
            1 => match bound.choose(&mut self.rng) {
                Some(x) => Term::var(x, s_sort()),
                None => Term::cnst("a"),
            },
            2 => Term::var(FREE_S.choose(&mut self.rng).expect("nonempty"), s_sort()),
            _ => Term::app("f", vec![self.s_term(depth - 1, bound)]),
        }
    }

    fn int_term(&mut self) -> Term {
        match self.rng.gen_range(0..4) {
            0 => Term::cnst("k"),
            1 => Term::Lit(self.rng.gen_range(-2..=2)),
            2 => Term::add(Term::cnst("k"), Term::Lit(self.rng.gen_range(-2..=2))),
            _ => Term::var("m", Sort::Int),
        }
    }

    fn cmp_op(&mut self) -> CmpOp {
        *[CmpOp::Le, CmpOp::Lt, CmpOp::Ge, CmpOp::Gt]
            .choose(&mut self.rng)
            .expect("nonempty")
    }

    fn atom(&mut self, bound: &[String]) -> Formula {
        match self.rng.gen_range(0..7) {
            0 => Formula::pred("A", vec![]),
            1 => Formula::pred("B", vec![]),
            2 => Formula::pred("P", vec![self.s_term(1, bound)]),
            3 => Formula::pred("Q", vec![self.s_term(1, bound)]),
            4 => Formula::Eq(self.s_term(1, bound), self.s_term(1, bound)),
            5 => {
                let op = self.cmp_op();
                Formula::Cmp(op, self.int_term(), self.int_term())
            }
            _ => {
                if self.rng.gen_bool(0.5) {
                    Formula::True
                } else {
                    Formula::False
                }
            }
        }
    }

    /// Random formula; binders range over `S` only.
    pub fn formula(&mut self, depth: usize) -> Formula {
        self.formula_in(depth, &mut Vec::new())
    }

    fn formula_in(&mut self, depth: usize, bound: &mut Vec<String>) -> Formula {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.atom(bound);
        }
        match self.rng.gen_range(0..6) {
            0 => Formula::not(self.formula_in(depth - 1, bound)),
            1 => Formula::and(self.formula_in(depth - 1, bound), self.formula_in(depth - 1, bound)),
            2 => Formula::or(self.formula_in(depth - 1, bound), self.formula_in(depth - 1, bound)),
            3 => Formula::imp(self.formula_in(depth - 1, bound), self.formula_in(depth - 1, bound)),
            q => {
                let x = if bound.iter().any(|b| b == "x") { "y" } else { "x" }.to_string();
                bound.push(x.clone());
                let body = self.formula_in(depth - 1, bound);
                bound.pop();
                if q == 4 {
                    Formula::forall(&x, s_sort(), body)
                } else {
                    Formula::exists(&x, s_sort(), body)
                }
            }
        }
    }

    fn assume(&self, name: &str, formula: Formula) -> Option<Theorem> {
        self.apply(
            Rule::Assume {
                name: name.into(),
                formula,
            },
            &[],
        )
    }

    /// A theorem with goal `goal` and a hypothesis `formula`, and that
    /// hypothesis' name.
    fn case_for(&mut self, goal: &Formula, formula: &Formula) -> Option<(String, Theorem)> {
        let found: Vec<(String, Theorem)> = self
            .pool
            .iter()
            .filter(|t| &t.sequent().goal == goal)
            .filter_map(|t| {
                let h = t.sequent().context.iter().find(|h| &h.formula == formula)?;
                Some((h.name.clone(), t.clone()))
            })
            .collect();
        if let Some(c) = found.choose(&mut self.rng) {
            if self.rng.gen_bool(0.7) {
                return Some(c.clone());
            }
        }
        let base = self.pick_where(|g| g == goal)?;
        let name = self.hyp_name();
        let t = self.apply(
            Rule::Weaken {
                name: name.clone(),
                formula: formula.clone(),
            },
            &[base],
        )?;
        Some((name, t))
    }

    fn or_e(&mut self) -> Option<Theorem> {
        let disj = match self.pick_where(|g| matches!(g, Formula::Or(..))) {
            Some(d) => d,
            None => {
                let t = self.pick()?;
                let right = self.formula(1);
                self.apply(Rule::OrIL { right }, &[t])?
            }
        };
        let Formula::Or(a, b) = disj.sequent().goal.clone() else {
            return None;
        };
        let c = self.pick()?.sequent().goal.clone();
        let (left, c1) = self.case_for(&c, &a)?;
        let (right, c2) = self.case_for(&c, &b)?;
        self.apply(Rule::OrE { left, right }, &[disj, c1, c2])
    }

    fn discharge_hyp(&mut self, t: &Theorem) -> (String, Formula) {
        let ctx = &t.sequent().context;
        if !ctx.is_empty() && self.rng.gen_bool(0.8) {
            let h = ctx.choose(&mut self.rng).expect("nonempty");
            return (h.name.clone(), h.formula.clone());
        }
        let name = self.hyp_name();
        (name, self.formula(1))
    }

    fn not_e(&mut self) -> Option<Theorem> {
        if let Some(n) = self.pick_where(|g| matches!(g, Formula::Not(_))) {
            let Formula::Not(a) = n.sequent().goal.clone() else {
                return None;
            };
            let arg = match self.pick_where(|g| g == &*a) {
                Some(t) => t,
                None => {
                    let name = self.hyp_name();
                    self.assume(&name, (*a).clone())?
                }
            };
            return self.apply(Rule::NotE, &[n, arg]);
        }
        let a = self.formula(1);
        let (n1, n2) = (self.hyp_name(), self.hyp_name());
        let n = self.assume(&n1, Formula::not(a.clone()))?;
        let p = self.assume(&n2, a)?;
        self.apply(Rule::NotE, &[n, p])
    }

    fn raa(&mut self) -> Option<Theorem> {
        let t = self.pick_where(|g| *g == Formula::False)?;
        let negs: Vec<(String, Formula)> = t
            .sequent()
            .context
            .iter()
            .filter_map(|h| match &h.formula {
                Formula::Not(a) => Some((h.name.clone(), (**a).clone())),
                _ => None,
            })
            .collect();
        let (name, formula) = match negs.choose(&mut self.rng) {
            Some(c) => c.clone(),
            None => (self.hyp_name(), self.formula(1)),
        };
        self.apply(Rule::Raa { name, formula }, &[t])
    }

    fn eq_sides(t: &Theorem) -> Option<(Term, Term)> {
        match &t.sequent().goal {
            Formula::Eq(l, r) => Some((l.clone(), r.clone())),
            _ => None,
        }
    }

    fn trans(&mut self) -> Option<Theorem> {
        let t1 = self.pick_where(|g| matches!(g, Formula::Eq(..)))?;
        let (_, mid) = Self::eq_sides(&t1)?;
        let t2 = match self.pick_where(|g| matches!(g, Formula::Eq(l, _) if *l == mid)) {
            Some(t) if self.rng.gen_bool(0.8) => t,
            _ => match self.pick_where(|g| matches!(g, Formula::Eq(..))) {
                Some(t) if self.rng.gen_bool(0.3) => t,
                _ => self.apply(Rule::Refl { term: mid }, &[])?,
            },
        };
        self.apply(Rule::Trans, &[t1, t2])
    }

    fn cong(&mut self) -> Option<Theorem> {
        let t = self.pick_where(|g| matches!(g, Formula::Eq(..)))?;
        let (a, _) = Self::eq_sides(&t)?;
        let (term, arg) = match self.kernel.signature().sort_of(&a).ok()? {
            Sort::Int => {
                let lit = Term::Lit(self.rng.gen_range(-2..=2));
                if self.rng.gen_bool(0.5) {
                    (Term::add(a, lit), 0)
                } else {
                    (Term::add(lit, a), 1)
                }
            }
            Sort::Named(_) => (Term::app("f", vec![a]), 0),
        };
        self.apply(Rule::Cong { term, arg }, &[t])
    }

    fn subst_eq(&mut self) -> Option<Theorem> {
        let eq = self.pick_where(|g| matches!(g, Formula::Eq(..)))?;
        let (l, r) = Self::eq_sides(&eq)?;
        let target = self.pick()?;
        let direction = if self.rng.gen_bool(0.5) {
            Direction::Ltr
        } else {
            Direction::Rtl
        };
        let from = if direction == Direction::Ltr { &l } else { &r };
        let goal = &target.sequent().goal;
        let hits: Vec<Position> = term_positions(goal)
            .into_iter()
            .filter(|p| term_at(goal, p).map(|(t, _)| t == from).unwrap_or(false))
            .collect();
        let position = hits.choose(&mut self.rng)?.clone();
        self.apply(Rule::SubstEq { position, direction }, &[eq, target])
    }

    fn forall_e(&mut self) -> Option<Theorem> {
        let t = self.pick_where(|g| matches!(g, Formula::Forall(_, Sort::Named(_), _)))?;
        let term = self.s_term(1, &[]);
        self.apply(Rule::ForallE { term }, &[t])
    }

    fn forall_i(&mut self) -> Option<Theorem> {
        let t = self.pick()?;
        let sorts = t.sequent().goal.free_var_sorts();
        let cands: Vec<String> = sorts
            .iter()
            .filter(|(_, ss)| ss.iter().all(|s| *s == s_sort()))
            .map(|(v, _)| v.clone())
            .collect();
        let var = match cands.choose(&mut self.rng) {
            Some(v) if self.rng.gen_bool(0.8) => v.clone(),
            _ => FREE_S.choose(&mut self.rng).expect("nonempty").to_string(),
        };
        self.apply(Rule::ForallI { var, sort: s_sort() }, &[t])
    }

    fn exists_i(&mut self) -> Option<Theorem> {
        let t = self.pick()?;
        let goal = t.sequent().goal.clone();
        let sig = self.kernel.signature();
        let cands: Vec<(Position, Term)> = term_positions(&goal)
            .into_iter()
            .filter_map(|p| {
                let (term, _) = term_at(&goal, &p).ok()?;
                matches!(sig.sort_of(term), Ok(Sort::Named(_))).then(|| (p.clone(), term.clone()))
            })
            .collect();
        let (pos, witness) = cands.choose(&mut self.rng)?.clone();
        let z = self.fresh("z");
        let body = replace_at(&goal, &pos, &Term::var(&z, s_sort()), sig).ok()?;
        let target = Formula::exists(&z, s_sort(), body);
        self.apply(Rule::ExistsI { witness, target }, &[t])
    }

    fn exists_e(&mut self) -> Option<Theorem> {
        let ex = self.pick_where(|g| matches!(g, Formula::Exists(_, Sort::Named(_), _)))?;
        let Formula::Exists(x, _, body) = ex.sequent().goal.clone() else {
            return None;
        };
        let var = self.fresh("c");
        let inst = body.subst(&x, &Term::var(&var, s_sort()));
        let c = self.pick()?.sequent().goal.clone();
        let (name, case) = self.case_for(&c, &inst)?;
        self.apply(
            Rule::ExistsE {
                var,
                sort: s_sort(),
                name,
            },
            &[ex, case],
        )
    }

    /// Admits `seq` through the solver and checker when they can prove it.
    fn certified(&self, seq: &Sequent) -> Option<Theorem> {
        certified_leaf(self.kernel, seq)
    }

    fn induction(&mut self) -> Option<Theorem> {
        let n = Term::var("n", Sort::Int);
        let c = self.rng.gen_range(0..=2);
        let lhs = Term::add(Term::Mul(c, Box::new(n)), self.int_term());
        let op = self.cmp_op();
        let mut body = Formula::Cmp(op, lhs, self.int_term());
        if self.rng.gen_bool(0.2) {
            body = Formula::or(body, self.atom(&[]));
        }
        let eigen = self.fresh("e");
        let e = Term::var(&eigen, Sort::Int);
        let base = self.certified(&Sequent::new(vec![], body.subst("n", &Term::Lit(0))))?;
        let (ge, ih) = ("ge".to_string(), "ih".to_string());
        let step_seq = Sequent::new(
            vec![
                Hyp::new(&ge, Formula::Cmp(CmpOp::Ge, e.clone(), Term::Lit(0))),
                Hyp::new(&ih, body.subst("n", &e)),
            ],
            body.subst("n", &Term::add(e, Term::Lit(1))),
        );
        let step = self.certified(&step_seq)?;
        self.apply(
            Rule::InductionInt {
                var: "n".into(),
                eigen,
                ge,
                ih,
                body,
            },
            &[base, step],
        )
    }

    fn cert_leaf(&mut self) -> Option<Theorem> {
        let context = match self.pick() {
            Some(t) if self.rng.gen_bool(0.6) => t.sequent().context.clone(),
            _ => Vec::new(),
        };
        let goal = match self.rng.gen_range(0..4) {
            0 => self.formula(2),
            1 => {
                let f = self.formula(1);
                Formula::or(f.clone(), Formula::not(f))
            }
            2 => match context.choose(&mut self.rng) {
                Some(h) => Formula::or(self.formula(1), h.formula.clone()),
                None => Formula::imp(Formula::pred("A", vec![]), Formula::pred("A", vec![])),
            },
            _ => {
                let t = self.int_term();
                Formula::Cmp(CmpOp::Lt, t.clone(), Term::add(t, Term::Lit(self.rng.gen_range(0..=2))))
            }
        };
        self.certified(&Sequent::new(context, goal))
    }

    fn try_rule(&mut self, which: usize) -> Option<Theorem> {
        match which {
            0 => {
                let name = self.hyp_name();
                let f = self.formula(2);
                self.assume(&name, f)
            }
            1 => {
                let t = self.pick()?;
                let (name, formula) = (self.hyp_name(), self.formula(1));
                self.apply(Rule::Weaken { name, formula }, &[t])
            }
            2 => {
                let (a, b) = (self.pick()?, self.pick()?);
                self.apply(Rule::AndI, &[a, b])
            }
            3 => {
                let t = self.pick_where(|g| matches!(g, Formula::And(..)))?;
                self.apply(Rule::AndEL, &[t])
            }
            4 => {
                let t = self.pick_where(|g| matches!(g, Formula::And(..)))?;
                self.apply(Rule::AndER, &[t])
            }
            5 => {
                let t = self.pick()?;
                let right = self.formula(1);
                self.apply(Rule::OrIL { right }, &[t])
            }
            6 => {
                let t = self.pick()?;
                let left = self.formula(1);
                self.apply(Rule::OrIR { left }, &[t])
            }
            7 => self.or_e(),
            8 => {
                let t = self.pick()?;
                let (name, antecedent) = self.discharge_hyp(&t);
                self.apply(Rule::ImpI { name, antecedent }, &[t])
            }
            9 => {
                let imp = self.pick_where(|g| matches!(g, Formula::Imp(..)))?;
                let Formula::Imp(a, _) = imp.sequent().goal.clone() else {
                    return None;
                };
                let arg = match self.pick_where(|g| g == &*a) {
                    Some(t) => t,
                    None => {
                        let name = self.hyp_name();
                        self.assume(&name, (*a).clone())?
                    }
                };
                self.apply(Rule::ImpE, &[imp, arg])
            }
            10 => {
                let t = self.pick_where(|g| *g == Formula::False)?;
                let (name, formula) = self.discharge_hyp(&t);
                self.apply(Rule::NotI { name, formula }, &[t])
            }
            11 => self.not_e(),
            12 => self.raa(),
            13 => {
                let t = self.pick_where(|g| *g == Formula::False)?;
                let formula = self.formula(2);
                self.apply(Rule::FalsumE { formula }, &[t])
            }
            14 => self.apply(Rule::TopI, &[]),
            15 => {
                let term = if self.rng.gen_bool(0.7) {
                    self.s_term(2, &[])
                } else {
                    self.int_term()
                };
                self.apply(Rule::Refl { term }, &[])
            }
            16 => {
                let t = self.pick_where(|g| matches!(g, Formula::Eq(..)))?;
                self.apply(Rule::Sym, &[t])
            }
            17 => self.trans(),
            18 => self.cong(),
            19 => self.subst_eq(),
            20 => self.forall_e(),
            21 => self.forall_i(),
            22 => self.exists_i(),
            23 => self.exists_e(),
            24 => self.induction(),
            _ => self.cert_leaf(),
        }
    }
}

/// Rule names in the order used by [`DerivationGen::attempts`]; the last
/// entry counts certified leaves.
pub const RULE_NAMES: [&str; RULES] = [
    "assume",
    "weaken",
    "and_i",
    "and_e_l",
    "and_e_r",
    "or_i_l",
    "or_i_r",
    "or_e",
    "imp_i",
    "imp_e",
    "not_i",
    "not_e",
    "raa",
    "falsum_e",
    "top_i",
    "refl",
    "sym",
    "trans",
    "cong",
    "subst_eq",
    "forall_e",
    "forall_i",
    "exists_i",
    "exists_e",
    "induction_int",
    "certified",
];

/// Proves `seq` with the solvers, checks the certificate and admits it.
pub fn certified_leaf(kernel: &Kernel, seq: &Sequent) -> Option<Theorem> {
    let DischargeOutcome::Certified { certificate, .. } = discharge(seq, Budgets::default()) else {
        return None;
    };
    let token = certify(seq, &certificate).ok()?;
    kernel.admit_certified(seq, &token).ok()
}

/// Every position in `f` that addresses a term.
pub fn term_positions(f: &Formula) -> Vec<Position> {
    fn go(e: Subexpr<'_>, path: &mut Vec<usize>, out: &mut Vec<Position>) {
        match e {
            Subexpr::Formula(g) => {
                for (i, c) in g.children().into_iter().enumerate() {
                    path.push(i);
                    go(c, path, out);
                    path.pop();
                }
            }
            Subexpr::Term(t) => {
                out.push(Position(path.clone()));
                for (i, c) in t.children().into_iter().enumerate() {
                    path.push(i);
                    go(Subexpr::Term(c), path, out);
                    path.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    go(Subexpr::Formula(f), &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Debug)]
pub enum BoundedCheck {
    Valid,
    Counterexample(Box<Interpretation>),
    /// Too many interpretations, or a symbol the evaluator cannot cover.
    Skipped,
}

/// Largest number of interpretations [`check_bounded`] will enumerate.
pub const ENUMERATION_LIMIT: u128 = 400_000;

/// Checks `seq` in every interpretation with carriers up to `max_carrier`
/// and integers in `int_range`.
pub fn check_bounded(seq: &Sequent, sig: &Signature, max_carrier: i64, int_range: (i64, i64)) -> BoundedCheck {
    let symbols = sequent_symbols(seq);
    let free = sequent_free_vars(seq);
    let total: u128 = (1..=max_carrier)
        .map(|k| Enumerator::new(sig, &symbols, &free, k, int_range).size())
        .sum();
    if total > ENUMERATION_LIMIT {
        return BoundedCheck::Skipped;
    }
    match valid_bounded(seq, sig, max_carrier, int_range) {
        Ok(None) => BoundedCheck::Valid,
        Ok(Some(i)) => BoundedCheck::Counterexample(Box::new(i)),
        Err(_) => BoundedCheck::Skipped,
    }
}

/// Random CNF over `1..=num_vars` with clauses of width `1..=max_width`.
pub fn random_cnf(rng: &mut impl Rng, num_vars: u32, clauses: usize, max_width: usize) -> CnfProblem {
    let cs = (0..clauses)
        .map(|_| {
            let w = rng.gen_range(1..=max_width);
            (0..w)
                .map(|_| {
                    let v = rng.gen_range(1..=num_vars) as i32;
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect();
    CnfProblem::new(num_vars, cs)
}

/// Exhaustive satisfiability over all `2^n` assignments.
pub fn brute_force_sat(p: &CnfProblem) -> bool {
    let n = p.num_vars();
    assert!(n <= 24, "brute force over {n} variables");
    (0..1u32 << n).any(|m| {
        p.clauses().iter().all(|c| {
            c.iter().any(|&l| {
                let bit = m >> (l.unsigned_abs() - 1) & 1 == 1;
                bit == (l > 0)
            })
        })
    })
}

/// Every CNF over at most 4 variables from a deterministic generator:
/// for each variable count, `per_size` problems with 1 to 12 clauses.
pub fn small_cnf_pool(rng: &mut impl Rng, per_size: usize) -> Vec<CnfProblem> {
    (1..=4)
        .flat_map(|n| (0..per_size).map(move |i| (n, i)))
        .map(|(n, i)| random_cnf(rng, n, 1 + i % 12, 3))
        .collect()
}

fn random_lit(rng: &mut impl Rng, num_vars: u32) -> i32 {
    let v = rng.gen_range(1..=num_vars.max(1)) as i32;
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

/// A single random edit of a RUP proof.
pub fn mutate_rup(rng: &mut impl Rng, proof: &RupProof, num_vars: u32) -> RupProof {
    let mut cs = proof.clauses.clone();
    let n = cs.len();
    match rng.gen_range(0..7) {
        0 if n > 0 => {
            cs.remove(rng.gen_range(0..n));
        }
        1 if n > 0 => {
            let i = rng.gen_range(0..n);
            if cs[i].is_empty() {
                cs[i].push(random_lit(rng, num_vars));
            } else {
                let j = rng.gen_range(0..cs[i].len());
                cs[i][j] = -cs[i][j];
            }
        }
        2 if n > 0 => {
            let i = rng.gen_range(0..n);
            if !cs[i].is_empty() {
                let j = rng.gen_range(0..cs[i].len());
                cs[i].remove(j);
            }
        }
        3 => {
            let w = rng.gen_range(0..=2);
            let c = (0..w).map(|_| random_lit(rng, num_vars)).collect();
            cs.insert(rng.gen_range(0..=n), c);
        }
        4 if n > 1 => {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            cs.swap(i, j);
        }
        5 if n > 0 => {
            cs.truncate(rng.gen_range(0..n));
            cs.push(Vec::new());
        }
        _ => cs = vec![Vec::new()],
    }
    RupProof { clauses: cs }
}

/// A single random edit of the clause set.
pub fn mutate_cnf(rng: &mut impl Rng, p: &CnfProblem) -> CnfProblem {
    let mut cs = p.clauses().to_vec();
    let n = cs.len();
    if n == 0 {
        return p.clone();
    }
    let i = rng.gen_range(0..n);
    match rng.gen_range(0..3) {
        0 => {
            cs.remove(i);
        }
        1 => cs[i].push(random_lit(rng, p.num_vars())),
        _ => {
            if !cs[i].is_empty() {
                let j = rng.gen_range(0..cs[i].len());
                cs[i][j] = -cs[i][j];
            }
        }
    }
    CnfProblem::new(p.num_vars(), cs)
}

/// A random LIA problem over `nvars` variables: `rows` random constraints
/// followed by the box `-bound <= x_i <= bound`.
pub fn random_lia(rng: &mut impl Rng, nvars: usize, rows: usize, bound: i64) -> LiaProblem {
    let mut cs: Vec<LinConstraint> = (0..rows)
        .map(|_| {
            let coeffs = (0..nvars)
                .map(|v| (v, rng.gen_range(-3..=3)))
                .filter(|&(_, c)| c != 0)
                .collect();
            let op = *[LinOp::Le, LinOp::Ge, LinOp::Eq].choose(rng).expect("nonempty");
            LinConstraint::new(coeffs, op, rng.gen_range(-4..=4))
        })
        .collect();
    for v in 0..nvars {
        cs.push(LinConstraint::new(vec![(v, 1)], LinOp::Le, bound));
        cs.push(LinConstraint::new(vec![(v, 1)], LinOp::Ge, -bound));
    }
    let vars = (0..nvars).map(|i| format!("x{i}")).collect();
    LiaProblem::new(vars, cs)
}

/// Exhaustive integer feasibility inside `[-bound, bound]^n`.
pub fn brute_force_lia(p: &LiaProblem, bound: i64) -> bool {
    let n = p.vars().len();
    let mut m = vec![-bound; n];
    loop {
        if p.holds(&m) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == n {
                return false;
            }
            if m[i] < bound {
                m[i] += 1;
                break;
            }
            m[i] = -bound;
            i += 1;
        }
    }
}

/// A single random edit of the non-box constraints of a [`random_lia`]
/// problem; the box stays, so [`brute_force_lia`] remains exact.
pub fn mutate_lia_problem(rng: &mut impl Rng, p: &LiaProblem, rows: usize) -> LiaProblem {
    let mut cs = p.constraints().to_vec();
    let rows = rows.min(cs.len());
    if rows == 0 {
        return p.clone();
    }
    let i = rng.gen_range(0..rows);
    let c = &cs[i];
    let mut coeffs = c.coeffs.clone();
    let (mut op, mut rhs) = (c.op, c.rhs);
    match rng.gen_range(0..4) {
        0 => {
            // Dropped rows become `0 <= 0` so the box keeps its indices.
            coeffs.clear();
            (op, rhs) = (LinOp::Le, 0);
        }
        1 => rhs += if rng.gen_bool(0.5) { 1 } else { -1 },
        2 => {
            op = match op {
                LinOp::Le => LinOp::Ge,
                LinOp::Ge => LinOp::Eq,
                LinOp::Eq => LinOp::Le,
            }
        }
        _ => {
            if let Some(k) = coeffs.first_mut() {
                k.1 += if rng.gen_bool(0.5) { 1 } else { -1 };
            }
        }
    }
    cs[i] = LinConstraint::new(coeffs, op, rhs);
    LiaProblem::new(p.vars().to_vec(), cs)
}

fn perturb(rng: &mut impl Rng, q: &BigRational) -> BigRational {
    use num_traits::{One, Zero};
    let one = BigRational::one();
    match rng.gen_range(0..5) {
        0 => q + &one,
        1 => q - &one,
        2 => -q.clone(),
        3 => q * BigRational::from_integer(2.into()),
        _ => {
            if q.is_zero() {
                one
            } else {
                BigRational::zero()
            }
        }
    }
}

/// A single random edit of an LIA certificate.
pub fn mutate_lia(rng: &mut impl Rng, cert: &LiaCert) -> LiaCert {
    match cert {
        LiaCert::Farkas(ls) => {
            let mut ls = ls.clone();
            match rng.gen_range(0..4) {
                0 if !ls.is_empty() => {
                    let i = rng.gen_range(0..ls.len());
                    ls[i] = perturb(rng, &ls[i]);
                }
                1 if !ls.is_empty() => {
                    ls.pop();
                }
                2 => ls.push(BigRational::from_integer(rng.gen_range(0..3).into())),
                _ if ls.len() > 1 => {
                    let (i, j) = (rng.gen_range(0..ls.len()), rng.gen_range(0..ls.len()));
                    ls.swap(i, j);
                }
                _ => ls = vec![BigRational::from_integer(1.into()); ls.len().max(1)],
            }
            LiaCert::Farkas(ls)
        }
        LiaCert::Branch {
            var,
            bound,
            left,
            right,
        } => {
            let (mut var, mut bound, mut left, mut right) = (var.clone(), *bound, left.clone(), right.clone());
            match rng.gen_range(0..5) {
                0 => bound += if rng.gen_bool(0.5) { 1 } else { -1 },
                1 => std::mem::swap(&mut left, &mut right),
                2 => left = Box::new(mutate_lia(rng, &left)),
                3 => right = Box::new(mutate_lia(rng, &right)),
                _ => var = format!("{var}_"),
            }
            LiaCert::Branch {
                var,
                bound,
                left,
                right,
            }
        }
    }
}
