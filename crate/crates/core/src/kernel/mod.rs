//! The trusted kernel. [`Theorem`] values can only be produced here: by
//! applying a [`Rule`] to existing theorems, by replaying a proof object, or
//! by admitting a sequent against a checker-issued acceptance token.
//!
//! ```compile_fail
//! use psk_core::kernel::Theorem;
//! use psk_core::logic::{Formula, Sequent};
//! let forged = Theorem { seq: std::sync::Arc::new(Sequent::new(vec![], Formula::False)), proof: todo!() };
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cert::AcceptanceToken;
use crate::logic::{
    replace_at, term_at, CmpOp, Digest, Direction, Formula, Hyp, LogicError, Position, Sequent, Signature, Sort, Term,
};

mod proof;
#[cfg(test)]
mod tests;

pub use proof::{ProofObject, Step, StepKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    Assume {
        name: String,
        formula: Formula,
    },
    Weaken {
        name: String,
        formula: Formula,
    },
    AndI,
    #[serde(rename = "and_e_l")]
    AndEL,
    #[serde(rename = "and_e_r")]
    AndER,
    /// `A` ⊢ `A ∨ right`.
    OrIL {
        right: Formula,
    },
    /// `B` ⊢ `left ∨ B`.
    OrIR {
        left: Formula,
    },
    /// Discharges `left: A` in the second premise and `right: B` in the third.
    OrE {
        left: String,
        right: String,
    },
    ImpI {
        name: String,
        antecedent: Formula,
    },
    ImpE,
    NotI {
        name: String,
        formula: Formula,
    },
    NotE,
    /// Classical reductio: from `Γ, name: ¬A ⊢ ⊥` conclude `Γ ⊢ A`.
    Raa {
        name: String,
        formula: Formula,
    },
    FalsumE {
        formula: Formula,
    },
    TopI,
    Refl {
        term: Term,
    },
    Sym,
    Trans,
    /// From `a = b` conclude `term = term[arg := b]` where `term`'s child
    /// `arg` is `a`.
    Cong {
        term: Term,
        arg: usize,
    },
    SubstEq {
        position: Position,
        direction: Direction,
    },
    ForallE {
        term: Term,
    },
    ForallI {
        var: String,
        sort: Sort,
    },
    ExistsI {
        witness: Term,
        target: Formula,
    },
    ExistsE {
        var: String,
        sort: Sort,
        name: String,
    },
    /// Premises `Γ ⊢ P[var:=0]` and `Δ, ge: k ≥ 0, ih: P[var:=k] ⊢ P[var:=k+1]`
    /// with `k = eigen` fresh; concludes `∀var:Int. var ≥ 0 → P`.
    InductionInt {
        var: String,
        eigen: String,
        ge: String,
        ih: String,
        body: Formula,
    },
}

impl Rule {
    pub fn id(&self) -> &'static str {
        match self {
            Rule::Assume { .. } => "assume",
            Rule::Weaken { .. } => "weaken",
            Rule::AndI => "and_i",
            Rule::AndEL => "and_e_l",
            Rule::AndER => "and_e_r",
            Rule::OrIL { .. } => "or_i_l",
            Rule::OrIR { .. } => "or_i_r",
            Rule::OrE { .. } => "or_e",
            Rule::ImpI { .. } => "imp_i",
            Rule::ImpE => "imp_e",
            Rule::NotI { .. } => "not_i",
            Rule::NotE => "not_e",
            Rule::Raa { .. } => "raa",
            Rule::FalsumE { .. } => "falsum_e",
            Rule::TopI => "top_i",
            Rule::Refl { .. } => "refl",
            Rule::Sym => "sym",
            Rule::Trans => "trans",
            Rule::Cong { .. } => "cong",
            Rule::SubstEq { .. } => "subst_eq",
            Rule::ForallE { .. } => "forall_e",
            Rule::ForallI { .. } => "forall_i",
            Rule::ExistsI { .. } => "exists_i",
            Rule::ExistsE { .. } => "exists_e",
            Rule::InductionInt { .. } => "induction_int",
        }
    }

    fn arity(&self) -> usize {
        match self {
            Rule::Assume { .. } | Rule::TopI | Rule::Refl { .. } => 0,
            Rule::AndI | Rule::ImpE | Rule::NotE | Rule::Trans | Rule::SubstEq { .. } => 2,
            Rule::ExistsE { .. } | Rule::InductionInt { .. } => 2,
            Rule::OrE { .. } => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("{rule}: expected {expected} premise(s), got {found}")]
    Arity {
        rule: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{rule}: premise shape mismatch: {detail}")]
    PremiseShape { rule: &'static str, detail: String },
    #[error("{rule}: side condition violated: {condition}")]
    SideCondition { rule: &'static str, condition: String },
    #[error("hypothesis `{0}` occurs with two different formulas")]
    ContextClash(String),
    #[error("{rule}: {source}")]
    Logic {
        rule: &'static str,
        #[source]
        source: LogicError,
    },
    #[error("certificate for sequent {0} is not registered")]
    UnknownCertificate(Digest),
    #[error("acceptance token is for sequent {token}, not {sequent}")]
    TokenMismatch { token: Digest, sequent: Digest },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<KernelError>,
    },
    #[error("replayed conclusion `{found}` does not match the claim")]
    ConclusionMismatch { found: String },
    #[error("malformed proof object at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

pub type Result<T, E = KernelError> = std::result::Result<T, E>;

#[allow(clippy::large_enum_variant)]
#[derive(Debug)]
pub(crate) enum ProofNode {
    Rule { rule: Rule, premises: Vec<Arc<ProofNode>> },
    Cert(Digest),
}

/// A kernel-checked sequent together with its derivation.
#[derive(Clone, Debug)]
pub struct Theorem {
    seq: Arc<Sequent>,
    proof: Arc<ProofNode>,
}

impl Theorem {
    pub fn sequent(&self) -> &Sequent {
        &self.seq
    }

    pub fn proof_object(&self) -> ProofObject {
        ProofObject::record(self)
    }
}

/// Sequents admitted through checker tokens, keyed by canonical digest.
#[derive(Debug, Default)]
pub struct CertRegistry {
    inner: RwLock<BTreeMap<Digest, Sequent>>,
}

impl CertRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, d: &Digest) -> bool {
        self.inner.read().expect("registry lock").contains_key(d)
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, d: &Digest) -> Option<Sequent> {
        self.inner.read().expect("registry lock").get(d).cloned()
    }

    fn insert(&self, d: Digest, s: Sequent) {
        self.inner.write().expect("registry lock").entry(d).or_insert(s);
    }
}

fn side(rule: &'static str, condition: impl Into<String>) -> KernelError {
    KernelError::SideCondition {
        rule,
        condition: condition.into(),
    }
}

fn shape(rule: &'static str, detail: impl Into<String>) -> KernelError {
    KernelError::PremiseShape {
        rule,
        detail: detail.into(),
    }
}

/// Union of named contexts; a shared name must carry alpha-equal formulas.
fn merge(parts: &[&[Hyp]]) -> Result<Vec<Hyp>> {
    let mut out: Vec<Hyp> = Vec::new();
    for part in parts {
        for h in part.iter() {
            match out.iter().find(|o| o.name == h.name) {
                Some(o) if o.formula.alpha_eq(&h.formula) => {}
                Some(_) => return Err(KernelError::ContextClash(h.name.clone())),
                None => out.push(h.clone()),
            }
        }
    }
    Ok(out)
}

/// Removes hypothesis `name` (if present), requiring it to state `f`.
fn discharge(rule: &'static str, ctx: &[Hyp], name: &str, f: &Formula) -> Result<Vec<Hyp>> {
    if let Some(h) = ctx.iter().find(|h| h.name == name) {
        if !h.formula.alpha_eq(f) {
            return Err(side(
                rule,
                format!("discharged hypothesis `{name}` is `{}`, expected `{f}`", h.formula),
            ));
        }
    }
    Ok(ctx.iter().filter(|h| h.name != name).cloned().collect())
}

fn free_in_context(ctx: &[Hyp], v: &str) -> bool {
    ctx.iter().any(|h| h.formula.free_vars().contains(v))
}

pub struct Kernel {
    sig: Signature,
    certs: Arc<CertRegistry>,
}

impl Kernel {
    pub fn new(sig: Signature) -> Self {
        Kernel::with_registry(sig, Arc::new(CertRegistry::new()))
    }

    pub fn with_registry(sig: Signature, certs: Arc<CertRegistry>) -> Self {
        Kernel { sig, certs }
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn registry(&self) -> &Arc<CertRegistry> {
        &self.certs
    }

    fn wf(&self, rule: &'static str, f: &Formula) -> Result<()> {
        self.sig
            .check_formula(f)
            .map_err(|source| KernelError::Logic { rule, source })
    }

    fn sort(&self, rule: &'static str, t: &Term) -> Result<Sort> {
        self.sig
            .sort_of(t)
            .map_err(|source| KernelError::Logic { rule, source })
    }

    fn conclude(&self, rule: Rule, premises: &[Theorem], context: Vec<Hyp>, goal: Formula) -> Result<Theorem> {
        let seq = Sequent::new(context, goal);
        // A variable name must denote one sort throughout a sequent.
        let mut sorts: BTreeMap<String, BTreeSet<Sort>> = BTreeMap::new();
        for f in seq.context.iter().map(|h| &h.formula).chain([&seq.goal]) {
            for (v, s) in f.free_var_sorts() {
                sorts.entry(v).or_default().extend(s);
            }
        }
        if let Some((v, _)) = sorts.iter().find(|(_, s)| s.len() > 1) {
            return Err(side(rule.id(), format!("variable `{v}` used at two sorts")));
        }
        Ok(Theorem {
            seq: Arc::new(seq),
            proof: Arc::new(ProofNode::Rule {
                rule,
                premises: premises.iter().map(|p| p.proof.clone()).collect(),
            }),
        })
    }

    /// Applies one inference rule. Every side condition is checked here.
    pub fn apply(&self, rule: Rule, premises: &[Theorem]) -> Result<Theorem> {
        let id = rule.id();
        if premises.len() != rule.arity() {
            return Err(KernelError::Arity {
                rule: id,
                expected: rule.arity(),
                found: premises.len(),
            });
        }
        let p = |i: usize| premises[i].sequent();
        let (ctx, goal) = match &rule {
            Rule::Assume { name, formula } => {
                self.wf(id, formula)?;
                (vec![Hyp::new(name.clone(), formula.clone())], formula.clone())
            }
            Rule::Weaken { name, formula } => {
                self.wf(id, formula)?;
                let extra = [Hyp::new(name.clone(), formula.clone())];
                (merge(&[&p(0).context, &extra])?, p(0).goal.clone())
            }
            Rule::AndI => (
                merge(&[&p(0).context, &p(1).context])?,
                Formula::and(p(0).goal.clone(), p(1).goal.clone()),
            ),
            Rule::AndEL | Rule::AndER => match &p(0).goal {
                Formula::And(a, b) => {
                    let g = if matches!(rule, Rule::AndEL) { a } else { b };
                    (p(0).context.clone(), (**g).clone())
                }
                g => return Err(shape(id, format!("expected a conjunction, found `{g}`"))),
            },
            Rule::OrIL { right } => {
                self.wf(id, right)?;
                (p(0).context.clone(), Formula::or(p(0).goal.clone(), right.clone()))
            }
            Rule::OrIR { left } => {
                self.wf(id, left)?;
                (p(0).context.clone(), Formula::or(left.clone(), p(0).goal.clone()))
            }
            Rule::OrE { left, right } => {
                let Formula::Or(a, b) = &p(0).goal else {
                    return Err(shape(id, format!("expected a disjunction, found `{}`", p(0).goal)));
                };
                if !p(1).goal.alpha_eq(&p(2).goal) {
                    return Err(shape(
                        id,
                        format!("case goals differ: `{}` vs `{}`", p(1).goal, p(2).goal),
                    ));
                }
                let l = discharge(id, &p(1).context, left, a)?;
                let r = discharge(id, &p(2).context, right, b)?;
                (merge(&[&p(0).context, &l, &r])?, p(1).goal.clone())
            }
            Rule::ImpI { name, antecedent } => {
                self.wf(id, antecedent)?;
                let ctx = discharge(id, &p(0).context, name, antecedent)?;
                (ctx, Formula::imp(antecedent.clone(), p(0).goal.clone()))
            }
            Rule::ImpE => match &p(0).goal {
                Formula::Imp(a, b) if a.alpha_eq(&p(1).goal) => {
                    (merge(&[&p(0).context, &p(1).context])?, (**b).clone())
                }
                g => return Err(shape(id, format!("`{g}` is not an implication from `{}`", p(1).goal))),
            },
            Rule::NotI { name, formula } => {
                self.wf(id, formula)?;
                if p(0).goal != Formula::False {
                    return Err(shape(id, "premise must prove false"));
                }
                (
                    discharge(id, &p(0).context, name, formula)?,
                    Formula::not(formula.clone()),
                )
            }
            Rule::NotE => match &p(0).goal {
                Formula::Not(a) if a.alpha_eq(&p(1).goal) => (merge(&[&p(0).context, &p(1).context])?, Formula::False),
                g => return Err(shape(id, format!("`{g}` is not the negation of `{}`", p(1).goal))),
            },
            Rule::Raa { name, formula } => {
                self.wf(id, formula)?;
                if p(0).goal != Formula::False {
                    return Err(shape(id, "premise must prove false"));
                }
                let neg = Formula::not(formula.clone());
                (discharge(id, &p(0).context, name, &neg)?, formula.clone())
            }
            Rule::FalsumE { formula } => {
                self.wf(id, formula)?;
                if p(0).goal != Formula::False {
                    return Err(shape(id, "premise must prove false"));
                }
                (p(0).context.clone(), formula.clone())
            }
            Rule::TopI => (Vec::new(), Formula::True),
            Rule::Refl { term } => {
                self.sort(id, term)?;
                (Vec::new(), Formula::Eq(term.clone(), term.clone()))
            }
            Rule::Sym => match &p(0).goal {
                Formula::Eq(a, b) => (p(0).context.clone(), Formula::Eq(b.clone(), a.clone())),
                g => return Err(shape(id, format!("expected an equation, found `{g}`"))),
            },
            Rule::Trans => match (&p(0).goal, &p(1).goal) {
                (Formula::Eq(a, b), Formula::Eq(b2, c)) if b == b2 => (
                    merge(&[&p(0).context, &p(1).context])?,
                    Formula::Eq(a.clone(), c.clone()),
                ),
                (g, h) => return Err(shape(id, format!("`{g}` and `{h}` do not chain"))),
            },
            Rule::Cong { term, arg } => {
                let Formula::Eq(a, b) = &p(0).goal else {
                    return Err(shape(id, format!("expected an equation, found `{}`", p(0).goal)));
                };
                if term.children().get(*arg) != Some(&a) {
                    return Err(shape(id, format!("argument {arg} of `{term}` is not `{a}`")));
                }
                let rhs = term.with_child(*arg, b.clone()).expect("argument index checked");
                self.sort(id, term)?;
                self.sort(id, &rhs)?;
                (p(0).context.clone(), Formula::Eq(term.clone(), rhs))
            }
            Rule::SubstEq { position, direction } => {
                let Formula::Eq(l, r) = &p(0).goal else {
                    return Err(shape(id, format!("expected an equation, found `{}`", p(0).goal)));
                };
                let (from, to) = match direction {
                    Direction::Ltr => (l, r),
                    Direction::Rtl => (r, l),
                };
                let phi = &p(1).goal;
                let (at, bound) = term_at(phi, position).map_err(|source| KernelError::Logic { rule: id, source })?;
                if at != from {
                    return Err(side(id, format!("term at {position} is `{at}`, not `{from}`")));
                }
                let mut fv = l.free_vars();
                fv.extend(r.free_vars());
                if let Some(v) = bound.iter().find(|b| fv.contains(*b)) {
                    return Err(side(id, format!("rewriting would capture `{v}`")));
                }
                let out = replace_at(phi, position, to, &self.sig)
                    .map_err(|source| KernelError::Logic { rule: id, source })?;
                (merge(&[&p(0).context, &p(1).context])?, out)
            }
            Rule::ForallE { term } => match &p(0).goal {
                Formula::Forall(x, s, body) => {
                    let ts = self.sort(id, term)?;
                    if &ts != s {
                        return Err(side(id, format!("`{term}` has sort {ts}, expected {s}")));
                    }
                    (p(0).context.clone(), body.subst(x, term))
                }
                g => return Err(shape(id, format!("expected a universal, found `{g}`"))),
            },
            Rule::ForallI { var, sort } => {
                if free_in_context(&p(0).context, var) {
                    return Err(side(
                        id,
                        format!("eigenvariable-not-fresh: `{var}` occurs in the context"),
                    ));
                }
                if let Some(ss) = p(0).goal.free_var_sorts().get(var) {
                    if ss.iter().any(|s| s != sort) {
                        return Err(side(id, format!("`{var}` is not of sort {sort}")));
                    }
                }
                (
                    p(0).context.clone(),
                    Formula::Forall(var.clone(), sort.clone(), Box::new(p(0).goal.clone())),
                )
            }
            Rule::ExistsI { witness, target } => {
                self.wf(id, target)?;
                let Formula::Exists(x, s, body) = target else {
                    return Err(shape(id, format!("target `{target}` is not existential")));
                };
                let ws = self.sort(id, witness)?;
                if &ws != s {
                    return Err(side(id, format!("witness `{witness}` has sort {ws}, expected {s}")));
                }
                if !p(0).goal.alpha_eq(&body.subst(x, witness)) {
                    return Err(shape(
                        id,
                        format!("premise `{}` is not an instance of `{target}`", p(0).goal),
                    ));
                }
                (p(0).context.clone(), target.clone())
            }
            Rule::ExistsE { var, sort, name } => {
                let Formula::Exists(x, s, body) = &p(0).goal else {
                    return Err(shape(id, format!("expected an existential, found `{}`", p(0).goal)));
                };
                if s != sort {
                    return Err(side(id, format!("eigenvariable sort {sort} differs from {s}")));
                }
                let inst = body.subst(x, &Term::var(var, sort.clone()));
                let rest = discharge(id, &p(1).context, name, &inst)?;
                let c = &p(1).goal;
                if c.free_vars().contains(var)
                    || p(0).goal.free_vars().contains(var)
                    || free_in_context(&p(0).context, var)
                    || free_in_context(&rest, var)
                {
                    return Err(side(id, format!("eigenvariable-not-fresh: `{var}`")));
                }
                (merge(&[&p(0).context, &rest])?, c.clone())
            }
            Rule::InductionInt {
                var,
                eigen,
                ge,
                ih,
                body,
            } => {
                let n = |t: Term| body.subst(var, &t);
                let k = Term::var(eigen, Sort::Int);
                let concl = Formula::forall(
                    var,
                    Sort::Int,
                    Formula::imp(
                        Formula::Cmp(CmpOp::Ge, Term::var(var, Sort::Int), Term::Lit(0)),
                        body.clone(),
                    ),
                );
                self.wf(id, &concl)?;
                if !p(0).goal.alpha_eq(&n(Term::Lit(0))) {
                    return Err(shape(
                        id,
                        format!("base premise `{}` is not `{}`", p(0).goal, n(Term::Lit(0))),
                    ));
                }
                let step = n(Term::add(k.clone(), Term::Lit(1)));
                if !p(1).goal.alpha_eq(&step) {
                    return Err(shape(id, format!("step premise `{}` is not `{step}`", p(1).goal)));
                }
                let guard = Formula::Cmp(CmpOp::Ge, k.clone(), Term::Lit(0));
                let rest = discharge(id, &p(1).context, ge, &guard)?;
                let rest = discharge(id, &rest, ih, &n(k))?;
                if free_in_context(&p(0).context, eigen)
                    || free_in_context(&rest, eigen)
                    || concl.free_vars().contains(eigen)
                {
                    return Err(side(id, format!("eigenvariable-not-fresh: `{eigen}`")));
                }
                (merge(&[&p(0).context, &rest])?, concl)
            }
        };
        self.conclude(rule, premises, ctx, goal)
    }

    /// Admits `seq` on the strength of a checker token issued for its digest.
    pub fn admit_certified(&self, seq: &Sequent, token: &AcceptanceToken) -> Result<Theorem> {
        let d = seq.digest();
        if token.sequent_digest() != d {
            return Err(KernelError::TokenMismatch {
                token: token.sequent_digest(),
                sequent: d,
            });
        }
        self.certs.insert(d, seq.clone());
        Ok(Theorem {
            seq: Arc::new(seq.clone()),
            proof: Arc::new(ProofNode::Cert(d)),
        })
    }

    /// Re-executes every step of `po` and checks the result against `claimed`.
    pub fn replay(&self, po: &ProofObject, claimed: &Sequent) -> Result<Theorem> {
        let mut done: Vec<Theorem> = Vec::with_capacity(po.steps.len());
        for (i, step) in po.steps.iter().enumerate() {
            let wrap = |e: KernelError| KernelError::Step {
                step: i,
                source: Box::new(e),
            };
            if step.index != i {
                return Err(wrap(KernelError::Malformed {
                    line: i + 2,
                    message: format!("step index {} out of order", step.index),
                }));
            }
            let thm = match &step.kind {
                StepKind::Cert(d) => {
                    let seq = self
                        .certs
                        .get(d)
                        .ok_or(KernelError::UnknownCertificate(*d))
                        .map_err(wrap)?;
                    Theorem {
                        seq: Arc::new(seq),
                        proof: Arc::new(ProofNode::Cert(*d)),
                    }
                }
                StepKind::Rule { rule, premises } => {
                    let mut ps = Vec::with_capacity(premises.len());
                    for &j in premises {
                        if j >= i {
                            return Err(wrap(KernelError::Malformed {
                                line: i + 2,
                                message: format!("premise {j} does not precede step {i}"),
                            }));
                        }
                        ps.push(done[j].clone());
                    }
                    self.apply(rule.clone(), &ps).map_err(wrap)?
                }
            };
            done.push(thm);
        }
        let last = done.pop().ok_or(KernelError::Malformed {
            line: 1,
            message: "empty proof object".into(),
        })?;
        if last.sequent().digest() != po.theorem || !last.sequent().alpha_eq(claimed) {
            return Err(KernelError::ConclusionMismatch {
                found: last.sequent().to_string(),
            });
        }
        Ok(last)
    }
}
