//! Deterministic expansion of a validated sketch into proof obligations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::library::LemmaLibrary;
use crate::logic::{term_at, Formula, Hyp, Position, Sequent, Term};
use crate::sketch::{Method, Sketch, SketchNode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Slot {
    Exact,
    Hole,
    RewriteEq,
    RewriteCheck,
}

impl Slot {
    pub fn as_str(self) -> &'static str {
        match self {
            Slot::Exact => "exact",
            Slot::Hole => "hole",
            Slot::RewriteEq => "rewrite-eq",
            Slot::RewriteCheck => "rewrite-check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    KernelStructural,
    KernelExact,
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fragment {
    Propositional,
    Equality,
    Lia,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obligation {
    pub id: String,
    pub node_id: String,
    pub slot: Slot,
    pub route: Route,
    pub fragment: Fragment,
    pub sequent: Sequent,
}

#[derive(Serialize)]
struct HypJson<'a> {
    name: &'a str,
    formula: String,
}

#[derive(Serialize)]
struct ObligationJson<'a> {
    id: &'a str,
    node_id: &'a str,
    slot: Slot,
    route: Route,
    fragment: Fragment,
    context: Vec<HypJson<'a>>,
    goal: String,
}

impl Obligation {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ObligationJson {
            id: &self.id,
            node_id: &self.node_id,
            slot: self.slot,
            route: self.route,
            fragment: self.fragment,
            context: self
                .sequent
                .context
                .iter()
                .map(|h| HypJson {
                    name: &h.name,
                    formula: h.formula.to_string(),
                })
                .collect(),
            goal: self.sequent.goal.to_string(),
        })
        .expect("obligations serialize")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ObligationSet {
    pub obligations: Vec<Obligation>,
    index: BTreeMap<String, Vec<usize>>,
}

impl ObligationSet {
    pub fn for_node(&self, id: &str) -> Vec<&Obligation> {
        self.index
            .get(id)
            .map(|is| is.iter().map(|&i| &self.obligations[i]).collect())
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.obligations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obligations.is_empty()
    }

    pub fn to_json(&self) -> String {
        let v: Vec<serde_json::Value> = self.obligations.iter().map(Obligation::to_json).collect();
        serde_json::to_string_pretty(&v).expect("obligations serialize")
    }
}

fn scan(f: &Formula, arith: &mut bool, eq: &mut bool, quant: &mut bool) {
    let int = |t: &Term| t.is_arith() || matches!(t, Term::Var(_, crate::logic::Sort::Int));
    match f {
        Formula::Cmp(..) => *arith = true,
        Formula::Eq(a, b) if int(a) || int(b) => *arith = true,
        Formula::Eq(..) => *eq = true,
        Formula::Forall(_, _, b) | Formula::Exists(_, _, b) => {
            *quant = true;
            scan(b, arith, eq, quant);
        }
        Formula::Not(a) => scan(a, arith, eq, quant),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
            scan(a, arith, eq, quant);
            scan(b, arith, eq, quant);
        }
        _ => {}
    }
}

/// Theory hint from the goal and the quantifier-free hypotheses.
pub fn fragment_of(seq: &Sequent) -> Fragment {
    let (mut arith, mut eq, mut quant) = (false, false, false);
    scan(&seq.goal, &mut arith, &mut eq, &mut quant);
    let goal_quant = quant;
    for h in seq.context.iter().filter(|h| h.formula.is_quantifier_free()) {
        scan(&h.formula, &mut arith, &mut eq, &mut quant);
    }
    match (goal_quant, arith, eq) {
        (true, _, _) | (_, true, true) => Fragment::Mixed,
        (_, true, false) => Fragment::Lia,
        (_, false, true) => Fragment::Equality,
        _ => Fragment::Propositional,
    }
}

/// The equation a rewrite needs: the parent's subterm at `p` against the
/// child's, or `None` when `p` is not a term position in both.
pub fn rewrite_equation(parent: &Formula, child: &Formula, p: &Position) -> Option<(Term, Term)> {
    let (from, _) = term_at(parent, p).ok()?;
    let (to, _) = term_at(child, p).ok()?;
    Some((from.clone(), to.clone()))
}

/// Library lemmas a node names that are not already in its context.
fn library_hyps(n: &SketchNode, ctx: &[Hyp], lib: Option<&LemmaLibrary>) -> Vec<Hyp> {
    let Some(lib) = lib else { return Vec::new() };
    let mut out: Vec<Hyp> = Vec::new();
    for name in n.method.fact().into_iter().chain(n.uses.iter().map(|u| u.as_str())) {
        if ctx.iter().chain(out.iter()).any(|h| h.name == name) {
            continue;
        }
        if let Some(l) = lib.get(name) {
            out.push(Hyp::new(name, l.formula.clone()));
        }
    }
    out
}

/// Whether `name` resolves for node `n` under context `ctx`.
fn resolves(name: &str, ctx: &[Hyp]) -> bool {
    ctx.iter().any(|h| h.name == name)
}

pub fn extract_node(n: &SketchNode, ctx: &[Hyp], lib: Option<&LemmaLibrary>) -> Vec<Obligation> {
    let mut gamma = ctx.to_vec();
    gamma.extend(library_hyps(n, ctx, lib));
    let make = |slot: Slot, route: Route, sequent: Sequent| Obligation {
        id: format!("{}/{}", n.id, slot.as_str()),
        node_id: n.id.clone(),
        slot,
        route,
        fragment: fragment_of(&sequent),
        sequent,
    };
    match &n.method {
        Method::Hole => vec![make(Slot::Hole, Route::Auto, Sequent::new(gamma, n.goal.clone()))],
        Method::Exact { .. } => vec![make(
            Slot::Exact,
            Route::KernelExact,
            Sequent::new(gamma, n.goal.clone()),
        )],
        Method::Rewrite { fact, position, .. } => {
            let Some(child) = n.children.first() else {
                return Vec::new();
            };
            let eq = match rewrite_equation(&n.goal, &child.goal, position) {
                Some((from, to)) => Formula::Eq(from, to),
                None => Formula::False,
            };
            let route = if resolves(fact, &gamma) {
                Route::KernelExact
            } else {
                Route::Auto
            };
            let mut check_ctx = gamma.clone();
            check_ctx.push(Hyp::new(format!("h{}.rw", n.id), child.goal.clone()));
            vec![
                make(Slot::RewriteEq, route, Sequent::new(gamma, eq)),
                make(
                    Slot::RewriteCheck,
                    Route::KernelStructural,
                    Sequent::new(check_ctx, n.goal.clone()),
                ),
            ]
        }
        Method::Split(_) | Method::Induction(_) | Method::Contradiction => Vec::new(),
    }
}

/// Obligations of every node in document order.
pub fn extract(s: &Sketch, lib: Option<&LemmaLibrary>) -> ObligationSet {
    fn go(n: &SketchNode, ctx: &mut Vec<Hyp>, lib: Option<&LemmaLibrary>, out: &mut ObligationSet) {
        for o in extract_node(n, ctx, lib) {
            out.index
                .entry(o.node_id.clone())
                .or_default()
                .push(out.obligations.len());
            out.obligations.push(o);
        }
        for (i, c) in n.children.iter().enumerate() {
            let ext = n.child_extension(i);
            let k = ext.len();
            ctx.extend(ext);
            go(c, ctx, lib, out);
            ctx.truncate(ctx.len() - k);
        }
    }
    let mut out = ObligationSet::default();
    go(&s.root, &mut s.context.clone(), lib, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_formula;
    use crate::sketch::{parse_sketch, validate_sketch};

    const SIG: &str =
        "signature { sort S; const a: S; const c: Int; pred P: S; pred A: ; pred B: ; fun plus: Int, Int -> Int; }";

    fn sketch(body: &str, theorem: &str) -> Sketch {
        let s = parse_sketch(&format!(
            "theorem t: {theorem} {SIG} context {{ plus_zero: forall m:Int. plus(m, 0) = m; }} proof {body}"
        ))
        .unwrap();
        let r = validate_sketch(&s, None);
        assert!(r.ok, "{:?}", r.issues);
        s
    }

    #[test]
    fn single_hole() {
        let s = sketch("node n0 { goal: A -> A; method: hole; }", "A -> A");
        let os = extract(&s, None);
        assert_eq!(os.len(), 1);
        assert_eq!(os.obligations[0].route, Route::Auto);
        assert_eq!(os.obligations[0].fragment, Fragment::Propositional);
        assert_eq!(os.to_json(), extract(&s, None).to_json());
        let v: serde_json::Value = serde_json::from_str(&os.to_json()).unwrap();
        assert_eq!(v[0]["id"], "n0/hole");
        assert_eq!(v[0]["context"][0]["name"], "plus_zero");
        assert_eq!(v[0]["goal"], "A -> A");
    }

    #[test]
    fn split_children_only() {
        let s = sketch(
            "node r { goal: A \\/ B -> B \\/ A; method: split(A);
               node l { goal: A \\/ B -> B \\/ A; method: hole; }
               node q { goal: A \\/ B -> B \\/ A; method: hole; } }",
            "A \\/ B -> B \\/ A",
        );
        let os = extract(&s, None);
        assert_eq!(os.len(), 2);
        assert!(os.for_node("r").is_empty());
        assert_eq!(
            os.for_node("l")[0].sequent.hyp("hr.pos"),
            Some(&parse_formula("A").unwrap())
        );
        assert_eq!(
            os.for_node("q")[0].sequent.hyp("hr.neg"),
            Some(&parse_formula("~A").unwrap())
        );
    }

    #[test]
    fn rewrite_produces_equation_then_check() {
        let s = sketch(
            "node r { goal: plus(c, 0) >= 0; method: rewrite(plus_zero, [0], ltr, m := c);
               node k { goal: c >= 0; method: hole; } }",
            "plus(c, 0) >= 0",
        );
        let os = extract(&s, None);
        let ids: Vec<&str> = os.obligations.iter().map(|o| o.id.as_str()).collect();
        assert_eq!(ids, ["r/rewrite-eq", "r/rewrite-check", "k/hole"]);
        assert_eq!(os.obligations[0].sequent.goal, parse_formula("plus(c, 0) = c").unwrap());
        assert_eq!(os.obligations[0].route, Route::KernelExact);
        assert_eq!(os.obligations[1].route, Route::KernelStructural);
        assert_eq!(os.obligations[2].fragment, Fragment::Lia);
    }

    #[test]
    fn induction_extends_step_context() {
        let s = sketch(
            "node r { goal: forall n:Int. n >= 0 -> plus(n, 0) = n; method: induction(n);
               node b { goal: plus(0, 0) = 0; method: exact(plus_zero, m := 0); }
               node s { goal: plus(n + 1, 0) = n + 1; method: hole; } }",
            "forall n:Int. n >= 0 -> plus(n, 0) = n",
        );
        let os = extract(&s, None);
        assert_eq!(os.len(), 2);
        let step = os.for_node("s")[0];
        let names: Vec<&str> = step.sequent.context.iter().map(|h| h.name.as_str()).collect();
        assert_eq!(names, ["plus_zero", "hr.ge", "hr.ih"]);
        assert_eq!(os.for_node("b")[0].route, Route::KernelExact);
    }

    #[test]
    fn library_lemmas_join_the_context() {
        let lib = LemmaLibrary::parse("lem: forall x:S. P(x);").unwrap();
        let s = sketch("node n0 { goal: P(a); method: exact(lem, x := a); }", "P(a)");
        let os = extract(&s, Some(&lib));
        assert_eq!(
            os.obligations[0].sequent.hyp("lem"),
            Some(&lib.get("lem").unwrap().formula)
        );
        assert_eq!(os.obligations[0].fragment, Fragment::Propositional);
    }
}
