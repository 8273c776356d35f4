//! Typed proof sketches: a tree of nodes, each carrying a goal, a method tag
//! and optional fact references.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use crate::logic::Direction;
use crate::logic::{CmpOp, Formula, Hyp, Position, Signature, Sort, Term};

pub(crate) mod parse;
mod validate;

pub use parse::{parse_node, parse_sketch, SketchError};
pub use validate::{validate_sketch, Issue, IssueKind, WellFormedReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Binding {
    pub var: String,
    pub term: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Rewrite {
        fact: String,
        position: Position,
        direction: Direction,
        bindings: Vec<Binding>,
    },
    Split(Formula),
    Induction(String),
    Contradiction,
    Exact {
        fact: String,
        bindings: Vec<Binding>,
    },
    Hole,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Rewrite { .. } => "rewrite",
            Method::Split(_) => "split",
            Method::Induction(_) => "induction",
            Method::Contradiction => "contradiction",
            Method::Exact { .. } => "exact",
            Method::Hole => "hole",
        }
    }

    /// The fact named by a rewrite or exact method.
    pub fn fact(&self) -> Option<&str> {
        match self {
            Method::Rewrite { fact, .. } | Method::Exact { fact, .. } => Some(fact),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SketchNode {
    pub id: String,
    pub goal: Formula,
    pub method: Method,
    pub uses: Vec<String>,
    pub children: Vec<SketchNode>,
    pub span: Span,
}

/// Structural equality; source spans are ignored.
impl PartialEq for SketchNode {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.goal == other.goal
            && self.method == other.method
            && self.uses == other.uses
            && self.children == other.children
    }
}

impl Eq for SketchNode {}

impl SketchNode {
    pub fn leaf(id: &str, goal: Formula, method: Method) -> Self {
        SketchNode {
            id: id.to_string(),
            goal,
            method,
            uses: Vec::new(),
            children: Vec::new(),
            span: Span::default(),
        }
    }

    /// Pre-order (document order) traversal.
    pub fn walk<'a>(&'a self, out: &mut Vec<&'a SketchNode>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }

    pub fn find(&self, id: &str) -> Option<&SketchNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    pub fn find_mut(&mut self, id: &str) -> Option<&mut SketchNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(id))
    }

    /// Hypotheses this node adds to the context of its `i`-th child.
    pub fn child_extension(&self, i: usize) -> Vec<Hyp> {
        let h = |slot: &str| format!("h{}.{slot}", self.id);
        match (&self.method, i) {
            (Method::Split(c), 0) => vec![Hyp::new(h("pos"), c.clone())],
            (Method::Split(c), 1) => vec![Hyp::new(h("neg"), Formula::not(c.clone()))],
            (Method::Induction(n), 1) => match induction_body(&self.goal, n) {
                Some(body) => vec![
                    Hyp::new(h("ge"), Formula::Cmp(CmpOp::Ge, Term::var(n, Sort::Int), Term::Lit(0))),
                    Hyp::new(h("ih"), body.clone()),
                ],
                None => Vec::new(),
            },
            (Method::Contradiction, 0) => vec![Hyp::new(h("neg"), Formula::not(self.goal.clone()))],
            _ => Vec::new(),
        }
    }
}

/// `P` from a goal of the shape `forall n:Int. n >= 0 -> P`.
pub fn induction_body<'a>(goal: &'a Formula, n: &str) -> Option<&'a Formula> {
    let Formula::Forall(x, Sort::Int, body) = goal else {
        return None;
    };
    if x != n {
        return None;
    }
    let Formula::Imp(guard, p) = &**body else {
        return None;
    };
    let expected = Formula::Cmp(CmpOp::Ge, Term::var(n, Sort::Int), Term::Lit(0));
    (**guard == expected).then_some(&**p)
}

/// Goals `P(0)` and `P(n+1)` required of the two children of `induction(n)`.
pub fn induction_child_goals(goal: &Formula, n: &str) -> Option<(Formula, Formula)> {
    let p = induction_body(goal, n)?;
    let base = p.subst(n, &Term::Lit(0));
    let step = p.subst(n, &Term::add(Term::var(n, Sort::Int), Term::Lit(1)));
    Some((base, step))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sketch {
    pub name: String,
    pub signature: Signature,
    pub theorem: Formula,
    pub context: Vec<Hyp>,
    pub root: SketchNode,
}

impl Sketch {
    pub fn nodes(&self) -> Vec<&SketchNode> {
        let mut out = Vec::new();
        self.root.walk(&mut out);
        out
    }

    pub fn find(&self, id: &str) -> Option<&SketchNode> {
        self.root.find(id)
    }

    /// Ancestors of `id` from the root, each paired with the index of the
    /// child leading towards `id`. Empty for the root; `None` if absent.
    pub fn path_to(&self, id: &str) -> Option<Vec<(&SketchNode, usize)>> {
        fn go<'a>(n: &'a SketchNode, id: &str, acc: &mut Vec<(&'a SketchNode, usize)>) -> bool {
            if n.id == id {
                return true;
            }
            for (i, c) in n.children.iter().enumerate() {
                acc.push((n, i));
                if go(c, id, acc) {
                    return true;
                }
                acc.pop();
            }
            false
        }
        let mut acc = Vec::new();
        go(&self.root, id, &mut acc).then_some(acc)
    }

    /// Context facts followed by every extension on the path to `id`.
    pub fn context_for(&self, id: &str) -> Option<Vec<Hyp>> {
        let mut ctx = self.context.clone();
        for (anc, i) in self.path_to(id)? {
            ctx.extend(anc.child_extension(i));
        }
        Some(ctx)
    }

    /// Replaces the subtree rooted at `id`. Returns false if `id` is absent.
    pub fn replace_subtree(&mut self, id: &str, new: SketchNode) -> bool {
        match self.root.find_mut(id) {
            Some(slot) => {
                *slot = new;
                self.bind_eigenvariables();
                true
            }
            None => false,
        }
    }

    /// Turns references to induction variables inside step subtrees into
    /// Int variables. The parser is signature-free, so a bare `n` in a step
    /// goal first arrives as a constant.
    pub fn bind_eigenvariables(&mut self) {
        fn go(n: &mut SketchNode, scope: &BTreeMap<String, Sort>, sig: &Signature) {
            n.goal = n.goal.bind_consts(scope);
            match &mut n.method {
                Method::Split(c) => *c = c.bind_consts(scope),
                Method::Rewrite { bindings, .. } | Method::Exact { bindings, .. } => {
                    for b in bindings {
                        b.term = b.term.bind_consts(scope);
                    }
                }
                _ => {}
            }
            let eigen = match &n.method {
                Method::Induction(v) if !sig.constants.contains_key(v) => Some(v.clone()),
                _ => None,
            };
            for (i, c) in n.children.iter_mut().enumerate() {
                match (&eigen, i) {
                    (Some(v), 1) => {
                        let mut inner = scope.clone();
                        inner.insert(v.clone(), Sort::Int);
                        go(c, &inner, sig);
                    }
                    _ => go(c, scope, sig),
                }
            }
        }
        go(&mut self.root, &BTreeMap::new(), &self.signature);
    }
}

fn write_sorts(out: &mut String, sorts: &[Sort]) {
    for (i, s) in sorts.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{s}");
    }
}

fn write_bindings(out: &mut String, bindings: &[Binding]) {
    for b in bindings {
        let _ = write!(out, ", {} := {}", b.var, b.term);
    }
}

pub fn render_method(m: &Method) -> String {
    let mut out = String::new();
    match m {
        Method::Rewrite {
            fact,
            position,
            direction,
            bindings,
        } => {
            let dir = match direction {
                Direction::Ltr => "ltr",
                Direction::Rtl => "rtl",
            };
            let pos: Vec<String> = position.0.iter().map(|i| i.to_string()).collect();
            let _ = write!(out, "rewrite({fact}, [{}], {dir}", pos.join(", "));
            write_bindings(&mut out, bindings);
            out.push(')');
        }
        Method::Split(c) => {
            let _ = write!(out, "split({c})");
        }
        Method::Induction(n) => {
            let _ = write!(out, "induction({n})");
        }
        Method::Contradiction => out.push_str("contradiction"),
        Method::Exact { fact, bindings } => {
            let _ = write!(out, "exact({fact}");
            write_bindings(&mut out, bindings);
            out.push(')');
        }
        Method::Hole => out.push_str("hole"),
    }
    out
}

fn render_node_into(n: &SketchNode, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    let _ = writeln!(out, "{pad}node {} {{", n.id);
    let _ = writeln!(out, "{pad}  goal: {};", n.goal);
    let _ = writeln!(out, "{pad}  method: {};", render_method(&n.method));
    if !n.uses.is_empty() {
        let _ = writeln!(out, "{pad}  uses: {};", n.uses.join(", "));
    }
    for c in &n.children {
        render_node_into(c, depth + 1, out);
    }
    let _ = writeln!(out, "{pad}}}");
}

pub fn render_node(n: &SketchNode) -> String {
    let mut out = String::new();
    render_node_into(n, 0, &mut out);
    out
}

/// Deterministic pretty-print; `parse_sketch` inverts it.
pub fn render_sketch(s: &Sketch) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "theorem {}: {}", s.name, s.theorem);
    let sig = &s.signature;
    if sig != &Signature::default() {
        out.push_str("signature {\n");
        for so in &sig.sorts {
            let _ = writeln!(out, "  sort {so};");
        }
        for (f, (args, res)) in &sig.functions {
            let _ = write!(out, "  fun {f}: ");
            write_sorts(&mut out, args);
            let _ = writeln!(out, " -> {res};");
        }
        for (p, args) in &sig.predicates {
            let _ = write!(out, "  pred {p}: ");
            write_sorts(&mut out, args);
            out.push_str(";\n");
        }
        for (c, so) in &sig.constants {
            let _ = writeln!(out, "  const {c}: {so};");
        }
        out.push_str("}\n");
    }
    out.push_str("context {\n");
    for h in &s.context {
        let _ = writeln!(out, "  {}: {};", h.name, h.formula);
    }
    out.push_str("}\nproof\n");
    render_node_into(&s.root, 0, &mut out);
    out
}
