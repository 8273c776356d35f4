use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{induction_child_goals, Method, Sketch, SketchNode};
use crate::library::LemmaLibrary;
use crate::logic::{Formula, LogicError, Signature, Sort, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueKind {
    UnknownFact,
    ShapeViolation,
    SortError,
    DuplicateId,
    CyclicDependency,
    UnresolvedHoleType,
}

impl IssueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::UnknownFact => "unknown-fact",
            IssueKind::ShapeViolation => "shape-violation",
            IssueKind::SortError => "sort-error",
            IssueKind::DuplicateId => "duplicate-id",
            IssueKind::CyclicDependency => "cyclic-dependency",
            IssueKind::UnresolvedHoleType => "unresolved-hole-type",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub node_id: String,
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WellFormedReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

struct Validator<'a> {
    s: &'a Sketch,
    lib: Option<&'a LemmaLibrary>,
    issues: Vec<Issue>,
}

/// A formula may mention free variables only for induction variables in scope.
fn check_scoped(sig: &Signature, f: &Formula, scope: &[String]) -> Result<(), String> {
    sig.check_formula(f).map_err(|e| e.to_string())?;
    for (v, sorts) in f.free_var_sorts() {
        if !scope.contains(&v) {
            return Err(format!("unbound variable `{v}`"));
        }
        if sorts.iter().any(|s| *s != Sort::Int) {
            return Err(format!("variable `{v}` must be Int"));
        }
    }
    Ok(())
}

fn check_term_scoped(sig: &Signature, t: &Term, scope: &[String]) -> Result<(), LogicError> {
    sig.sort_of(t)?;
    match t.free_vars().into_iter().find(|v| !scope.contains(v)) {
        Some(v) => Err(LogicError::UnknownSymbol(v)),
        None => Ok(()),
    }
}

impl Validator<'_> {
    fn issue(&mut self, node: &str, kind: IssueKind, message: impl Into<String>) {
        self.issues.push(Issue {
            node_id: node.to_string(),
            kind,
            message: message.into(),
        });
    }

    fn shape(&mut self, n: &SketchNode, want: usize) -> bool {
        if n.children.len() != want {
            self.issue(
                &n.id,
                IssueKind::ShapeViolation,
                format!(
                    "{} expects {want} child(ren), found {}",
                    n.method.tag(),
                    n.children.len()
                ),
            );
            return false;
        }
        true
    }

    fn child_goal(&mut self, n: &SketchNode, i: usize, want: &Formula, what: &str) {
        let c = &n.children[i];
        if !c.goal.alpha_eq(want) {
            self.issue(
                &n.id,
                IssueKind::ShapeViolation,
                format!("{what} child `{}` must have goal `{want}`, found `{}`", c.id, c.goal),
            );
        }
    }

    /// Resolves a fact reference seen from node `n` with the given ancestors.
    fn reference(
        &mut self,
        n: &SketchNode,
        ancestors: &[(&SketchNode, usize)],
        name: &str,
        visible: &BTreeSet<String>,
    ) {
        if visible.contains(name) || self.lib.is_some_and(|l| l.get(name).is_some()) {
            return;
        }
        if name == n.id || ancestors.iter().any(|(a, _)| a.id == name) {
            self.issue(
                &n.id,
                IssueKind::CyclicDependency,
                format!("`{name}` refers to the node itself or an enclosing node"),
            );
        } else if self.lib.is_some() || self.s.find(name).is_some() {
            self.issue(
                &n.id,
                IssueKind::UnknownFact,
                format!("`{name}` is neither a context fact nor a library lemma"),
            );
        }
    }

    fn node<'n>(
        &mut self,
        n: &'n SketchNode,
        ancestors: &mut Vec<(&'n SketchNode, usize)>,
        seen: &mut BTreeSet<String>,
    ) {
        let sig = &self.s.signature;
        if !seen.insert(n.id.clone()) {
            self.issue(
                &n.id,
                IssueKind::DuplicateId,
                format!("node id `{}` appears more than once", n.id),
            );
        }
        let scope: Vec<String> = ancestors
            .iter()
            .filter_map(|(a, i)| match &a.method {
                Method::Induction(v) if *i == 1 => Some(v.clone()),
                _ => None,
            })
            .collect();
        if let Err(e) = check_scoped(sig, &n.goal, &scope) {
            let kind = if n.method == Method::Hole {
                IssueKind::UnresolvedHoleType
            } else {
                IssueKind::SortError
            };
            self.issue(&n.id, kind, format!("goal: {e}"));
        }

        match &n.method {
            Method::Split(c) => {
                if let Err(e) = check_scoped(sig, c, &scope) {
                    self.issue(&n.id, IssueKind::SortError, format!("split condition: {e}"));
                }
                if self.shape(n, 2) {
                    self.child_goal(n, 0, &n.goal, "split");
                    self.child_goal(n, 1, &n.goal, "split");
                }
            }
            Method::Rewrite { bindings, .. } | Method::Exact { bindings, .. } => {
                for b in bindings {
                    if let Err(e) = check_term_scoped(sig, &b.term, &scope) {
                        self.issue(&n.id, IssueKind::SortError, format!("binding `{}`: {e}", b.var));
                    }
                }
                let want = if matches!(n.method, Method::Rewrite { .. }) {
                    1
                } else {
                    0
                };
                self.shape(n, want);
            }
            Method::Induction(v) => match induction_child_goals(&n.goal, v) {
                None => self.issue(
                    &n.id,
                    IssueKind::ShapeViolation,
                    format!("induction({v}) needs a goal `forall {v}:Int. {v} >= 0 -> P`"),
                ),
                Some(_) if scope.contains(v) || sig.constants.contains_key(v) => self.issue(
                    &n.id,
                    IssueKind::ShapeViolation,
                    format!("induction variable `{v}` is not fresh"),
                ),
                Some((base, step)) => {
                    if self.shape(n, 2) {
                        self.child_goal(n, 0, &base, "base");
                        self.child_goal(n, 1, &step, "step");
                    }
                }
            },
            Method::Contradiction => {
                if self.shape(n, 1) {
                    self.child_goal(n, 0, &Formula::False, "contradiction");
                }
            }
            Method::Hole => {
                self.shape(n, 0);
            }
        }

        let mut visible: BTreeSet<String> = self.s.context.iter().map(|h| h.name.clone()).collect();
        for (a, i) in ancestors.iter() {
            visible.extend(a.child_extension(*i).into_iter().map(|h| h.name));
        }
        let refs: Vec<&str> = n
            .method
            .fact()
            .into_iter()
            .chain(n.uses.iter().map(|u| u.as_str()))
            .collect();
        for r in refs {
            self.reference(n, ancestors, r, &visible);
        }

        for (i, c) in n.children.iter().enumerate() {
            ancestors.push((n, i));
            self.node(c, ancestors, seen);
            ancestors.pop();
        }
    }
}

/// Checks sorts, shape contracts and references. With `lib = None`, references
/// that are not in scope are left for discharge to report (they may name
/// library lemmas supplied later); references to sketch nodes are always
/// flagged.
pub fn validate_sketch(s: &Sketch, lib: Option<&LemmaLibrary>) -> WellFormedReport {
    let mut v = Validator {
        s,
        lib,
        issues: Vec::new(),
    };
    let root = s.root.id.clone();
    if let Err(e) = check_scoped(&s.signature, &s.theorem, &[]) {
        v.issue(&root, IssueKind::SortError, format!("theorem: {e}"));
    }
    let mut names = BTreeSet::new();
    for h in &s.context {
        if !names.insert(h.name.clone()) {
            v.issue(
                &root,
                IssueKind::DuplicateId,
                format!("context fact `{}` declared twice", h.name),
            );
        }
        if let Err(e) = check_scoped(&s.signature, &h.formula, &[]) {
            v.issue(&root, IssueKind::SortError, format!("fact `{}`: {e}", h.name));
        }
    }
    if let Some(lib) = lib {
        for l in lib.lemmas() {
            let used = s
                .nodes()
                .iter()
                .any(|n| n.method.fact() == Some(&l.id) || n.uses.contains(&l.id));
            if used {
                if let Err(e) = check_scoped(&s.signature, &l.formula, &[]) {
                    v.issue(&root, IssueKind::SortError, format!("library lemma `{}`: {e}", l.id));
                }
            }
        }
    }
    if !s.root.goal.alpha_eq(&s.theorem) {
        v.issue(&root, IssueKind::ShapeViolation, "root goal differs from the theorem");
    }
    v.node(&s.root, &mut Vec::new(), &mut BTreeSet::new());
    WellFormedReport {
        ok: v.issues.is_empty(),
        issues: v.issues,
    }
}
