//! Lemma libraries (`.plib` files) and symbol-overlap retrieval.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::logic::{Formula, Hyp, Subexpr, Term};
use crate::sketch::SketchError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lemma {
    pub id: String,
    pub formula: Formula,
    pub symbols: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaLibrary {
    lemmas: Vec<Lemma>,
}

fn term_symbols(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Const(c) => {
            out.insert(c.clone());
        }
        Term::App(f, args) => {
            out.insert(f.clone());
            args.iter().for_each(|a| term_symbols(a, out));
        }
        _ => t.children().into_iter().for_each(|c| term_symbols(c, out)),
    }
}

/// Uninterpreted symbols (functions, predicates, constants) of a formula.
/// Variables and builtin arithmetic are not symbols.
pub fn symbols(f: &Formula) -> BTreeSet<String> {
    fn go(f: &Formula, out: &mut BTreeSet<String>) {
        if let Formula::Pred(p, _) = f {
            out.insert(p.clone());
        }
        for c in f.children() {
            match c {
                Subexpr::Term(t) => term_symbols(t, out),
                Subexpr::Formula(g) => go(g, out),
            }
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut out);
    out
}

impl LemmaLibrary {
    pub fn new(facts: Vec<Hyp>) -> Self {
        let mut lemmas: Vec<Lemma> = facts
            .into_iter()
            .map(|h| Lemma {
                symbols: symbols(&h.formula),
                id: h.name,
                formula: h.formula,
            })
            .collect();
        lemmas.sort_by(|a, b| a.id.cmp(&b.id));
        lemmas.dedup_by(|a, b| a.id == b.id);
        LemmaLibrary { lemmas }
    }

    pub fn parse(text: &str) -> Result<Self, SketchError> {
        Ok(Self::new(crate::sketch::parse::parse_facts(text)?))
    }

    pub fn get(&self, id: &str) -> Option<&Lemma> {
        self.lemmas
            .binary_search_by(|l| l.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.lemmas[i])
    }

    pub fn lemmas(&self) -> &[Lemma] {
        &self.lemmas
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }
}

/// Top-`k` lemma ids by |sym(goal) ∩ sym(lemma)| / |sym(lemma)|, ties by id.
/// Lemmas sharing no symbol with the goal are never suggested.
pub fn retrieve_hints(goal: &Formula, lib: &LemmaLibrary, k: usize) -> Vec<String> {
    let g = symbols(goal);
    let mut scored: Vec<(usize, usize, &str)> = lib
        .lemmas
        .iter()
        .filter(|l| !l.symbols.is_empty())
        .map(|l| (l.symbols.intersection(&g).count(), l.symbols.len(), l.id.as_str()))
        .filter(|(hit, _, _)| *hit > 0)
        .collect();
    // Compare hit/len exactly by cross-multiplication.
    scored.sort_by(|a, b| (b.0 * a.1).cmp(&(a.0 * b.1)).then(a.2.cmp(b.2)));
    scored.into_iter().take(k).map(|(_, _, id)| id.to_string()).collect()
}
