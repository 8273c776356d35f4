use super::*;
use crate::cert::{certify, Certificate};
use crate::logic::parse_formula;

fn f(s: &str) -> Formula {
    parse_formula(s).unwrap()
}

fn sig() -> Signature {
    let mut s = Signature::new();
    s.add_sort("S").unwrap();
    s.add_constant("a", Sort::named("S")).unwrap();
    s.add_constant("b", Sort::named("S")).unwrap();
    s.add_predicate("P", vec![Sort::named("S")]).unwrap();
    s.add_predicate("A", vec![]).unwrap();
    s.add_predicate("B", vec![]).unwrap();
    s.add_function("plus", vec![Sort::Int, Sort::Int], Sort::Int).unwrap();
    s
}

fn assume(k: &Kernel, name: &str, formula: &str) -> Theorem {
    k.apply(
        Rule::Assume {
            name: name.into(),
            formula: f(formula),
        },
        &[],
    )
    .unwrap()
}

#[test]
fn and_introduction_merges_contexts() {
    let k = Kernel::new(sig());
    let t = k
        .apply(Rule::AndI, &[assume(&k, "h1", "A"), assume(&k, "h2", "B")])
        .unwrap();
    assert_eq!(t.sequent().goal, f("A /\\ B"));
    assert_eq!(t.sequent().context.len(), 2);
    let clash = k.apply(Rule::AndI, &[assume(&k, "h", "A"), assume(&k, "h", "B")]);
    assert_eq!(clash.unwrap_err(), KernelError::ContextClash("h".into()));
}

#[test]
fn forall_elimination_checks_sorts() {
    let k = Kernel::new(sig());
    let all = assume(&k, "h", "forall x:S. P(x)");
    let t = k
        .apply(Rule::ForallE { term: Term::cnst("a") }, std::slice::from_ref(&all))
        .unwrap();
    assert_eq!(t.sequent().goal, f("P(a)"));
    let bad = k.apply(Rule::ForallE { term: Term::Lit(3) }, &[all]);
    assert!(matches!(bad, Err(KernelError::SideCondition { rule: "forall_e", .. })));
}

#[test]
fn forall_introduction_needs_fresh_variable() {
    let k = Kernel::new(sig());
    let px = Formula::pred("P", vec![Term::var("x", Sort::named("S"))]);
    let t = k
        .apply(
            Rule::Assume {
                name: "h".into(),
                formula: px,
            },
            &[],
        )
        .unwrap();
    let err = k
        .apply(
            Rule::ForallI {
                var: "x".into(),
                sort: Sort::named("S"),
            },
            &[t],
        )
        .unwrap_err();
    assert!(err.to_string().contains("eigenvariable-not-fresh"), "{err}");
}

#[test]
fn subst_eq_rewrites_at_position() {
    let k = Kernel::new(sig());
    let eq = assume(&k, "e", "a = b");
    let pa = assume(&k, "p", "P(a)");
    let t = k
        .apply(
            Rule::SubstEq {
                position: Position(vec![0]),
                direction: Direction::Ltr,
            },
            &[eq.clone(), pa.clone()],
        )
        .unwrap();
    assert_eq!(t.sequent().goal, f("P(b)"));
    let rtl = k.apply(
        Rule::SubstEq {
            position: Position(vec![0]),
            direction: Direction::Rtl,
        },
        &[eq, pa],
    );
    assert!(matches!(rtl, Err(KernelError::SideCondition { .. })));
}

#[test]
fn classical_reductio_discharges_negation() {
    let k = Kernel::new(sig());
    let not_not = assume(&k, "h", "~~A");
    let na = assume(&k, "n", "~A");
    let bot = k.apply(Rule::NotE, &[not_not, na]).unwrap();
    let t = k
        .apply(
            Rule::Raa {
                name: "n".into(),
                formula: f("A"),
            },
            &[bot],
        )
        .unwrap();
    assert_eq!(
        t.sequent().to_string(),
        Sequent::new(vec![Hyp::new("h", f("~~A"))], f("A")).to_string()
    );
}

fn induction_rule() -> Rule {
    Rule::InductionInt {
        var: "n".into(),
        eigen: "n".into(),
        ge: "ge".into(),
        ih: "ih".into(),
        body: f("forall n:Int. plus(n, 0) = n").bind_body(),
    }
}

trait BindBody {
    fn bind_body(self) -> Formula;
}

impl BindBody for Formula {
    fn bind_body(self) -> Formula {
        match self {
            Formula::Forall(_, _, b) => *b,
            other => other,
        }
    }
}

#[test]
fn induction_checks_base_shape() {
    let k = Kernel::new(sig());
    let n = Term::var("n", Sort::Int);
    let base1 = assume(&k, "b", "plus(1, 0) = 1");
    let ih = k
        .apply(
            Rule::Assume {
                name: "ih".into(),
                formula: Formula::Eq(Term::app("plus", vec![n.clone(), Term::Lit(0)]), n.clone()),
            },
            &[],
        )
        .unwrap();
    // Step premise derived from the hypothesis by weakening is irrelevant here:
    // the malformed base is reported first.
    let err = k.apply(induction_rule(), &[base1, ih]).unwrap_err();
    assert!(
        matches!(
            err,
            KernelError::PremiseShape {
                rule: "induction_int",
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn record_then_replay_is_identity() {
    let k = Kernel::new(sig());
    let a = assume(&k, "h1", "A");
    let t = k.apply(Rule::AndI, &[a.clone(), a]).unwrap();
    let t = k
        .apply(
            Rule::ImpI {
                name: "h1".into(),
                antecedent: f("A"),
            },
            &[t],
        )
        .unwrap();
    let po = t.proof_object();
    // Shared premises are recorded once.
    assert_eq!(po.steps.len(), 3);
    let text = po.to_text();
    let back = ProofObject::parse(&text).unwrap();
    assert_eq!(back, po);
    let r = k.replay(&back, t.sequent()).unwrap();
    assert_eq!(r.sequent(), t.sequent());
    assert_eq!(r.proof_object().to_text(), text);
}

#[test]
fn corrupted_rule_fails_at_its_step() {
    let k = Kernel::new(sig());
    let t = k
        .apply(Rule::AndI, &[assume(&k, "h1", "A"), assume(&k, "h2", "B")])
        .unwrap();
    let t = k.apply(Rule::AndEL, &[t]).unwrap();
    let text = t.proof_object().to_text().replace("and_e_l", "and_e_r");
    let po = ProofObject::parse(&text).unwrap();
    match k.replay(&po, t.sequent()) {
        Err(KernelError::ConclusionMismatch { .. }) => {}
        other => panic!("{other:?}"),
    }
    let text = t.proof_object().to_text().replace("and_i", "imp_e");
    match k.replay(&ProofObject::parse(&text).unwrap(), t.sequent()) {
        Err(KernelError::Step { step, .. }) => assert_eq!(step, 2),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        ProofObject::parse("PROOFOBJ v2 00"),
        Err(KernelError::Malformed { line: 1, .. })
    ));
}

#[test]
fn certified_leaves_need_registration() {
    let k = Kernel::new(sig());
    let seq = Sequent::new(vec![], f("A \\/ ~A"));
    let token = certify(&seq, &Certificate::parse("rup", "0\n").unwrap()).unwrap();
    let wrong = Sequent::new(vec![], f("A"));
    assert!(matches!(
        k.admit_certified(&wrong, &token),
        Err(KernelError::TokenMismatch { .. })
    ));
    let t = k.admit_certified(&seq, &token).unwrap();
    let po = t.proof_object();
    assert_eq!(po.cert_digests(), vec![seq.digest()]);
    assert!(k.replay(&po, &seq).is_ok());
    let fresh = Kernel::new(sig());
    match fresh.replay(&po, &seq) {
        Err(KernelError::Step { step: 0, source }) => {
            assert_eq!(*source, KernelError::UnknownCertificate(seq.digest()))
        }
        other => panic!("{other:?}"),
    }
    // An alpha-variant shares the digest and so the token.
    let s1 = Sequent::new(vec![], f("(forall x:S. P(x)) \\/ ~(forall y:S. P(y))"));
    let s2 = Sequent::new(vec![], f("(forall z:S. P(z)) \\/ ~(forall z:S. P(z))"));
    assert_eq!(s1.digest(), s2.digest());
}
