use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use super::*;
use crate::logic::{parse_formula, Hyp};
use crate::translate::{LinConstraint, LinOp};

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn farkas(ls: &[i64]) -> LiaCert {
    LiaCert::Farkas(ls.iter().map(|&l| q(l)).collect())
}

#[test]
fn rup_accepts_empty_clause_refutation() {
    let p = CnfProblem::new(1, vec![vec![1], vec![-1]]);
    let proof = RupProof { clauses: vec![vec![]] };
    let t = check_rup(&p, &proof).unwrap();
    assert_eq!(t.sequent_digest(), p.origin());
    assert_eq!(t.version(), CHECKER_VERSION);
    assert_eq!(t.cert_digest(), Digest::of_bytes(b"0\n"));
}

#[test]
fn rup_rejects_satisfiable_problem() {
    let p = CnfProblem::new(2, vec![vec![1, 2]]);
    assert_eq!(
        check_rup(&p, &RupProof { clauses: vec![vec![]] }),
        Err(CertError::NotRup { step: 0 })
    );
    assert_eq!(check_rup(&p, &RupProof::default()), Err(CertError::NoEmptyClause));
    assert!(matches!(
        check_rup(
            &p,
            &RupProof {
                clauses: vec![vec![3], vec![]]
            }
        ),
        Err(CertError::LiteralOutOfRange { step: 0, lit: 3 })
    ));
}

#[test]
fn rup_needs_learned_lemmas() {
    // (a∨b)(a∨¬b)(¬a∨b)(¬a∨¬b): the empty clause alone does not propagate.
    let p = CnfProblem::new(2, vec![vec![1, 2], vec![1, -2], vec![-1, 2], vec![-1, -2]]);
    assert!(check_rup(&p, &RupProof { clauses: vec![vec![]] }).is_err());
    assert!(check_rup(
        &p,
        &RupProof {
            clauses: vec![vec![1], vec![]]
        }
    )
    .is_ok());
}

#[test]
fn farkas_refutes_interval() {
    // x >= 1, x <= 0 : rows -x <= -1, x <= 0
    let p = LiaProblem::new(
        vec!["x".into()],
        vec![
            LinConstraint::new(vec![(0, 1)], LinOp::Ge, 1),
            LinConstraint::new(vec![(0, 1)], LinOp::Le, 0),
        ],
    );
    assert!(check_lia(&p, &farkas(&[1, 1])).is_ok());
    assert!(matches!(
        check_lia(&p, &farkas(&[1, 2])),
        Err(CertError::NonzeroResidue { .. })
    ));
    assert!(matches!(
        check_lia(&p, &farkas(&[1])),
        Err(CertError::MultiplierCount { .. })
    ));
    assert!(matches!(
        check_lia(&p, &farkas(&[-1, -1])),
        Err(CertError::NegativeMultiplier { index: 0, .. })
    ));
    assert!(matches!(
        check_lia(&p, &farkas(&[0, 0])),
        Err(CertError::NotContradictory { .. })
    ));
}

#[test]
fn branching_refutes_parity() {
    // 2x = 1 has rational but no integer solutions.
    let p = LiaProblem::new(vec!["x".into()], vec![LinConstraint::new(vec![(0, 2)], LinOp::Eq, 1)]);
    assert!(matches!(
        check_lia(&p, &farkas(&[1, 1])),
        Err(CertError::NotContradictory { .. })
    ));
    let cert = LiaCert::parse("(branch x 0 (farkas 0 1 2) (farkas 1 0 2))").unwrap();
    assert!(check_lia(&p, &cert).is_ok());
    let bad = LiaCert::parse("(branch x 0 (farkas 0 1 2) (farkas 1 1 0))").unwrap();
    match check_lia(&p, &bad) {
        Err(CertError::NotContradictory { path }) => assert_eq!(path, "root.R"),
        other => panic!("{other:?}"),
    }
    let unknown = LiaCert::parse("(branch y 0 (farkas 0 1 2) (farkas 1 0 2))").unwrap();
    assert!(matches!(
        check_lia(&p, &unknown),
        Err(CertError::UnknownVariable { .. })
    ));
}

#[test]
fn certify_binds_to_the_sequent() {
    let seq = Sequent::new(
        vec![Hyp::new("h", parse_formula("x >= 1").unwrap())],
        parse_formula("x >= 0").unwrap(),
    );
    let cert = Certificate::Lia(farkas(&[1, 1]));
    let t = certify(&seq, &cert).unwrap();
    assert_eq!(t.sequent_digest(), seq.digest());
    assert_eq!(t.cert_digest(), cert.digest());
    let other = Sequent::new(vec![], parse_formula("x >= 0").unwrap());
    assert!(certify(&other, &cert).is_err());
    let prop = Sequent::new(vec![], parse_formula("A \\/ ~A").unwrap());
    assert_eq!(certify(&prop, &cert), Err(CertError::WrongFragment));
    let rup = Certificate::parse("rup", "0\n").unwrap();
    assert!(certify(&prop, &rup).is_ok());
}

fn brute_force_sat(n: u32, clauses: &[Vec<i32>]) -> bool {
    (0..1u32 << n).any(|m| {
        clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let bit = m >> (l.unsigned_abs() - 1) & 1 == 1;
                bit == (l > 0)
            })
        })
    })
}

fn clause_strategy(n: i32) -> impl Strategy<Value = Vec<i32>> {
    prop::collection::vec((1..=n, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v }), 0..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn rup_never_accepts_satisfiable(
        clauses in prop::collection::vec(clause_strategy(4), 1..10),
        proof in prop::collection::vec(clause_strategy(4), 0..6),
    ) {
        let p = CnfProblem::new(4, clauses);
        let mut steps = proof;
        steps.push(vec![]);
        if check_rup(&p, &RupProof { clauses: steps }).is_ok() {
            prop_assert!(!brute_force_sat(4, p.clauses()));
        }
    }

    #[test]
    fn lia_never_accepts_feasible_in_box(
        rows in prop::collection::vec((-3i64..4, -3i64..4, -4i64..5, 0u8..3), 1..4),
        ls in prop::collection::vec(0i64..4, 1..6),
        branch in proptest::option::of(-2i64..3),
    ) {
        let cs: Vec<LinConstraint> = rows
            .iter()
            .map(|&(a, b, c, op)| {
                let op = [LinOp::Le, LinOp::Ge, LinOp::Eq][op as usize];
                LinConstraint::new(vec![(0, a), (1, b)], op, c)
            })
            .collect();
        let p = LiaProblem::new(vec!["x".into(), "y".into()], cs);
        let n = p.rows().len();
        let leaf = |extra: usize| LiaCert::Farkas((0..n + extra).map(|i| q(ls[i % ls.len()])).collect());
        let cert = match branch {
            None => leaf(0),
            Some(b) => LiaCert::Branch { var: "x".into(), bound: b, left: Box::new(leaf(1)), right: Box::new(leaf(1)) },
        };
        if check_lia(&p, &cert).is_ok() {
            for x in -6..=6 {
                for y in -6..=6 {
                    prop_assert!(!p.holds(&[x, y]));
                }
            }
        }
    }
}
