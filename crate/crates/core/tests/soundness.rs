use psk_core::kernel::Kernel;
use psk_core::testkit::{check_bounded, soundness_signature, BoundedCheck, DerivationGen, RULE_NAMES};
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn kernel_theorems_hold_in_small_models() {
    let sig = soundness_signature();
    let kernel = Kernel::new(sig.clone());
    let mut gen = DerivationGen::new(&kernel, StdRng::seed_from_u64(11));
    let (mut valid, mut skipped) = (0, 0);
    for _ in 0..200 {
        for t in gen.derive(24) {
            match check_bounded(t.sequent(), &sig, 3, (-3, 3)) {
                BoundedCheck::Valid => valid += 1,
                BoundedCheck::Skipped => skipped += 1,
                BoundedCheck::Counterexample(i) => {
                    panic!("kernel accepted `{}`, false in {i:?}", t.sequent())
                }
            }
        }
    }
    for (name, (tried, ok)) in RULE_NAMES.iter().zip(&gen.attempts) {
        eprintln!("{name:<14} {ok:>5}/{tried}");
        assert!(*ok > 0, "rule {name} never fired");
    }
    eprintln!("valid {valid}, skipped {skipped}");
    assert!(skipped * 10 < valid);
}

#[test]
fn bounded_check_finds_countermodels() {
    use psk_core::logic::{parse_formula, Hyp, Sequent};
    let sig = soundness_signature();
    let bad = Sequent::new(
        vec![Hyp::new("h", parse_formula("P(a)").unwrap())],
        parse_formula("P(b)").unwrap(),
    );
    assert!(matches!(
        check_bounded(&bad, &sig, 3, (-3, 3)),
        BoundedCheck::Counterexample(_)
    ));
    let bad = Sequent::new(vec![], parse_formula("k + 1 <= 3").unwrap());
    assert!(matches!(
        check_bounded(&bad, &sig, 3, (-3, 3)),
        BoundedCheck::Counterexample(_)
    ));
}
