use std::path::PathBuf;

use psk_core::cert::{certify, Certificate};
use psk_core::engine::Accepted;
use psk_core::kernel::{Kernel, ProofObject, Rule};
use psk_core::logic::{parse_formula, Sequent};
use psk_core::store::{node_keys, CacheEntry, EntryVerdict, StoredCert, StoredTheorem};
use psk_core::{claimed_sequent, parse_sketch, prove, LemmaLibrary, ProverConfig, Sketch, Store, Verdict};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

fn corpus(name: &str) -> (Sketch, LemmaLibrary) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let text = std::fs::read_to_string(dir.join(name)).unwrap();
    let lib = LemmaLibrary::parse(&std::fs::read_to_string(dir.join("std.plib")).unwrap()).unwrap();
    (parse_sketch(&text).unwrap(), lib)
}

fn accepted(s: &Sketch, lib: &LemmaLibrary) -> Accepted {
    let r = prove(s, lib, &Store::in_memory(), ProverConfig::default()).unwrap();
    match r.verdict {
        Verdict::Accepted(a) => *a,
        Verdict::Rejected(fs) => panic!("{fs:?}"),
    }
}

fn mutate_line(rng: &mut StdRng, line: &str) -> String {
    let swaps = [
        ("\"Lit\":0", "\"Lit\":1"),
        ("\"Lit\":1", "\"Lit\":0"),
        ("ltr", "rtl"),
        ("rtl", "ltr"),
        ("\"Eq\"", "\"Cmp\""),
        ("forall_e", "forall_i"),
        ("imp_i", "imp_e"),
        ("\"n\"", "\"m\""),
        ("[0]", "[1]"),
        ("[0,0]", "[0,1]"),
    ];
    let hits: Vec<_> = swaps.iter().filter(|(a, _)| line.contains(a)).collect();
    match hits.choose(rng) {
        Some((a, b)) if rng.gen_bool(0.7) => line.replacen(a, b, 1),
        _ => {
            // Point one premise at a different step.
            let mut parts: Vec<String> = line.split(' ').map(str::to_string).collect();
            let last = parts.len() - 1;
            if parts[last] == "-" {
                return line.replacen("assume", "weaken", 1);
            }
            let ps: Vec<String> = parts[last]
                .split(',')
                .map(|p| {
                    let v: usize = p.parse().unwrap_or(0);
                    if rng.gen_bool(0.5) {
                        v.saturating_sub(1).to_string()
                    } else {
                        p.to_string()
                    }
                })
                .collect();
            parts[last] = ps.join(",");
            parts.join(" ")
        }
    }
}

#[test]
fn tampered_proof_objects_never_replay_to_another_claim() {
    let (s, lib) = corpus("add_zero.psk");
    let a = accepted(&s, &lib);
    let claim = claimed_sequent(&s, &lib);
    let false_claim = Sequent::new(
        claim.context.clone(),
        parse_formula("forall n:Int. n >= 0 -> plus(n, 0) = n + 1").unwrap(),
    );
    let text = a.proof.to_text();
    let lines: Vec<&str> = text.lines().collect();
    let mut rng = StdRng::seed_from_u64(17);
    let (mut parsed, mut replayed) = (0, 0);
    for _ in 0..600 {
        let mut ls: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
        for _ in 0..rng.gen_range(1..=2) {
            let i = rng.gen_range(1..ls.len());
            ls[i] = mutate_line(&mut rng, &ls[i]);
        }
        let Ok(po) = ProofObject::parse(&ls.join("\n")) else {
            continue;
        };
        parsed += 1;
        let k = Kernel::new(s.signature.clone());
        if let Ok(t) = k.replay(&po, &claim) {
            replayed += 1;
            assert!(t.sequent().alpha_eq(&claim));
        }
        assert!(Kernel::new(s.signature.clone()).replay(&po, &false_claim).is_err());
    }
    assert!(parsed > 300, "{parsed}");
    assert!(replayed < parsed);
}

#[test]
fn certified_leaves_are_rechecked_on_replay() {
    let (s, lib) = corpus("lia_linear.psk");
    let a = accepted(&s, &lib);
    let claim = claimed_sequent(&s, &lib);
    assert!(!a.certificates.is_empty());
    assert!(Kernel::new(s.signature.clone()).replay(&a.proof, &claim).is_err());

    let k = Kernel::new(s.signature.clone());
    for c in &a.certificates {
        let cert = Certificate::parse(&c.kind, &c.text).unwrap();
        // The same certificate does not vouch for a weaker context.
        let mut weaker = c.sequent.clone();
        weaker.context.pop();
        assert!(certify(&weaker, &cert).is_err());
        let token = certify(&c.sequent, &cert).unwrap();
        assert!(k.admit_certified(&weaker, &token).is_err());
        k.admit_certified(&c.sequent, &token).unwrap();
    }
    k.replay(&a.proof, &claim).unwrap();

    // A certificate of the wrong kind or with broken multipliers is refused.
    let c = &a.certificates[0];
    assert!(Certificate::parse("rup", &c.text).map_or(true, |x| certify(&c.sequent, &x).is_err()));
    let broken = c.text.replacen('1', "2", 1);
    if let Ok(x) = Certificate::parse(&c.kind, &broken) {
        if x.text() != c.text {
            assert!(certify(&c.sequent, &x).is_err());
        }
    }
}

const FALSE_HOLE: &str = "
theorem bad: k + 1 <= k
signature { const k: Int; }
context { }
proof
node root {
  goal: k + 1 <= k;
  method: hole;
}
";

#[test]
fn poisoned_store_entries_are_not_trusted() {
    let s = parse_sketch(FALSE_HOLE).unwrap();
    let lib = LemmaLibrary::default();
    let cfg = ProverConfig::default();
    let store = Store::in_memory();
    let r = prove(&s, &lib, &store, cfg.clone()).unwrap();
    assert!(!r.verdict.is_accepted());

    let key = node_keys(&s, &lib, &cfg.key_config())[0].1.key;
    let bad = Sequent::new(vec![], s.root.goal.clone());
    let k = Kernel::new(s.signature.clone());
    let top = k.apply(Rule::TopI, &[]).unwrap();
    let k_le_k = k
        .apply(
            Rule::Assume {
                name: "h".into(),
                formula: parse_formula("k <= k").unwrap(),
            },
            &[],
        )
        .unwrap();
    let stored = |sequent: Sequent, proof: String| StoredTheorem {
        obligation: "root/hole".into(),
        sequent,
        proof,
    };
    let entry = |theorems: Vec<StoredTheorem>, certificates: Vec<StoredCert>| CacheEntry {
        key,
        node_id: "root".into(),
        verdict: EntryVerdict::Accepted { theorems },
        certificates,
        signature: s.signature.clone(),
        created: 0,
    };
    let farkas = Certificate::parse("lia", "(farkas 1 1)").unwrap();
    let forgeries = vec![
        entry(vec![stored(bad.clone(), top.proof_object().to_text())], vec![]),
        entry(
            vec![stored(bad.clone(), "PROOFOBJ v1 x\n0 CERT x\n".into())],
            vec![StoredCert::new(bad.clone(), &farkas)],
        ),
        entry(vec![], vec![]),
        entry(
            vec![stored(k_le_k.sequent().clone(), k_le_k.proof_object().to_text())],
            vec![],
        ),
        entry(
            vec![
                stored(top.sequent().clone(), top.proof_object().to_text()),
                stored(bad.clone(), String::new()),
            ],
            vec![],
        ),
    ];
    for (i, e) in forgeries.into_iter().enumerate() {
        store.store(&e).unwrap();
        let r = prove(&s, &lib, &store, cfg.clone()).unwrap();
        assert!(!r.verdict.is_accepted(), "forgery {i} was accepted");
        assert_eq!(r.stats.cache_hits, 0, "forgery {i} was used");
    }
}
