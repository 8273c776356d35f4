use super::*;
use crate::kernel::Rule;
use crate::logic::{parse_formula, Formula};
use crate::repair::CauseClass;
use crate::sketch::parse_sketch;

const SKETCH: &str = "theorem t: P(a) -> P(a)
signature { sort S; const a: S; pred P: S; pred A: ; }
context { f: P(a); }
proof
node r {
  goal: P(a) -> P(a);
  method: split(A);
  node l { goal: P(a) -> P(a); method: hole; node ll { goal: P(a); method: hole; } }
  node q { goal: P(a) -> P(a); method: hole; }
}";

fn sketch() -> Sketch {
    parse_sketch(SKETCH).unwrap()
}

#[test]
fn keys_are_stable_and_canonical() {
    let s = sketch();
    let n = s.find("q").unwrap();
    let ctx = context_root(&s.signature, &s.context, "");
    let hints = vec!["b".to_string(), "a".to_string()];
    assert_eq!(node_key(n, ctx, &hints), node_key(n, ctx, &hints));
    let rev: Vec<String> = hints.iter().rev().cloned().collect();
    assert_eq!(node_key(n, ctx, &hints), node_key(n, ctx, &rev));
    let mut m = n.clone();
    m.goal = parse_formula("forall x:S. P(x)").unwrap();
    let mut m2 = n.clone();
    m2.goal = parse_formula("forall y:S. P(y)").unwrap();
    assert_eq!(node_key(&m, ctx, &hints), node_key(&m2, ctx, &hints));
    assert_ne!(node_key(&m, ctx, &hints), node_key(n, ctx, &hints));
    assert_ne!(node_key(n, ctx, &hints), node_key(n, ctx, &hints[..1]));
}

#[test]
fn dirty_sets() {
    let lib = LemmaLibrary::default();
    let cfg = KeyConfig::default();
    let s = sketch();
    assert!(dirty_set(&s, &s, &lib, &cfg).is_empty());
    let mut leaf = s.clone();
    leaf.root.find_mut("q").unwrap().goal = parse_formula("P(a) \\/ ~P(a)").unwrap();
    assert_eq!(dirty_set(&s, &leaf, &lib, &cfg), BTreeSet::from(["q".to_string()]));
    let mut cond = s.clone();
    cond.root.method = Method::Split(parse_formula("~A").unwrap());
    let all: BTreeSet<String> = ["r", "l", "ll", "q"].iter().map(|x| x.to_string()).collect();
    assert_eq!(dirty_set(&s, &cond, &lib, &cfg), all);
}

fn failed_entry(key: CacheKey) -> CacheEntry {
    CacheEntry {
        key,
        node_id: "n".into(),
        verdict: EntryVerdict::Failed(FailureRecord {
            node_id: "n".into(),
            cause: CauseClass::MissingLemma,
            context: vec![],
            goal: Formula::True,
            detail: "d".into(),
            countermodel: None,
            hints: vec![],
        }),
        certificates: vec![],
        signature: Signature::new(),
        created: 0,
    }
}

#[test]
fn disk_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let k = CacheKey(Digest::of_bytes(b"k"));
    {
        let st = Store::open(dir.path()).unwrap();
        assert!(matches!(Store::open(dir.path()), Err(StoreError::Locked(_))));
        assert_eq!(st.lookup(&k), None);
        st.store(&failed_entry(k)).unwrap();
        assert_eq!(st.lookup(&k), Some(failed_entry(k)));
    }
    let st = Store::open(dir.path()).unwrap();
    assert_eq!(st.lookup(&k), Some(failed_entry(k)));
    drop(st);
    let hex = k.0.to_hex();
    let path = dir.path().join(&hex[..2]).join(format!("{hex}.entry"));
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    let st = Store::open(dir.path()).unwrap();
    assert_eq!(st.lookup(&k), None);
    assert_eq!(st.audit().corrupt.len(), 1);
    assert_eq!(st.gc().unwrap(), 1);
    assert!(st.audit().ok());
}

#[test]
fn accepted_entries_replay() {
    let s = sketch();
    let kernel = Kernel::new(s.signature.clone());
    let t = kernel
        .apply(
            Rule::Assume {
                name: "f".into(),
                formula: parse_formula("P(a)").unwrap(),
            },
            &[],
        )
        .unwrap();
    let e = CacheEntry {
        key: CacheKey(Digest::of_bytes(b"acc")),
        node_id: "ll".into(),
        verdict: EntryVerdict::Accepted {
            theorems: vec![StoredTheorem {
                obligation: "ll/exact".into(),
                sequent: t.sequent().clone(),
                proof: t.proof_object().to_text(),
            }],
        },
        certificates: vec![],
        signature: s.signature.clone(),
        created: 0,
    };
    let st = Store::in_memory();
    st.store(&e).unwrap();
    let report = st.audit();
    assert!(report.ok(), "{report:?}");
    assert_eq!(report.replayed, 1);
    let mut bad = e.clone();
    if let EntryVerdict::Accepted { theorems } = &mut bad.verdict {
        theorems[0].sequent.goal = parse_formula("A").unwrap();
    }
    assert!(bad.restore(&Kernel::new(s.signature.clone())).is_err());
}
