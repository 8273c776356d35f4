use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn psk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psk"))
        .args(args)
        .env_remove("PSK_STORE")
        .output()
        .expect("psk runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn sketches() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(corpus())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "psk"))
        .collect();
    v.sort();
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn json_output_parses_for_every_corpus_file() {
    let lib = corpus().join("std.plib");
    for f in sketches() {
        let name = f.file_name().unwrap().to_str().unwrap();
        let out = psk(&["--format", "json", "check", s(&f), "--lib", s(&lib)]);
        let v = json(&out);
        // Unknown facts are reported by `check` and classified by `prove`.
        let unknown_only = v["issues"]
            .as_array()
            .unwrap()
            .iter()
            .all(|i| i["kind"] == "unknown-fact");
        assert!(
            v["ok"] == true || (name.starts_with("mut_missing") && unknown_only),
            "{name}: {v}"
        );
        assert_eq!(out.status.code(), Some(if v["ok"] == true { 0 } else { 2 }));
        let out = psk(&["--format", "json", "obligations", s(&f), "--lib", s(&lib)]);
        assert_eq!(out.status.code(), Some(0), "obligations {name}");
        json(&out);
        let out = psk(&["--format", "json", "prove", s(&f), "--lib", s(&lib), "--no-store"]);
        let v = json(&out);
        let accepted = v["verdict"] == "accepted";
        assert_eq!(out.status.code(), Some(if accepted { 0 } else { 1 }), "{}", f.display());
        assert_eq!(accepted, !name.starts_with("mut_"), "{name}");
        if !accepted {
            let fail = &v["failures"][0];
            for field in ["node_id", "goal", "cause", "detail", "hints"] {
                assert!(!fail[field].is_null(), "{name}: missing {field}");
            }
        }
    }
}

#[test]
fn warm_store_makes_no_solver_calls() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let lib = corpus().join("std.plib");
    let f = corpus().join("parity_split.psk");
    let run = || {
        json(&psk(&[
            "--format",
            "json",
            "prove",
            s(&f),
            "--lib",
            s(&lib),
            "--store",
            s(&store),
        ]))
    };
    let cold = run();
    assert!(cold["stats"]["solver_calls"].as_u64().unwrap() > 0);
    let warm = run();
    assert_eq!(warm["verdict"], "accepted");
    assert_eq!(warm["stats"]["solver_calls"], 0);
    assert_eq!(warm["stats"]["cache_misses"], 0);
    assert_eq!(warm["sequent_digest"], cold["sequent_digest"]);

    let audit = json(&psk(&["--format", "json", "audit", "--store", s(&store)]));
    assert_eq!(audit["ok"], true);
    assert!(audit["entries"].as_u64().unwrap() > 0);
    assert_eq!(psk(&["gc", "--store", s(&store)]).status.code(), Some(0));
}

#[test]
fn emitted_proofs_replay_and_tampering_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let lib = corpus().join("std.plib");
    let f = corpus().join("lia_linear.psk");
    let proof = dir.path().join("p.proof");
    let out = psk(&[
        "prove",
        s(&f),
        "--lib",
        s(&lib),
        "--no-store",
        "--emit-proof",
        s(&proof),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let replay = |p: &Path| psk(&["replay", s(p), "--claim", s(&f), "--lib", s(&lib)]).status.code();
    assert_eq!(replay(&proof), Some(0));

    let certs = dir.path().join("p.proof.certs");
    std::fs::write(&certs, "[]").unwrap();
    assert_eq!(replay(&proof), Some(1));

    let other = dir.path().join("o.proof");
    let g = corpus().join("prop_modus.psk");
    assert_eq!(
        psk(&[
            "prove",
            s(&g),
            "--lib",
            s(&lib),
            "--no-store",
            "--emit-proof",
            s(&other)
        ])
        .status
        .code(),
        Some(0)
    );
    assert_eq!(replay(&other), Some(1));
}

#[test]
fn exit_statuses() {
    let lib = corpus().join("std.plib");
    assert_eq!(psk(&["check", "/nonexistent.psk"]).status.code(), Some(2));
    assert_eq!(psk(&["prove", "--bogus"]).status.code(), Some(3));
    assert_eq!(psk(&["--version"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.psk");
    std::fs::write(&bad, "theorem t: A\nproof\n").unwrap();
    assert_eq!(psk(&["check", s(&bad)]).status.code(), Some(2));
    let mutant = corpus().join("mut_rewrite_pos.psk");
    assert_eq!(
        psk(&["prove", s(&mutant), "--lib", s(&lib), "--no-store"])
            .status
            .code(),
        Some(1)
    );
    let err = json(&psk(&["--format", "json", "check", "/nonexistent.psk"]));
    assert_eq!(err["error"]["status"], 2);
}

#[test]
fn repair_with_a_subprocess_proposer() {
    let dir = tempfile::tempdir().unwrap();
    let lib = corpus().join("std.plib");
    let broken = corpus().join("mut_rewrite_pos.psk");
    let good = std::fs::read_to_string(corpus().join("add_zero.psk")).unwrap();
    let sketch = psk_core::parse_sketch(&good).unwrap();
    let fix = dir.path().join("fix.txt");
    std::fs::write(&fix, psk_core::sketch::render_node(sketch.find("step").unwrap())).unwrap();
    let script = format!(
        "while read -r tag len; do head -c \"$len\" >/dev/null; printf 'NODE %s\\n' $(wc -c < {f}); cat {f}; done",
        f = fix.display()
    );
    let output = dir.path().join("fixed.psk");
    let out = psk(&[
        "--format",
        "json",
        "repair",
        s(&broken),
        "--proposer",
        &script,
        "--lib",
        s(&lib),
        "--store",
        s(&dir.path().join("store")),
        "--output",
        s(&output),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["verdict"], "accepted");
    assert_eq!(v["transcript"]["exchanges"], 1);
    assert_eq!(
        psk(&["prove", s(&output), "--lib", s(&lib), "--no-store"])
            .status
            .code(),
        Some(0)
    );

    let out = psk(&[
        "repair",
        s(&broken),
        "--proposer",
        "cat >/dev/null",
        "--lib",
        s(&lib),
        "--timeout",
        "1",
        "--max-rounds",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
