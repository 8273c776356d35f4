use psk_core::engine::{NodeStatus, ObligationStatus, ProveReport, Verdict};
use psk_core::repair::{Event, ExchangeOutcome, RepairOutcome};
use psk_core::sketch::WellFormedReport;
use psk_core::store::AuditReport;
use psk_core::{FailureRecord, Formula, LemmaLibrary, ObligationSet, Sequent, Sketch, Theorem};
use serde_json::{json, Value};

use crate::Format;

fn emit(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

pub fn error(fmt: Format, code: u8, message: &str) {
    match fmt {
        Format::Json => emit(&json!({"error": {"status": code, "message": message}})),
        Format::Text => eprintln!("error: {message}"),
    }
}

pub fn well_formed(fmt: Format, r: &WellFormedReport) {
    match fmt {
        Format::Json => emit(&json!({
            "ok": r.ok,
            "issues": r.issues.iter().map(|i| json!({
                "node_id": i.node_id,
                "kind": i.kind.as_str(),
                "message": i.message,
            })).collect::<Vec<_>>(),
        })),
        Format::Text => {
            for i in &r.issues {
                println!("{}: {}: {}", i.node_id, i.kind.as_str(), i.message);
            }
            println!("{}", if r.ok { "ok" } else { "not well-formed" });
        }
    }
}

pub fn obligations(fmt: Format, set: &ObligationSet) {
    match fmt {
        Format::Json => println!("{}", set.to_json()),
        Format::Text => {
            for o in &set.obligations {
                let route = serde_json::to_value(o.route).expect("route");
                let frag = serde_json::to_value(o.fragment).expect("fragment");
                println!(
                    "{}  {}  {}",
                    o.id,
                    route.as_str().unwrap_or_default(),
                    frag.as_str().unwrap_or_default()
                );
                println!("    {}", o.sequent);
            }
            println!("{} obligations", set.len());
        }
    }
}

fn failure_text(f: &FailureRecord) {
    println!("  {} [{}]: {}", f.node_id, f.cause, f.detail);
    println!("    goal: {}", f.goal);
    if let Some(m) = &f.countermodel {
        println!("    countermodel: {m}");
    }
    if !f.hints.is_empty() {
        println!("    hints: {}", f.hints.join(", "));
    }
}

fn status_str(s: &NodeStatus) -> &'static str {
    match s {
        NodeStatus::Accepted => "accepted",
        NodeStatus::Failed => "failed",
        NodeStatus::Blocked => "blocked",
    }
}

pub fn prove_json(s: &Sketch, r: &ProveReport) -> Value {
    let mut v = json!({
        "theorem": s.name,
        "verdict": if r.verdict.is_accepted() { "accepted" } else { "rejected" },
        "nodes": r.nodes,
        "obligations": r.obligations,
        "stats": r.stats,
    });
    match &r.verdict {
        Verdict::Accepted(a) => {
            v["sequent_digest"] = json!(a.theorem.sequent().digest().to_hex());
            v["certificates"] = json!(a.certificates.len());
        }
        Verdict::Rejected(fs) => v["failures"] = fs.iter().map(FailureRecord::to_json).collect::<Vec<_>>().into(),
    }
    v
}

fn prove_text(s: &Sketch, r: &ProveReport) {
    println!("theorem {}", s.name);
    println!("{:<16} {:<14} {:<9} {:<6} cause", "node", "method", "status", "cache");
    for n in &r.nodes {
        let method = s.find(&n.node_id).map(|x| x.method.tag()).unwrap_or("?");
        println!(
            "{:<16} {:<14} {:<9} {:<6} {}",
            n.node_id,
            method,
            status_str(&n.status),
            if n.cache_hit { "hit" } else { "miss" },
            n.cause.map(|c| c.as_str()).unwrap_or("-")
        );
    }
    for o in &r.obligations {
        let st = match o.status {
            ObligationStatus::Accepted => "accepted",
            ObligationStatus::Failed => "failed",
            ObligationStatus::Skipped => "skipped",
        };
        println!("  {:<28} {:<9} via {}", o.id, st, o.via);
    }
    println!(
        "solver calls: {}, cache hits: {}, cache misses: {}",
        r.stats.solver_calls, r.stats.cache_hits, r.stats.cache_misses
    );
    match &r.verdict {
        Verdict::Accepted(a) => println!(
            "accepted: {} ({} certified steps)",
            a.theorem.sequent().digest().short(),
            a.certificates.len()
        ),
        Verdict::Rejected(fs) => {
            println!("rejected:");
            fs.iter().for_each(failure_text);
        }
    }
}

pub fn prove(fmt: Format, s: &Sketch, r: &ProveReport) {
    match fmt {
        Format::Json => emit(&prove_json(s, r)),
        Format::Text => prove_text(s, r),
    }
}

pub fn repair(fmt: Format, o: &RepairOutcome) {
    match fmt {
        Format::Json => {
            let mut v = prove_json(&o.sketch, &o.report);
            v["transcript"] = serde_json::to_value(&o.transcript).expect("transcript");
            emit(&v);
        }
        Format::Text => {
            for e in &o.transcript.events {
                if let Event::Exchange {
                    round,
                    node_id,
                    cause,
                    outcome,
                    ..
                } = e
                {
                    let what = match outcome {
                        ExchangeOutcome::Edited => "edited".to_string(),
                        ExchangeOutcome::Rejected { reason } => format!("edit rejected: {reason}"),
                        ExchangeOutcome::Malformed { reason } => format!("malformed reply: {reason}"),
                        ExchangeOutcome::GaveUp => "proposer gave up".to_string(),
                    };
                    println!("round {round}: {node_id} [{cause}] -> {what}");
                }
            }
            println!(
                "rounds: {}, exchanges: {}, solver calls: {}, locality: {}",
                o.transcript.rounds,
                o.transcript.exchanges,
                o.transcript.solver_calls,
                if o.transcript.locality_holds() {
                    "ok"
                } else {
                    "violated"
                }
            );
            prove_text(&o.sketch, &o.report);
        }
    }
}

pub fn replay(fmt: Format, claim: &Sequent, r: &Result<Theorem, String>) {
    match fmt {
        Format::Json => emit(&json!({
            "claim": claim.to_string(),
            "accepted": r.is_ok(),
            "error": r.as_ref().err(),
        })),
        Format::Text => match r {
            Ok(t) => println!("replayed: {}", t.sequent().digest().short()),
            Err(e) => println!("replay failed: {e}"),
        },
    }
}

pub fn audit(fmt: Format, r: &AuditReport) {
    match fmt {
        Format::Json => emit(&json!({
            "ok": r.ok(),
            "entries": r.entries,
            "replayed": r.replayed,
            "corrupt": r.corrupt,
            "failures": r.failures.iter().map(|(k, m)| json!({"key": k, "message": m})).collect::<Vec<_>>(),
        })),
        Format::Text => {
            println!("entries: {}, replayed theorems: {}", r.entries, r.replayed);
            for c in &r.corrupt {
                println!("corrupt: {c}");
            }
            for (k, m) in &r.failures {
                println!("replay failed: {k}: {m}");
            }
            println!("{}", if r.ok() { "ok" } else { "FAILED" });
        }
    }
}

pub fn gc(fmt: Format, removed: usize) {
    match fmt {
        Format::Json => emit(&json!({"removed": removed})),
        Format::Text => println!("removed {removed} entries"),
    }
}

pub fn lemmas(fmt: Format, lib: &LemmaLibrary, goals: &[(String, Formula, Vec<String>)]) {
    let formula = |id: &str| lib.get(id).map(|l| l.formula.to_string()).unwrap_or_default();
    match fmt {
        Format::Json => emit(&Value::Array(
            goals
                .iter()
                .map(|(id, g, hs)| {
                    json!({
                        "node_id": id,
                        "goal": g.to_string(),
                        "hints": hs.iter().map(|h| json!({"id": h, "formula": formula(h)})).collect::<Vec<_>>(),
                    })
                })
                .collect(),
        )),
        Format::Text => {
            for (id, g, hs) in goals {
                println!("{id}: {g}");
                for h in hs {
                    println!("    {h}: {}", formula(h));
                }
            }
        }
    }
}
