use std::collections::BTreeSet;
use std::time::Duration;

use serde::Serialize;

use super::proposer::{ProposalRequest, Proposer, Reply};
use super::CauseClass;
use crate::engine::{prove, EngineError, ObligationStatus, ProveReport, ProverConfig, Verdict};
use crate::library::LemmaLibrary;
use crate::sketch::{parse_node, render_node, validate_sketch, IssueKind, Sketch};
use crate::store::{dirty_set, Store};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepairConfig {
    /// Upper bound on proposer exchanges per run; at least 1.
    pub max_rounds: usize,
    pub round_timeout: Duration,
    pub prover: ProverConfig,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            max_rounds: 3,
            round_timeout: Duration::from_secs(60),
            prover: ProverConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExchangeOutcome {
    Edited,
    /// The reply parsed but the spliced sketch was rejected.
    Rejected {
        reason: String,
    },
    Malformed {
        reason: String,
    },
    GaveUp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Obligation {
        round: usize,
        id: String,
        status: ObligationStatus,
        via: String,
    },
    CacheHit {
        round: usize,
        node_id: String,
    },
    Exchange {
        round: usize,
        exchange: usize,
        node_id: String,
        cause: CauseClass,
        /// The node text sent to the proposer.
        sent: String,
        outcome: ExchangeOutcome,
    },
    Locality {
        round: usize,
        dirty: Vec<String>,
        redischarged: Vec<String>,
        /// Nodes outside the dirty set, and how many of them were cache hits.
        untouched: usize,
        untouched_hits: usize,
        holds: bool,
    },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Transcript {
    pub events: Vec<Event>,
    pub exchanges: usize,
    pub rounds: usize,
    pub solver_calls: usize,
}

impl Transcript {
    pub fn locality_holds(&self) -> bool {
        self.events
            .iter()
            .all(|e| !matches!(e, Event::Locality { holds: false, .. }))
    }

    /// Nodes sent to the proposer, in order.
    pub fn sent(&self) -> Vec<(&str, &str)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Exchange { node_id, sent, .. } => Some((node_id.as_str(), sent.as_str())),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct RepairOutcome {
    pub sketch: Sketch,
    pub report: ProveReport,
    pub transcript: Transcript,
}

impl RepairOutcome {
    pub fn accepted(&self) -> bool {
        self.report.verdict.is_accepted()
    }
}

fn log_round(t: &mut Transcript, round: usize, r: &ProveReport) {
    t.rounds += 1;
    t.solver_calls += r.stats.solver_calls;
    for o in &r.obligations {
        t.events.push(Event::Obligation {
            round,
            id: o.id.clone(),
            status: o.status,
            via: o.via.clone(),
        });
    }
    for n in r.nodes.iter().filter(|n| n.cache_hit) {
        t.events.push(Event::CacheHit {
            round,
            node_id: n.node_id.clone(),
        });
    }
}

fn splice(s: &Sketch, node_id: &str, text: &str) -> Result<Sketch, ExchangeOutcome> {
    let node = parse_node(text).map_err(|e| ExchangeOutcome::Malformed { reason: e.to_string() })?;
    if node.id != node_id {
        return Err(ExchangeOutcome::Malformed {
            reason: format!("reply is rooted at `{}`, expected `{node_id}`", node.id),
        });
    }
    let mut next = s.clone();
    next.replace_subtree(node_id, node);
    Ok(next)
}

/// Drives prove/propose/splice until acceptance, a give-up, or the exchange bound.
pub fn run(
    s: &Sketch,
    lib: &LemmaLibrary,
    store: &Store,
    proposer: &mut dyn Proposer,
    cfg: &RepairConfig,
) -> Result<RepairOutcome, EngineError> {
    let max = cfg.max_rounds.max(1);
    let key_cfg = cfg.prover.key_config();
    let mut t = Transcript::default();
    let mut current = s.clone();
    let mut previous: Option<Sketch> = None;
    let mut round = 0;
    loop {
        let report = prove(&current, lib, store, cfg.prover.clone())?;
        log_round(&mut t, round, &report);
        if let Some(prev) = &previous {
            let dirty = dirty_set(prev, &current, lib, &key_cfg);
            let redischarged = report.stats.discharged_nodes.clone();
            let untouched: Vec<_> = report.nodes.iter().filter(|n| !dirty.contains(&n.node_id)).collect();
            let untouched_hits = untouched.iter().filter(|n| n.cache_hit).count();
            let holds = redischarged.iter().all(|n| dirty.contains(n));
            if !holds {
                log::warn!("round {round}: re-discharged nodes outside the dirty set");
            }
            t.events.push(Event::Locality {
                round,
                dirty: dirty.into_iter().collect(),
                redischarged,
                untouched: untouched.len(),
                untouched_hits,
                holds,
            });
        }
        if matches!(report.verdict, Verdict::Accepted(_)) || t.exchanges >= max {
            return Ok(RepairOutcome {
                sketch: current,
                report,
                transcript: t,
            });
        }
        let mut next = current.clone();
        let mut gave_up = false;
        let mut seen = BTreeSet::new();
        for f in report.frontier(&current) {
            if t.exchanges >= max {
                break;
            }
            if !seen.insert(f.node_id.clone()) {
                continue;
            }
            t.exchanges += 1;
            let node = next.find(&f.node_id).expect("failing node exists");
            let sent = render_node(node);
            let cause = f.cause;
            let node_id = f.node_id.clone();
            let req = ProposalRequest::new(round + 1, f, sent.clone(), lib);
            let outcome = match proposer.propose(&req) {
                Ok(Reply::GiveUp) => {
                    gave_up = true;
                    ExchangeOutcome::GaveUp
                }
                Ok(Reply::Node(text)) => match splice(&next, &node_id, &text) {
                    Ok(candidate) => {
                        let wf = validate_sketch(&candidate, Some(lib));
                        match wf.issues.iter().find(|i| i.kind != IssueKind::UnknownFact) {
                            Some(i) => ExchangeOutcome::Rejected {
                                reason: format!("{}: {}", i.kind.as_str(), i.message),
                            },
                            None => {
                                next = candidate;
                                ExchangeOutcome::Edited
                            }
                        }
                    }
                    Err(o) => o,
                },
                Err(e) => ExchangeOutcome::Malformed { reason: e.to_string() },
            };
            t.events.push(Event::Exchange {
                round: round + 1,
                exchange: t.exchanges,
                node_id,
                cause,
                sent,
                outcome,
            });
            if gave_up {
                break;
            }
        }
        if gave_up {
            return Ok(RepairOutcome {
                sketch: current,
                report,
                transcript: t,
            });
        }
        previous = Some(std::mem::replace(&mut current, next));
        round += 1;
    }
}
