//! Discharge of sketch nodes and kernel assembly of the root theorem.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

use crate::cert::certify;
use crate::kernel::{Kernel, ProofObject, Rule, Theorem};
use crate::library::LemmaLibrary;
use crate::logic::{Direction, Formula, Hyp, Sequent, Term};
use crate::obligation::{extract, rewrite_equation, Obligation, ObligationSet, Route, Slot};
use crate::repair::{classify, CauseClass, FailureRecord, FailureReport};
use crate::sketch::{validate_sketch, Binding, IssueKind, Method, Sketch, SketchNode, WellFormedReport};
use crate::solver::{discharge, Budgets, DischargeOutcome};
use crate::store::{
    node_keys, used_lemmas, CacheEntry, EntryVerdict, KeyConfig, NodeKeyInfo, Store, StoredCert, StoredTheorem,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProverConfig {
    pub budgets: Budgets,
    pub jobs: usize,
    pub hints: usize,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            budgets: Budgets::default(),
            jobs: 1,
            hints: 3,
        }
    }
}

impl ProverConfig {
    pub fn key_config(&self) -> KeyConfig {
        KeyConfig {
            hints: self.hints,
            salt: format!("budgets:{}:{}", self.budgets.conflicts, self.budgets.nodes),
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("sketch is not well-formed")]
    Invalid(WellFormedReport),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObligationStatus {
    Accepted,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ObligationVerdict {
    pub id: String,
    pub node_id: String,
    pub slot: Slot,
    pub route: Route,
    pub status: ObligationStatus,
    /// `kernel`, `rup`, `lia` or `cache`.
    pub via: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Accepted,
    Failed,
    /// Discharged locally, but a descendant failed.
    Blocked,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeOutcome {
    pub node_id: String,
    pub status: NodeStatus,
    pub cache_hit: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cause: Option<CauseClass>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub solver_calls: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
    /// Nodes whose obligations were discharged afresh, in document order.
    pub discharged_nodes: Vec<String>,
    pub discharged_obligations: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Accepted {
    pub theorem: Theorem,
    pub proof: ProofObject,
    /// Certificates behind the proof object's certified leaves.
    pub certificates: Vec<StoredCert>,
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Accepted(Box<Accepted>),
    Rejected(Vec<FailureRecord>),
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted(_))
    }
}

#[derive(Clone, Debug)]
pub struct ProveReport {
    pub verdict: Verdict,
    pub nodes: Vec<NodeOutcome>,
    pub obligations: Vec<ObligationVerdict>,
    pub stats: Stats,
}

impl ProveReport {
    /// Failures of failing nodes that have no failing ancestor.
    pub fn frontier(&self, s: &Sketch) -> Vec<FailureRecord> {
        let Verdict::Rejected(fs) = &self.verdict else {
            return Vec::new();
        };
        fs.iter()
            .filter(|f| {
                s.path_to(&f.node_id)
                    .is_some_and(|path| path.iter().all(|(a, _)| fs.iter().all(|g| g.node_id != a.id)))
            })
            .cloned()
            .collect()
    }
}

/// The sequent an accepted sketch establishes: its facts plus every library
/// lemma it references (sorted by id) entail the theorem.
pub fn claimed_sequent(s: &Sketch, lib: &LemmaLibrary) -> Sequent {
    let mut ctx = s.context.clone();
    let mut extra: BTreeMap<String, Hyp> = BTreeMap::new();
    for n in s.nodes() {
        for h in used_lemmas(n, lib) {
            if !ctx.iter().any(|c| c.name == h.name) {
                extra.insert(h.name.clone(), h);
            }
        }
    }
    ctx.extend(extra.into_values());
    Sequent::new(ctx, s.theorem.clone())
}

struct Local {
    theorems: Vec<(String, Theorem)>,
    certs: Vec<StoredCert>,
    solver_calls: usize,
    via: BTreeMap<String, String>,
}

type Failure = (FailureReport, Option<String>);
type Discharged = (Local, Result<(), Failure>);

#[derive(Clone)]
struct NodeResult {
    out: Result<Vec<Theorem>, FailureRecord>,
    cache_hit: bool,
    via: BTreeMap<String, String>,
    certs: Vec<StoredCert>,
}

struct Assembly<'j, 's> {
    jobs: &'j [NodeJob<'s>],
    results: &'j [NodeResult],
    index: BTreeMap<&'j str, usize>,
    keys: &'j BTreeMap<String, NodeKeyInfo>,
    failures: Vec<FailureRecord>,
    status: BTreeMap<String, NodeStatus>,
}

struct NodeJob<'a> {
    node: &'a SketchNode,
    ctx: Vec<Hyp>,
    obligations: Vec<&'a Obligation>,
}

/// Whether stored theorems have the labels, goals and contexts that
/// discharging `job` would produce.
fn fits(job: &NodeJob<'_>, stored: &[StoredTheorem]) -> bool {
    let n = job.node;
    let labels: &[&str] = match &n.method {
        Method::Hole => &["hole"],
        Method::Exact { .. } => &["exact"],
        Method::Rewrite { .. } => &["rewrite-eq", "rewrite-check"],
        Method::Split(_) | Method::Induction(_) | Method::Contradiction => &[],
    };
    let rw = format!("h{}.rw", n.id);
    let in_ctx = |h: &Hyp| {
        h.name == rw
            || job
                .ctx
                .iter()
                .any(|c| c.name == h.name && c.formula.alpha_eq(&h.formula))
    };
    stored.len() == labels.len()
        && stored.iter().zip(labels).all(|(t, l)| {
            t.obligation == format!("{}/{l}", n.id)
                && t.sequent.context.iter().all(in_ctx)
                && (labels.len() != 1 || t.sequent.goal.alpha_eq(&n.goal))
        })
}

pub struct Prover<'a> {
    sketch: &'a Sketch,
    lib: &'a LemmaLibrary,
    store: &'a Store,
    cfg: ProverConfig,
    kernel: Kernel,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn lookup_binding<'b>(bindings: &'b [Binding], x: &str) -> Option<&'b Term> {
    bindings.iter().find(|b| b.var == x).map(|b| &b.term)
}

/// `H1 -> ... -> Hk -> C` as `([H1..Hk], C)` for the first k where `stop(C)`.
fn peel(f: &Formula, stop: impl Fn(&Formula) -> bool) -> Option<(Vec<&Formula>, &Formula)> {
    let mut pre = Vec::new();
    let mut cur = f;
    loop {
        if stop(cur) {
            return Some((pre, cur));
        }
        match cur {
            Formula::Imp(a, b) => {
                pre.push(&**a);
                cur = b;
            }
            _ => return None,
        }
    }
}

impl<'a> Prover<'a> {
    pub fn new(sketch: &'a Sketch, lib: &'a LemmaLibrary, store: &'a Store, cfg: ProverConfig) -> Self {
        Prover {
            kernel: Kernel::new(sketch.signature.clone()),
            sketch,
            lib,
            store,
            cfg,
        }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    fn apply(&self, rule: Rule, premises: &[Theorem]) -> Result<Theorem, Failure> {
        let id = rule.id();
        self.kernel.apply(rule, premises).map_err(|e| {
            (
                FailureReport::SideObligation(format!("kernel rejected {id}: {e}")),
                None,
            )
        })
    }

    /// Discharges `Γ ⊢ φ` with the solvers and admits it on a checked certificate.
    fn auto(&self, seq: Sequent, local: &mut Local, ob: &str) -> Result<Theorem, Failure> {
        local.solver_calls += 1;
        match discharge(&seq, self.cfg.budgets) {
            DischargeOutcome::Certified { certificate, .. } => {
                let token = certify(&seq, &certificate).map_err(|e| {
                    (
                        FailureReport::CertificateRejected(format!("certificate rejected: {e}")),
                        None,
                    )
                })?;
                let thm = self
                    .kernel
                    .admit_certified(&seq, &token)
                    .map_err(|e| (FailureReport::CertificateRejected(e.to_string()), None))?;
                local.via.insert(ob.to_string(), certificate.kind().to_string());
                local.certs.push(StoredCert::new(seq, &certificate));
                Ok(thm)
            }
            DischargeOutcome::Countermodel(m) => Err((FailureReport::Countermodel(m), Some(seq.goal.to_string()))),
            DischargeOutcome::Unsupported(u) => Err((FailureReport::Unsupported(u.to_string()), None)),
            DischargeOutcome::ResourceLimit => Err((FailureReport::ResourceLimit, None)),
        }
    }

    /// `fact ⊢ σ(body)` by eliminating the fact's leading quantifiers.
    fn instantiate(&self, ctx: &[Hyp], fact: &str, bindings: &[Binding]) -> Result<Theorem, Failure> {
        let h = ctx
            .iter()
            .find(|h| h.name == fact)
            .ok_or_else(|| (FailureReport::UnresolvedReference(fact.to_string()), None))?;
        let mut t = self.apply(
            Rule::Assume {
                name: fact.to_string(),
                formula: h.formula.clone(),
            },
            &[],
        )?;
        let mut used = Vec::new();
        while let Formula::Forall(x, _, _) = &t.sequent().goal {
            let x = x.clone();
            let Some(term) = lookup_binding(bindings, &x) else {
                return Err((
                    FailureReport::Instantiation(format!("no binding for `{x}` in `{fact}`")),
                    None,
                ));
            };
            t = self
                .kernel
                .apply(Rule::ForallE { term: term.clone() }, &[t])
                .map_err(|e| {
                    (
                        FailureReport::Instantiation(format!("binding `{x} := {term}`: {e}")),
                        None,
                    )
                })?;
            used.push(x);
        }
        if let Some(b) = bindings.iter().find(|b| !used.contains(&b.var)) {
            return Err((
                FailureReport::Instantiation(format!("`{fact}` has no quantified variable `{}`", b.var)),
                None,
            ));
        }
        Ok(t)
    }

    /// Discharges the preconditions of `t` (an implication chain) by the solvers.
    fn modus_ponens(
        &self,
        mut t: Theorem,
        pre: &[Formula],
        ctx: &[Hyp],
        local: &mut Local,
        ob: &str,
    ) -> Result<Theorem, Failure> {
        for p in pre {
            let side = self
                .auto(Sequent::new(ctx.to_vec(), p.clone()), local, ob)
                .map_err(|(r, _)| {
                    let detail = format!("precondition `{p}`: {}", r.detail());
                    match r {
                        FailureReport::Countermodel(m) => (FailureReport::Countermodel(m), Some(detail)),
                        _ => (FailureReport::SideObligation(detail), None),
                    }
                })?;
            t = self.apply(Rule::ImpE, &[t, side])?;
        }
        Ok(t)
    }

    fn exact(
        &self,
        n: &SketchNode,
        ctx: &[Hyp],
        fact: &str,
        bindings: &[Binding],
        local: &mut Local,
    ) -> Result<Theorem, Failure> {
        let ob = format!("{}/exact", n.id);
        let t = self.instantiate(ctx, fact, bindings)?;
        let inst = t.sequent().goal.clone();
        let Some((pre, _)) = peel(&inst, |c| c.alpha_eq(&n.goal)) else {
            return Err((
                FailureReport::Instantiation(format!("instance `{inst}` does not match goal `{}`", n.goal)),
                None,
            ));
        };
        let pre: Vec<Formula> = pre.into_iter().cloned().collect();
        local.via.insert(ob.clone(), "kernel".into());
        self.modus_ponens(t, &pre, ctx, local, &ob)
    }

    fn rewrite(&self, n: &SketchNode, ctx: &[Hyp], local: &mut Local) -> Result<(Theorem, Theorem), Failure> {
        let Method::Rewrite {
            fact,
            position,
            direction,
            bindings,
        } = &n.method
        else {
            unreachable!("rewrite node")
        };
        let child = &n.children[0];
        let Some((l, r)) = rewrite_equation(&n.goal, &child.goal, position) else {
            return Err((
                FailureReport::Rewrite(format!(
                    "{position} is not a term position of both `{}` and `{}`",
                    n.goal, child.goal
                )),
                None,
            ));
        };
        let ob = format!("{}/rewrite-eq", n.id);
        let t = self.instantiate(ctx, fact, bindings)?;
        let inst = t.sequent().goal.clone();
        let Some((pre, Formula::Eq(a, b))) = peel(&inst, |c| matches!(c, Formula::Eq(..))) else {
            return Err((
                FailureReport::Instantiation(format!("instance `{inst}` of `{fact}` is not an equation")),
                None,
            ));
        };
        let (from, to) = match direction {
            Direction::Ltr => (a, b),
            Direction::Rtl => (b, a),
        };
        if *from != l {
            return Err((
                FailureReport::Rewrite(format!(
                    "subterm at {position} is `{l}`, but `{fact}` rewrites `{from}`"
                )),
                None,
            ));
        }
        if *to != r {
            return Err((
                FailureReport::Rewrite(format!(
                    "child goal has `{r}` at {position}, but `{fact}` produces `{to}`"
                )),
                None,
            ));
        }
        let pre: Vec<Formula> = pre.into_iter().cloned().collect();
        local.via.insert(ob.clone(), "kernel".into());
        let mut eq = self.modus_ponens(t, &pre, ctx, local, &ob)?;
        if *direction == Direction::Rtl {
            eq = self.apply(Rule::Sym, &[eq])?;
        }
        let hyp = self.apply(
            Rule::Assume {
                name: format!("h{}.rw", n.id),
                formula: child.goal.clone(),
            },
            &[],
        )?;
        let back = self
            .kernel
            .apply(
                Rule::SubstEq {
                    position: position.clone(),
                    direction: Direction::Rtl,
                },
                &[eq.clone(), hyp],
            )
            .map_err(|e| (FailureReport::Rewrite(e.to_string()), None))?;
        if !back.sequent().goal.alpha_eq(&n.goal) {
            return Err((
                FailureReport::Rewrite(format!(
                    "rewriting `{}` back at {position} gives `{}`, not `{}`",
                    child.goal,
                    back.sequent().goal,
                    n.goal
                )),
                None,
            ));
        }
        local.via.insert(format!("{}/rewrite-check", n.id), "kernel".into());
        Ok((eq, back))
    }

    fn discharge_node(&self, job: &NodeJob<'_>) -> (Local, Result<(), Failure>) {
        let n = job.node;
        let ctx = &job.ctx;
        let mut local = Local {
            theorems: Vec::new(),
            certs: Vec::new(),
            solver_calls: 0,
            via: BTreeMap::new(),
        };
        let refs = n.method.fact().into_iter().chain(n.uses.iter().map(|u| u.as_str()));
        for r in refs {
            if !ctx.iter().any(|h| h.name == r) {
                return (local, Err((FailureReport::UnresolvedReference(r.to_string()), None)));
            }
        }
        let res = match &n.method {
            Method::Hole => {
                let ob = format!("{}/hole", n.id);
                self.auto(Sequent::new(ctx.clone(), n.goal.clone()), &mut local, &ob)
                    .map(|t| local.theorems.push((ob, t)))
            }
            Method::Exact { fact, bindings } => self
                .exact(n, ctx, fact, bindings, &mut local)
                .map(|t| local.theorems.push((format!("{}/exact", n.id), t))),
            Method::Rewrite { .. } => self.rewrite(n, ctx, &mut local).map(|(eq, back)| {
                local.theorems.push((format!("{}/rewrite-eq", n.id), eq));
                local.theorems.push((format!("{}/rewrite-check", n.id), back));
            }),
            Method::Split(_) | Method::Induction(_) | Method::Contradiction => Ok(()),
        };
        (local, res)
    }

    fn record(&self, job: &NodeJob<'_>, info: &NodeKeyInfo, f: &Failure) -> FailureRecord {
        let (report, extra) = f;
        let mut detail = report.detail();
        if let Some(e) = extra {
            detail = format!("{detail} ({e})");
        }
        FailureRecord {
            node_id: job.node.id.clone(),
            cause: classify(report),
            context: job.ctx.clone(),
            goal: job.node.goal.clone(),
            detail,
            countermodel: match report {
                FailureReport::Countermodel(m) => Some(m.clone()),
                _ => None,
            },
            hints: info.hints.clone(),
        }
    }

    pub fn run(&self) -> Result<ProveReport, EngineError> {
        // Unknown facts surface as missing-lemma failures during discharge.
        let wf = validate_sketch(self.sketch, Some(self.lib));
        if wf.issues.iter().any(|i| i.kind != IssueKind::UnknownFact) {
            return Err(EngineError::Invalid(wf));
        }
        let keys: BTreeMap<String, NodeKeyInfo> = node_keys(self.sketch, self.lib, &self.cfg.key_config())
            .into_iter()
            .collect();
        let obligations = extract(self.sketch, Some(self.lib));
        let jobs = build_jobs(self.sketch, self.lib, &obligations);
        let mut stats = Stats::default();

        // Cache lookups first; misses are discharged afterwards.
        let mut results: Vec<Option<NodeResult>> = vec![None; jobs.len()];
        let mut misses = Vec::new();
        for (i, job) in jobs.iter().enumerate() {
            let info = &keys[&job.node.id];
            let Some(entry) = self.store.lookup(&info.key) else {
                misses.push(i);
                continue;
            };
            let out = match &entry.verdict {
                EntryVerdict::Failed(rec) => Err(rec.clone()),
                EntryVerdict::Accepted { theorems } if !fits(job, theorems) => {
                    log::warn!(
                        "cache entry {} does not fit node `{}`; ignoring",
                        info.key.0,
                        job.node.id
                    );
                    misses.push(i);
                    continue;
                }
                EntryVerdict::Accepted { .. } => match entry.restore(&self.kernel) {
                    Ok(ts) => Ok(ts),
                    Err(m) => {
                        log::warn!(
                            "cache entry {} for node `{}` failed replay: {m}",
                            info.key.0,
                            job.node.id
                        );
                        misses.push(i);
                        continue;
                    }
                },
            };
            stats.cache_hits += 1;
            let via = if out.is_ok() {
                job.obligations
                    .iter()
                    .map(|o| (o.id.clone(), "cache".to_string()))
                    .collect()
            } else {
                BTreeMap::new()
            };
            results[i] = Some(NodeResult {
                out,
                cache_hit: true,
                via,
                certs: entry.certificates,
            });
        }
        stats.cache_misses = misses.len();

        let fresh = self.discharge_all(&jobs, &misses);
        for (&i, (local, res)) in misses.iter().zip(fresh) {
            let job = &jobs[i];
            let info = &keys[&job.node.id];
            stats.solver_calls += local.solver_calls;
            stats.discharged_nodes.push(job.node.id.clone());
            stats
                .discharged_obligations
                .extend(job.obligations.iter().map(|o| o.id.clone()));
            let (verdict, out) = match res {
                Ok(()) => (
                    EntryVerdict::Accepted {
                        theorems: local
                            .theorems
                            .iter()
                            .map(|(ob, t)| StoredTheorem {
                                obligation: ob.clone(),
                                sequent: t.sequent().clone(),
                                proof: t.proof_object().to_text(),
                            })
                            .collect(),
                    },
                    Ok(local.theorems.iter().map(|(_, t)| t.clone()).collect()),
                ),
                Err(f) => {
                    let rec = self.record(job, info, &f);
                    (EntryVerdict::Failed(rec.clone()), Err(rec))
                }
            };
            let entry = CacheEntry {
                key: info.key,
                node_id: job.node.id.clone(),
                verdict,
                certificates: local.certs.clone(),
                signature: self.sketch.signature.clone(),
                created: now(),
            };
            if let Err(e) = self.store.store(&entry) {
                log::warn!("cannot store entry for `{}`: {e}", job.node.id);
            }
            results[i] = Some(NodeResult {
                out,
                cache_hit: false,
                via: local.via,
                certs: local.certs,
            });
        }

        let results: Vec<NodeResult> = results.into_iter().map(|r| r.expect("every node resolved")).collect();
        let index: BTreeMap<&str, usize> = jobs.iter().enumerate().map(|(i, j)| (j.node.id.as_str(), i)).collect();
        let mut asm = Assembly {
            jobs: &jobs,
            results: &results,
            index,
            keys: &keys,
            failures: Vec::new(),
            status: BTreeMap::new(),
        };
        let root = self.assemble(&self.sketch.root, &mut asm);
        let Assembly { failures, status, .. } = asm;

        let mut obligation_verdicts = Vec::new();
        for (job, r) in jobs.iter().zip(&results) {
            for o in &job.obligations {
                let st = match &r.out {
                    Ok(_) => ObligationStatus::Accepted,
                    Err(_) if r.via.contains_key(&o.id) => ObligationStatus::Accepted,
                    Err(rec) if obligation_failed(o, rec) => ObligationStatus::Failed,
                    Err(_) => ObligationStatus::Skipped,
                };
                obligation_verdicts.push(ObligationVerdict {
                    id: o.id.clone(),
                    node_id: o.node_id.clone(),
                    slot: o.slot,
                    route: o.route,
                    status: st,
                    via: r.via.get(&o.id).cloned().unwrap_or_else(|| "none".into()),
                });
            }
        }

        let nodes = jobs
            .iter()
            .zip(&results)
            .map(|(job, r)| NodeOutcome {
                node_id: job.node.id.clone(),
                status: status.get(&job.node.id).cloned().unwrap_or(NodeStatus::Blocked),
                cache_hit: r.cache_hit,
                cause: failures.iter().find(|f| f.node_id == job.node.id).map(|f| f.cause),
            })
            .collect();

        let verdict = match root {
            Some(t) if failures.is_empty() => {
                let pool: Vec<&StoredCert> = results.iter().flat_map(|r| r.certs.iter()).collect();
                match self.finish(t, &pool) {
                    Ok(acc) => Verdict::Accepted(Box::new(acc)),
                    Err(rec) => Verdict::Rejected(vec![rec]),
                }
            }
            _ => Verdict::Rejected(failures),
        };
        Ok(ProveReport {
            verdict,
            nodes,
            obligations: obligation_verdicts,
            stats,
        })
    }

    fn discharge_all(&self, jobs: &[NodeJob<'_>], misses: &[usize]) -> Vec<(Local, Result<(), Failure>)> {
        if self.cfg.jobs <= 1 || misses.len() <= 1 {
            return misses.iter().map(|&i| self.discharge_node(&jobs[i])).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Discharged>>> = misses.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..self.cfg.jobs.min(misses.len()) {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    if k >= misses.len() {
                        break;
                    }
                    let r = self.discharge_node(&jobs[misses[k]]);
                    *slots[k].lock().expect("slot lock") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot lock").expect("job ran"))
            .collect()
    }

    fn assemble(&self, n: &SketchNode, asm: &mut Assembly<'_, '_>) -> Option<Theorem> {
        let i = asm.index[n.id.as_str()];
        let kids: Vec<Option<Theorem>> = n.children.iter().map(|c| self.assemble(c, asm)).collect();
        let local = match &asm.results[i].out {
            Err(rec) => {
                asm.failures.push(rec.clone());
                asm.status.insert(n.id.clone(), NodeStatus::Failed);
                return None;
            }
            Ok(ts) => ts,
        };
        if kids.iter().any(Option::is_none) {
            asm.status.insert(n.id.clone(), NodeStatus::Blocked);
            return None;
        }
        let kids: Vec<Theorem> = kids.into_iter().flatten().collect();
        match self.combine(n, local, &kids) {
            Ok(t) => {
                asm.status.insert(n.id.clone(), NodeStatus::Accepted);
                Some(t)
            }
            Err(f) => {
                let rec = self.record(&asm.jobs[i], &asm.keys[&n.id], &f);
                asm.failures.push(rec);
                asm.status.insert(n.id.clone(), NodeStatus::Failed);
                None
            }
        }
    }

    /// Derives `⊢ c ∨ ¬c` inside the kernel.
    fn excluded_middle(&self, c: &Formula) -> Result<Theorem, Failure> {
        let lem = Formula::or(c.clone(), Formula::not(c.clone()));
        let not_lem = Formula::not(lem.clone());
        let assume = |name: &str, f: &Formula| {
            self.apply(
                Rule::Assume {
                    name: name.into(),
                    formula: f.clone(),
                },
                &[],
            )
        };
        let c_thm = assume("emc", c)?;
        let left = self.apply(
            Rule::OrIL {
                right: Formula::not(c.clone()),
            },
            &[c_thm],
        )?;
        let bot = self.apply(Rule::NotE, &[assume("em", &not_lem)?, left])?;
        let not_c = self.apply(
            Rule::NotI {
                name: "emc".into(),
                formula: c.clone(),
            },
            &[bot],
        )?;
        let right = self.apply(Rule::OrIR { left: c.clone() }, &[not_c])?;
        let bot = self.apply(Rule::NotE, &[assume("em", &not_lem)?, right])?;
        self.apply(
            Rule::Raa {
                name: "em".into(),
                formula: lem,
            },
            &[bot],
        )
    }

    fn combine(&self, n: &SketchNode, local: &[Theorem], kids: &[Theorem]) -> Result<Theorem, Failure> {
        let h = |slot: &str| format!("h{}.{slot}", n.id);
        match &n.method {
            Method::Hole | Method::Exact { .. } => Ok(local[0].clone()),
            Method::Rewrite { .. } => {
                let imp = self.apply(
                    Rule::ImpI {
                        name: h("rw"),
                        antecedent: n.children[0].goal.clone(),
                    },
                    &[local[1].clone()],
                )?;
                self.apply(Rule::ImpE, &[imp, kids[0].clone()])
            }
            Method::Split(c) => {
                let lem = self.excluded_middle(c)?;
                self.apply(
                    Rule::OrE {
                        left: h("pos"),
                        right: h("neg"),
                    },
                    &[lem, kids[0].clone(), kids[1].clone()],
                )
            }
            Method::Induction(v) => {
                let body = crate::sketch::induction_body(&n.goal, v).ok_or_else(|| {
                    (
                        FailureReport::SideObligation("goal lost its induction schema".into()),
                        None,
                    )
                })?;
                self.apply(
                    Rule::InductionInt {
                        var: v.clone(),
                        eigen: v.clone(),
                        ge: h("ge"),
                        ih: h("ih"),
                        body: body.clone(),
                    },
                    &[kids[0].clone(), kids[1].clone()],
                )
            }
            Method::Contradiction => self.apply(
                Rule::Raa {
                    name: h("neg"),
                    formula: n.goal.clone(),
                },
                &[kids[0].clone()],
            ),
        }
    }

    /// Weakens the root theorem to the claimed sequent and records it.
    #[allow(clippy::result_large_err)]
    fn finish(&self, mut t: Theorem, pool: &[&StoredCert]) -> Result<Accepted, FailureRecord> {
        let claim = claimed_sequent(self.sketch, self.lib);
        let fail = |detail: String| FailureRecord {
            node_id: self.sketch.root.id.clone(),
            cause: CauseClass::UnsatisfiedPrecondition,
            context: claim.context.clone(),
            goal: claim.goal.clone(),
            detail,
            countermodel: None,
            hints: Vec::new(),
        };
        if let Some(h) = t.sequent().context.iter().find(|h| claim.hyp(&h.name).is_none()) {
            return Err(fail(format!(
                "root theorem depends on undischarged hypothesis `{}`",
                h.name
            )));
        }
        for h in &claim.context {
            if t.sequent().hyp(&h.name).is_none() {
                t = self
                    .kernel
                    .apply(
                        Rule::Weaken {
                            name: h.name.clone(),
                            formula: h.formula.clone(),
                        },
                        &[t],
                    )
                    .map_err(|e| fail(e.to_string()))?;
            }
        }
        if !t.sequent().alpha_eq(&claim) {
            return Err(fail(format!(
                "assembled `{}` differs from the claim `{claim}`",
                t.sequent()
            )));
        }
        let proof = t.proof_object();
        let mut certificates: Vec<StoredCert> = Vec::new();
        for d in proof.cert_digests() {
            if certificates.iter().any(|c| c.sequent.digest() == d) {
                continue;
            }
            if let Some(c) = pool.iter().find(|c| c.sequent.digest() == d) {
                certificates.push((*c).clone());
            }
        }
        Ok(Accepted {
            theorem: t,
            proof,
            certificates,
        })
    }
}

fn build_jobs<'s>(s: &'s Sketch, lib: &LemmaLibrary, obs: &'s ObligationSet) -> Vec<NodeJob<'s>> {
    fn go<'s>(
        n: &'s SketchNode,
        ctx: &mut Vec<Hyp>,
        lib: &LemmaLibrary,
        obs: &'s ObligationSet,
        out: &mut Vec<NodeJob<'s>>,
    ) {
        let mut full = ctx.clone();
        for h in used_lemmas(n, lib) {
            if !full.iter().any(|c| c.name == h.name) {
                full.push(h);
            }
        }
        out.push(NodeJob {
            node: n,
            ctx: full,
            obligations: obs.for_node(&n.id),
        });
        for (i, c) in n.children.iter().enumerate() {
            let ext = n.child_extension(i);
            let k = ext.len();
            ctx.extend(ext);
            go(c, ctx, lib, obs, out);
            ctx.truncate(ctx.len() - k);
        }
    }
    let mut out = Vec::new();
    go(&s.root, &mut s.context.clone(), lib, obs, &mut out);
    out
}

fn obligation_failed(o: &Obligation, rec: &FailureRecord) -> bool {
    match o.slot {
        Slot::RewriteCheck => rec.cause == CauseClass::InvalidRewrite,
        _ => true,
    }
}

/// Convenience wrapper: validate, discharge and assemble with a fresh kernel.
pub fn prove(s: &Sketch, lib: &LemmaLibrary, store: &Store, cfg: ProverConfig) -> Result<ProveReport, EngineError> {
    Prover::new(s, lib, store, cfg).run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::Certificate;
    use crate::sketch::parse_sketch;

    pub(crate) const ADD_ZERO: &str = "
theorem add_zero: forall n:Int. n >= 0 -> plus(n, 0) = n
signature { fun plus: Int, Int -> Int; }
context {
  plus_zero_left: forall x:Int. plus(0, x) = x;
  plus_succ: forall x:Int. forall y:Int. plus(x + 1, y) = plus(x, y) + 1;
  eq_refl_int: forall x:Int. x = x;
}
proof
node root {
  goal: forall n:Int. n >= 0 -> plus(n, 0) = n;
  method: induction(n);
  node base {
    goal: plus(0, 0) = 0;
    method: exact(plus_zero_left, x := 0);
  }
  node step {
    goal: plus(n + 1, 0) = n + 1;
    method: rewrite(plus_succ, [0], ltr, x := n, y := 0);
    node step2 {
      goal: plus(n, 0) + 1 = n + 1;
      method: rewrite(hroot.ih, [0, 0], ltr);
      node step3 {
        goal: n + 1 = n + 1;
        method: exact(eq_refl_int, x := n + 1);
      }
    }
  }
}
";

    fn run(text: &str) -> ProveReport {
        let s = parse_sketch(text).unwrap();
        prove(
            &s,
            &LemmaLibrary::default(),
            &Store::in_memory(),
            ProverConfig::default(),
        )
        .unwrap()
    }

    fn causes(r: &ProveReport) -> Vec<(String, CauseClass)> {
        match &r.verdict {
            Verdict::Rejected(fs) => fs.iter().map(|f| (f.node_id.clone(), f.cause)).collect(),
            Verdict::Accepted(_) => Vec::new(),
        }
    }

    fn accepted(r: &ProveReport) -> &Accepted {
        match &r.verdict {
            Verdict::Accepted(a) => a,
            Verdict::Rejected(fs) => panic!("rejected: {fs:?}"),
        }
    }

    #[test]
    fn add_zero_is_accepted_and_replays() {
        let s = parse_sketch(ADD_ZERO).unwrap();
        let lib = LemmaLibrary::default();
        let r = prove(&s, &lib, &Store::in_memory(), ProverConfig::default()).unwrap();
        let a = accepted(&r);
        let claim = claimed_sequent(&s, &lib);
        assert!(a.theorem.sequent().alpha_eq(&claim));
        assert!(a.certificates.is_empty());
        let po = ProofObject::parse(&a.proof.to_text()).unwrap();
        let t = Kernel::new(s.signature.clone()).replay(&po, &claim).unwrap();
        assert_eq!(t.sequent().digest(), claim.digest());
        assert!(r.nodes.iter().all(|n| n.status == NodeStatus::Accepted));
        assert!(r.obligations.iter().all(|o| o.status == ObligationStatus::Accepted));
        assert_eq!(r.stats.solver_calls, 0);
    }

    const LIA: &str = "theorem t: c + 1 >= 2 signature { const c: Int; } context { h1: c >= 1; }
proof node root { goal: c + 1 >= 2; method: hole; }";

    #[test]
    fn certified_hole_needs_its_certificate_on_replay() {
        let s = parse_sketch(LIA).unwrap();
        let lib = LemmaLibrary::default();
        let r = prove(&s, &lib, &Store::in_memory(), ProverConfig::default()).unwrap();
        let a = accepted(&r);
        assert_eq!(a.certificates.len(), 1);
        assert_eq!(r.stats.solver_calls, 1);
        let claim = claimed_sequent(&s, &lib);
        let k = Kernel::new(s.signature.clone());
        assert!(k.replay(&a.proof, &claim).is_err());
        for c in &a.certificates {
            let cert = Certificate::parse(&c.kind, &c.text).unwrap();
            let token = certify(&c.sequent, &cert).unwrap();
            k.admit_certified(&c.sequent, &token).unwrap();
        }
        k.replay(&a.proof, &claim).unwrap();
    }

    #[test]
    fn false_hole_reports_a_countermodel() {
        let r = run("theorem t: c >= 1 signature { const c: Int; } context { h1: c >= 0; }
proof node root { goal: c >= 1; method: hole; }");
        let Verdict::Rejected(fs) = &r.verdict else { panic!() };
        assert_eq!(fs[0].cause, CauseClass::UnsatisfiedPrecondition);
        let m = fs[0].countermodel.as_ref().expect("countermodel");
        assert_eq!(m.0, vec![("c".to_string(), "0".to_string())]);
    }

    #[test]
    fn unknown_fact_is_a_missing_lemma() {
        let r = run(&ADD_ZERO.replace("exact(plus_zero_left, x := 0)", "exact(lemX)"));
        assert_eq!(causes(&r), [("base".to_string(), CauseClass::MissingLemma)]);
        assert_eq!(r.nodes[0].status, NodeStatus::Blocked);
    }

    #[test]
    fn wrong_binding_fails_instantiation() {
        let r = run(&ADD_ZERO.replace("exact(plus_zero_left, x := 0)", "exact(plus_zero_left, x := 1)"));
        assert_eq!(causes(&r), [("base".to_string(), CauseClass::FailedInstantiation)]);
        let r = run(&ADD_ZERO.replace("exact(plus_zero_left, x := 0)", "exact(plus_zero_left)"));
        assert_eq!(causes(&r), [("base".to_string(), CauseClass::FailedInstantiation)]);
    }

    #[test]
    fn wrong_position_is_an_invalid_rewrite() {
        let r = run(&ADD_ZERO.replace("rewrite(plus_succ, [0], ltr", "rewrite(plus_succ, [1], ltr"));
        assert_eq!(causes(&r), [("step".to_string(), CauseClass::InvalidRewrite)]);
        let r = run(&ADD_ZERO.replace("rewrite(plus_succ, [0], ltr", "rewrite(plus_succ, [0], rtl"));
        assert_eq!(causes(&r), [("step".to_string(), CauseClass::InvalidRewrite)]);
    }

    #[test]
    fn split_and_contradiction_assemble() {
        let split = "theorem t: c >= 0 \\/ c < 0 signature { const c: Int; } context { }
proof node root { goal: c >= 0 \\/ c < 0; method: split(c >= 0);
  node p { goal: c >= 0 \\/ c < 0; method: hole; }
  node q { goal: c >= 0 \\/ c < 0; method: hole; } }";
        let r = run(split);
        assert_eq!(accepted(&r).certificates.len(), 2);
        let contra = "theorem t: c >= 5 signature { const c: Int; } context { h1: c >= 1; h2: c <= 0; }
proof node root { goal: c >= 5; method: contradiction;
  node k { goal: false; method: hole; } }";
        accepted(&run(contra));
    }

    #[test]
    fn warm_store_makes_no_solver_calls() {
        let s = parse_sketch(LIA).unwrap();
        let lib = LemmaLibrary::default();
        let store = Store::in_memory();
        let cold = prove(&s, &lib, &store, ProverConfig::default()).unwrap();
        let warm = prove(&s, &lib, &store, ProverConfig::default()).unwrap();
        assert_eq!(warm.stats.solver_calls, 0);
        assert_eq!(warm.stats.cache_hits, 1);
        assert_eq!(accepted(&cold).proof.to_text(), accepted(&warm).proof.to_text());
        assert_eq!(accepted(&warm).certificates.len(), 1);
    }

    #[test]
    fn parallel_discharge_gives_the_same_proof() {
        let s = parse_sketch(ADD_ZERO).unwrap();
        let lib = LemmaLibrary::default();
        let one = prove(&s, &lib, &Store::in_memory(), ProverConfig::default()).unwrap();
        let cfg = ProverConfig {
            jobs: 4,
            ..ProverConfig::default()
        };
        let four = prove(&s, &lib, &Store::in_memory(), cfg).unwrap();
        assert_eq!(accepted(&one).proof.to_text(), accepted(&four).proof.to_text());
    }

    #[test]
    fn frontier_keeps_topmost_failures() {
        let text = "theorem t: c >= 1 signature { const c: Int; } context { }
proof node root { goal: c >= 1; method: split(c >= 0);
  node p { goal: c >= 1; method: hole; }
  node q { goal: c >= 1; method: exact(nope); } }";
        let s = parse_sketch(text).unwrap();
        let r = prove(
            &s,
            &LemmaLibrary::default(),
            &Store::in_memory(),
            ProverConfig::default(),
        )
        .unwrap();
        let ids: Vec<String> = r.frontier(&s).into_iter().map(|f| f.node_id).collect();
        assert_eq!(ids, ["p", "q"]);
    }
}
