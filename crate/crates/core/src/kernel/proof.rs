//! Line-oriented proof objects.
//!
//! ```text
//! PROOFOBJ v1 <theorem-digest-hex>
//! <idx> <rule-id> <params-json> <premise,premise|->
//! <idx> CERT <sequent-digest-hex>
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use super::{KernelError, ProofNode, Rule, Theorem};
use crate::logic::Digest;

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepKind {
    Rule { rule: Rule, premises: Vec<usize> },
    Cert(Digest),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub index: usize,
    pub kind: StepKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofObject {
    pub theorem: Digest,
    pub steps: Vec<Step>,
}

impl ProofObject {
    pub(crate) fn record(thm: &Theorem) -> ProofObject {
        fn go(n: &Arc<ProofNode>, seen: &mut HashMap<*const ProofNode, usize>, steps: &mut Vec<Step>) -> usize {
            if let Some(&i) = seen.get(&Arc::as_ptr(n)) {
                return i;
            }
            let kind = match &**n {
                ProofNode::Cert(d) => StepKind::Cert(*d),
                ProofNode::Rule { rule, premises } => {
                    let premises = premises.iter().map(|p| go(p, seen, steps)).collect();
                    StepKind::Rule {
                        rule: rule.clone(),
                        premises,
                    }
                }
            };
            let index = steps.len();
            steps.push(Step { index, kind });
            seen.insert(Arc::as_ptr(n), index);
            index
        }
        let mut steps = Vec::new();
        go(&thm.proof, &mut HashMap::new(), &mut steps);
        ProofObject {
            theorem: thm.sequent().digest(),
            steps,
        }
    }

    /// Digests of all certified leaves.
    pub fn cert_digests(&self) -> Vec<Digest> {
        self.steps
            .iter()
            .filter_map(|s| match s.kind {
                StepKind::Cert(d) => Some(d),
                _ => None,
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("PROOFOBJ v1 {}\n", self.theorem);
        for s in &self.steps {
            match &s.kind {
                StepKind::Cert(d) => {
                    let _ = writeln!(out, "{} CERT {d}", s.index);
                }
                StepKind::Rule { rule, premises } => {
                    let mut v = serde_json::to_value(rule).expect("rules serialize");
                    if let Some(obj) = v.as_object_mut() {
                        obj.remove("rule");
                    }
                    let ps = if premises.is_empty() {
                        "-".to_string()
                    } else {
                        premises.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
                    };
                    let _ = writeln!(out, "{} {} {v} {ps}", s.index, rule.id());
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<ProofObject, KernelError> {
        let bad = |line: usize, message: String| KernelError::Malformed { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        let theorem = match header.split_whitespace().collect::<Vec<_>>()[..] {
            ["PROOFOBJ", "v1", d] => d.parse().map_err(|e| bad(1, format!("bad digest: {e}")))?,
            _ => return Err(bad(1, "expected `PROOFOBJ v1 <digest>`".into())),
        };
        let mut steps = Vec::new();
        for (n, line) in lines {
            let ln = n + 1;
            let mut parts = line.splitn(3, ' ');
            let (Some(idx), Some(rule_id), Some(rest)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad(ln, "too few fields".into()));
            };
            let index: usize = idx.parse().map_err(|_| bad(ln, format!("bad step index `{idx}`")))?;
            let kind = if rule_id == "CERT" {
                StepKind::Cert(rest.trim().parse().map_err(|e| bad(ln, format!("bad digest: {e}")))?)
            } else {
                let (params, prem) = rest
                    .rsplit_once(' ')
                    .ok_or_else(|| bad(ln, "missing premise list".into()))?;
                let mut v: serde_json::Value =
                    serde_json::from_str(params).map_err(|e| bad(ln, format!("bad parameters: {e}")))?;
                let obj = v
                    .as_object_mut()
                    .ok_or_else(|| bad(ln, "parameters must be an object".into()))?;
                obj.insert("rule".into(), serde_json::Value::String(rule_id.to_string()));
                let rule: Rule = serde_json::from_value(v).map_err(|e| bad(ln, format!("bad rule: {e}")))?;
                let premises = if prem == "-" {
                    Vec::new()
                } else {
                    prem.split(',')
                        .map(|p| p.parse().map_err(|_| bad(ln, format!("bad premise `{p}`"))))
                        .collect::<Result<_, _>>()?
                };
                StepKind::Rule { rule, premises }
            };
            steps.push(Step { index, kind });
        }
        Ok(ProofObject { theorem, steps })
    }
}
