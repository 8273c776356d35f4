use std::fmt;

use serde::{Deserialize, Serialize};

use crate::logic::{Formula, Hyp};
use crate::solver::Countermodel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauseClass {
    MissingLemma,
    FailedInstantiation,
    InvalidRewrite,
    UnsatisfiedPrecondition,
}

impl CauseClass {
    pub const ALL: [CauseClass; 4] = [
        CauseClass::MissingLemma,
        CauseClass::FailedInstantiation,
        CauseClass::InvalidRewrite,
        CauseClass::UnsatisfiedPrecondition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CauseClass::MissingLemma => "missing_lemma",
            CauseClass::FailedInstantiation => "failed_instantiation",
            CauseClass::InvalidRewrite => "invalid_rewrite",
            CauseClass::UnsatisfiedPrecondition => "unsatisfied_precondition",
        }
    }

    pub fn parse(s: &str) -> Option<CauseClass> {
        CauseClass::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for CauseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What went wrong while discharging a node, before classification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FailureReport {
    UnresolvedReference(String),
    /// Ill-sorted or missing binding, or an instance that does not match.
    Instantiation(String),
    /// Rewrite position or left-hand side mismatch.
    Rewrite(String),
    Countermodel(Countermodel),
    ResourceLimit,
    Unsupported(String),
    CertificateRejected(String),
    /// A precondition or equality side obligation that could not be shown.
    SideObligation(String),
}

/// Total mapping from failure reports to cause classes.
pub fn classify(f: &FailureReport) -> CauseClass {
    match f {
        FailureReport::UnresolvedReference(_) => CauseClass::MissingLemma,
        FailureReport::Instantiation(_) => CauseClass::FailedInstantiation,
        FailureReport::Rewrite(_) => CauseClass::InvalidRewrite,
        FailureReport::Countermodel(_)
        | FailureReport::ResourceLimit
        | FailureReport::Unsupported(_)
        | FailureReport::CertificateRejected(_)
        | FailureReport::SideObligation(_) => CauseClass::UnsatisfiedPrecondition,
    }
}

impl FailureReport {
    pub fn detail(&self) -> String {
        match self {
            FailureReport::UnresolvedReference(n) => {
                format!("`{n}` is not a context fact, hypothesis or library lemma")
            }
            FailureReport::Instantiation(m)
            | FailureReport::Rewrite(m)
            | FailureReport::SideObligation(m)
            | FailureReport::CertificateRejected(m) => m.clone(),
            FailureReport::Countermodel(m) => format!("countermodel {m}"),
            FailureReport::ResourceLimit => "solver resource limit reached".into(),
            FailureReport::Unsupported(r) => format!("unsupported: {r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub node_id: String,
    pub cause: CauseClass,
    pub context: Vec<Hyp>,
    pub goal: Formula,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub countermodel: Option<Countermodel>,
    pub hints: Vec<String>,
}

impl FailureRecord {
    /// Wire form with formulas rendered as text.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "node_id": self.node_id,
            "cause": self.cause.as_str(),
            "detail": self.detail,
            "context": self.context.iter().map(|h| serde_json::json!({"name": h.name, "formula": h.formula.to_string()})).collect::<Vec<_>>(),
            "goal": self.goal.to_string(),
            "hints": self.hints,
        });
        if let Some(m) = &self.countermodel {
            v["countermodel"] =
                m.0.iter()
                    .map(|(k, x)| (k.clone(), serde_json::Value::String(x.clone())))
                    .collect::<serde_json::Map<_, _>>()
                    .into();
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_is_total() {
        let cases = [
            (
                FailureReport::UnresolvedReference("lemX".into()),
                CauseClass::MissingLemma,
            ),
            (
                FailureReport::Instantiation("x".into()),
                CauseClass::FailedInstantiation,
            ),
            (FailureReport::Rewrite("x".into()), CauseClass::InvalidRewrite),
            (
                FailureReport::Countermodel(Countermodel(vec![("x".into(), "0".into())])),
                CauseClass::UnsatisfiedPrecondition,
            ),
            (FailureReport::ResourceLimit, CauseClass::UnsatisfiedPrecondition),
            (
                FailureReport::Unsupported("mixed-fragment".into()),
                CauseClass::UnsatisfiedPrecondition,
            ),
            (
                FailureReport::SideObligation("x".into()),
                CauseClass::UnsatisfiedPrecondition,
            ),
        ];
        for (f, c) in cases {
            assert_eq!(classify(&f), c);
        }
        for c in CauseClass::ALL {
            assert_eq!(CauseClass::parse(c.as_str()), Some(c));
        }
    }
}
