//! Untrusted automation. Everything produced here is re-checked by
//! [`crate::cert`] before the kernel accepts it; this module can neither build
//! theorems nor mint acceptance tokens.
//!
//! ```compile_fail
//! use psk_core::cert::AcceptanceToken;
//! fn forge() -> AcceptanceToken { AcceptanceToken::issue(todo!(), todo!()) }
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cert::Certificate;
use crate::logic::Sequent;
use crate::translate::{cnf_translation, lia_translation, Translation, Unsupported};

pub mod lia;
pub mod sat;

pub use lia::{solve_lia, LiaResult, DEFAULT_NODE_BUDGET};
pub use sat::{solve_sat, SatResult, DEFAULT_CONFLICT_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budgets {
    pub conflicts: u64,
    pub nodes: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            conflicts: DEFAULT_CONFLICT_BUDGET,
            nodes: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Formula-level assignment: atoms to truth values, integer terms to values.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Countermodel(pub Vec<(String, String)>);

impl fmt::Display for Countermodel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} -> {v}")?;
        }
        f.write_str("}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DischargeOutcome {
    /// The certificate refers to exactly `problem`.
    Certified {
        certificate: Certificate,
        problem: Translation,
    },
    Countermodel(Countermodel),
    Unsupported(Unsupported),
    ResourceLimit,
}

/// Tries the LIA route (when the negated goal is linear) and then the
/// clausal route. Models of inexact encodings are not reported.
pub fn discharge(seq: &Sequent, budgets: Budgets) -> DischargeOutcome {
    let mut limited = false;
    match lia_translation(seq) {
        Err(u) => return DischargeOutcome::Unsupported(u),
        Ok(None) => {}
        Ok(Some(p)) => match solve_lia(&p, budgets.nodes) {
            LiaResult::Infeasible(c) => {
                return DischargeOutcome::Certified {
                    certificate: Certificate::Lia(c),
                    problem: Translation::Lia(p),
                }
            }
            LiaResult::Feasible(m) if p.is_exact() => {
                let pairs = m
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        (
                            p.term(i).map_or_else(|| p.vars()[i].clone(), |t| t.to_string()),
                            v.to_string(),
                        )
                    })
                    .collect();
                return DischargeOutcome::Countermodel(Countermodel(pairs));
            }
            LiaResult::Feasible(_) => {}
            LiaResult::ResourceLimit => limited = true,
        },
    }
    let p = match cnf_translation(seq) {
        Ok(p) => p,
        Err(u) => return DischargeOutcome::Unsupported(u),
    };
    match solve_sat(&p, budgets.conflicts) {
        SatResult::Unsat(proof) => DischargeOutcome::Certified {
            certificate: Certificate::Rup(proof),
            problem: Translation::Cnf(p),
        },
        SatResult::Sat(m) if p.is_exact() => {
            let pairs = (1..=p.num_vars())
                .filter_map(|v| p.atom(v).map(|a| (a.to_string(), m[v as usize - 1].to_string())))
                .collect();
            DischargeOutcome::Countermodel(Countermodel(pairs))
        }
        SatResult::Sat(_) if limited => DischargeOutcome::ResourceLimit,
        SatResult::Sat(_) => DischargeOutcome::Unsupported(Unsupported::MixedFragment),
        SatResult::ResourceLimit => DischargeOutcome::ResourceLimit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::certify;
    use crate::logic::eval::valid_bounded;
    use crate::logic::{parse_formula, Hyp, Signature, Sort};

    fn seq(hyps: &[&str], goal: &str) -> Sequent {
        Sequent::new(
            hyps.iter()
                .enumerate()
                .map(|(i, h)| Hyp::new(format!("h{i}"), parse_formula(h).unwrap()))
                .collect(),
            parse_formula(goal).unwrap(),
        )
    }

    fn certified(s: &Sequent) -> &'static str {
        match discharge(s, Budgets::default()) {
            DischargeOutcome::Certified { certificate, problem } => {
                let t = certify(s, &certificate).unwrap();
                assert_eq!(t.sequent_digest(), s.digest());
                match problem {
                    Translation::Cnf(p) => assert_eq!(p.origin(), s.digest()),
                    Translation::Lia(p) => assert_eq!(p.origin(), s.digest()),
                }
                certificate.kind()
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spec_examples() {
        assert_eq!(certified(&seq(&[], "A -> A")), "rup");
        assert_eq!(
            discharge(&seq(&[], "x >= 1"), Budgets::default()),
            DischargeOutcome::Countermodel(Countermodel(vec![("x".into(), "0".into())]))
        );
        let s = seq(&["n >= 0"], "n + 1 >= 1");
        assert_eq!(certified(&s), "lia");
        let mut sig = Signature::new();
        sig.add_constant("n", Sort::Int).unwrap();
        assert!(valid_bounded(&s, &sig, 1, (0, 3)).unwrap().is_none());
    }

    #[test]
    fn propositional_countermodel() {
        match discharge(&seq(&["A \\/ B"], "A"), Budgets::default()) {
            DischargeOutcome::Countermodel(m) => {
                assert!(m.0.contains(&("A".into(), "false".into())));
                assert!(m.0.contains(&("B".into(), "true".into())));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn opaque_equality_is_not_a_countermodel() {
        assert_eq!(
            discharge(&seq(&["a = b"], "b = a"), Budgets::default()),
            DischargeOutcome::Unsupported(Unsupported::MixedFragment)
        );
        // Syntactically identical atoms are shared.
        assert_eq!(certified(&seq(&["a = b", "a = b -> P(a)"], "P(a)")), "rup");
        assert_eq!(
            discharge(&seq(&[], "forall x:S. P(x)"), Budgets::default()),
            DischargeOutcome::Unsupported(Unsupported::QuantifiedAfterFlattening)
        );
    }

    #[test]
    fn contradiction_from_arithmetic_hypotheses() {
        assert_eq!(certified(&seq(&["x >= 1", "x <= 0", "P(a)"], "false")), "lia");
        assert_eq!(certified(&seq(&["2 * c = 1"], "false")), "lia");
    }
}
