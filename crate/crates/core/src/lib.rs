//! Proof-sketch checking: a typed sketch language, a small trusted kernel,
//! certificate-checked solvers, a content-addressed proof cache and a
//! bounded repair loop driven by an external proposer.

pub mod cert;
pub mod engine;
pub mod kernel;
pub mod library;
pub mod logic;
pub mod obligation;
pub mod repair;
pub mod sketch;
pub mod solver;
pub mod store;
pub mod testkit;
pub mod translate;

pub use engine::{claimed_sequent, prove, ProveReport, ProverConfig, Verdict};
pub use kernel::{Kernel, ProofObject, Theorem};
pub use library::LemmaLibrary;
pub use logic::{Formula, Hyp, Sequent, Signature, Sort, Term};
pub use obligation::{extract, Obligation, ObligationSet};
pub use repair::{CauseClass, FailureRecord};
pub use sketch::{parse_sketch, validate_sketch, Sketch};
pub use store::Store;
