//! Failure classification and the bounded repair loop.

mod driver;
mod failure;
pub mod proposer;

pub use driver::{run, Event, ExchangeOutcome, RepairConfig, RepairOutcome, Transcript};
pub use failure::{classify, CauseClass, FailureRecord, FailureReport};
pub use proposer::{EchoProposer, ProposalRequest, Proposer, ProposerError, Reply, ScriptedProposer};
