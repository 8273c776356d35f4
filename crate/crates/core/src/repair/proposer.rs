//! Wire protocol for external proposers.
//!
//! Request: `PROPOSE <byte-length>\n<json>`. Reply: `NODE <byte-length>\n<node text>`
//! or `GIVEUP\n`. HTTP proposers receive the bare JSON as a POST body and answer
//! with a reply frame.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use thiserror::Error;

use super::FailureRecord;
use crate::library::LemmaLibrary;

pub const PROTOCOL: &str = "psk-repair/1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProposalRequest {
    pub round: usize,
    pub failure: FailureRecord,
    pub node_source: String,
    /// Hint ids with their formulas, when the library knows them.
    pub hint_formulas: Vec<(String, String)>,
}

impl ProposalRequest {
    pub fn new(round: usize, failure: FailureRecord, node_source: String, lib: &LemmaLibrary) -> Self {
        let hint_formulas = failure
            .hints
            .iter()
            .filter_map(|h| lib.get(h).map(|l| (h.clone(), l.formula.to_string())))
            .collect();
        ProposalRequest {
            round,
            failure,
            node_source,
            hint_formulas,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut failure = self.failure.to_json();
        failure["hints"] = self
            .hint_formulas
            .iter()
            .map(|(id, f)| serde_json::json!({"id": id, "formula": f}))
            .collect::<Vec<_>>()
            .into();
        serde_json::json!({
            "protocol": PROTOCOL,
            "round": self.round,
            "failure": failure,
            "node_source": self.node_source,
        })
    }

    pub fn payload(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("request serializes")
    }

    pub fn frame(&self) -> String {
        let p = self.payload();
        format!("PROPOSE {}\n{p}", p.len())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reply {
    Node(String),
    GiveUp,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProposerError {
    #[error("proposer i/o: {0}")]
    Io(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("proposer did not answer within {0:?}")]
    Timeout(Duration),
}

pub trait Proposer {
    fn propose(&mut self, req: &ProposalRequest) -> Result<Reply, ProposerError>;
}

impl<F> Proposer for F
where
    F: FnMut(&ProposalRequest) -> Result<Reply, ProposerError>,
{
    fn propose(&mut self, req: &ProposalRequest) -> Result<Reply, ProposerError> {
        self(req)
    }
}

/// Reads one reply frame.
pub fn read_reply(r: &mut impl BufRead) -> Result<Reply, ProposerError> {
    let mut header = String::new();
    let n = r.read_line(&mut header).map_err(|e| ProposerError::Io(e.to_string()))?;
    if n == 0 {
        return Err(ProposerError::Io("proposer closed its output".into()));
    }
    let header = header.trim_end_matches(['\n', '\r']);
    if header == "GIVEUP" {
        return Ok(Reply::GiveUp);
    }
    let len = header
        .strip_prefix("NODE ")
        .and_then(|l| l.trim().parse::<usize>().ok())
        .ok_or_else(|| ProposerError::Protocol(format!("expected `NODE <len>` or `GIVEUP`, got `{header}`")))?;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|e| ProposerError::Protocol(format!("short node body: {e}")))?;
    String::from_utf8(buf)
        .map(Reply::Node)
        .map_err(|_| ProposerError::Protocol("node body is not UTF-8".into()))
}

pub fn reply_frame(r: &Reply) -> String {
    match r {
        Reply::Node(t) => format!("NODE {}\n{t}", t.len()),
        Reply::GiveUp => "GIVEUP\n".into(),
    }
}

/// Answers each failing node id from a fixed table; unknown ids give up.
#[derive(Clone, Debug, Default)]
pub struct ScriptedProposer {
    replies: BTreeMap<String, VecDeque<Reply>>,
    /// Reply used once a node's queue is empty.
    sticky: BTreeMap<String, Reply>,
    pub requests: Vec<ProposalRequest>,
}

impl ScriptedProposer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Always answers `node_id` with `text`.
    pub fn fix(mut self, node_id: &str, text: &str) -> Self {
        self.sticky.insert(node_id.into(), Reply::Node(text.into()));
        self
    }

    /// Queues a one-shot reply for `node_id`.
    pub fn then(mut self, node_id: &str, reply: Reply) -> Self {
        self.replies.entry(node_id.into()).or_default().push_back(reply);
        self
    }
}

impl Proposer for ScriptedProposer {
    fn propose(&mut self, req: &ProposalRequest) -> Result<Reply, ProposerError> {
        self.requests.push(req.clone());
        let id = &req.failure.node_id;
        if let Some(r) = self.replies.get_mut(id).and_then(VecDeque::pop_front) {
            return Ok(r);
        }
        Ok(self.sticky.get(id).cloned().unwrap_or(Reply::GiveUp))
    }
}

/// Returns the failing node unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct EchoProposer;

impl Proposer for EchoProposer {
    fn propose(&mut self, req: &ProposalRequest) -> Result<Reply, ProposerError> {
        Ok(Reply::Node(req.node_source.clone()))
    }
}

/// A long-lived child process spoken to over stdin/stdout.
pub struct SubprocessProposer {
    child: Child,
    stdin: ChildStdin,
    replies: Receiver<Result<Reply, ProposerError>>,
    timeout: Duration,
}

impl SubprocessProposer {
    pub fn spawn(cmd: &str, timeout: Duration) -> Result<Self, ProposerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| ProposerError::Io(format!("cannot start `{cmd}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut r = BufReader::new(stdout);
            loop {
                let reply = read_reply(&mut r);
                let stop = matches!(reply, Err(ProposerError::Io(_)));
                if tx.send(reply).is_err() || stop {
                    break;
                }
            }
        });
        Ok(SubprocessProposer {
            child,
            stdin,
            replies: rx,
            timeout,
        })
    }
}

impl Proposer for SubprocessProposer {
    fn propose(&mut self, req: &ProposalRequest) -> Result<Reply, ProposerError> {
        // Late answers to a timed-out request must not be taken for this one.
        while self.replies.try_recv().is_ok() {}
        self.stdin
            .write_all(req.frame().as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| ProposerError::Io(e.to_string()))?;
        match self.replies.recv_timeout(self.timeout) {
            Ok(r) => r,
            Err(RecvTimeoutError::Timeout) => Err(ProposerError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ProposerError::Io("proposer exited".into())),
        }
    }
}

impl Drop for SubprocessProposer {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// POSTs each request to a single endpoint.
pub struct HttpProposer {
    url: String,
    agent: ureq::Agent,
}

impl HttpProposer {
    pub fn new(url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpProposer { url: url.into(), agent }
    }
}

impl Proposer for HttpProposer {
    fn propose(&mut self, req: &ProposalRequest) -> Result<Reply, ProposerError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(req.payload())
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => ProposerError::Timeout(Duration::ZERO),
                e => ProposerError::Io(e.to_string()),
            })?;
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProposerError::Io(e.to_string()))?;
        read_reply(&mut body.as_bytes())
    }
}

/// A `cmd` or `http(s)://` endpoint descriptor.
pub fn connect(endpoint: &str, timeout: Duration) -> Result<Box<dyn Proposer>, ProposerError> {
    if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
        Ok(Box::new(HttpProposer::new(endpoint, timeout)))
    } else {
        Ok(Box::new(SubprocessProposer::spawn(endpoint, timeout)?))
    }
}

impl Proposer for Box<dyn Proposer> {
    fn propose(&mut self, req: &ProposalRequest) -> Result<Reply, ProposerError> {
        (**self).propose(req)
    }
}
