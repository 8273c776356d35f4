//! Content-addressed cache of node verdicts.
//!
//! On disk: `<root>/VERSION`, `<root>/LOCK` and one file per entry at
//! `<root>/<first two hex digits>/<key hex>.entry`, holding a header line
//! `PSKENTRY v1 <sha256 of body>` followed by the JSON body.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cert::{certify, Certificate};
use crate::kernel::{Kernel, ProofObject, Theorem};
use crate::library::{retrieve_hints, LemmaLibrary};
use crate::logic::digest::Hasher;
use crate::logic::{Digest, Hyp, Sequent, Signature};
use crate::repair::FailureRecord;
use crate::sketch::{Method, Sketch, SketchNode};

const STORE_VERSION: &str = "psk-store/1";
const ENTRY_MAGIC: &str = "PSKENTRY v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey(pub Digest);

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn hyps_into(h: &mut Hasher, hyps: &[Hyp]) {
    let mut sorted: Vec<&Hyp> = hyps.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    h.u64(sorted.len() as u64);
    for hyp in sorted {
        h.str(&hyp.name).formula(&hyp.formula);
    }
}

/// Digest of the root context: signature, facts and a configuration salt.
pub fn context_root(sig: &Signature, facts: &[Hyp], salt: &str) -> Digest {
    let mut h = Hasher::new("psk-ctx-root");
    h.digest(&Digest::of_json(sig)).str(salt);
    hyps_into(&mut h, facts);
    h.finish()
}

/// Extends a context chain digest by the hypotheses a parent adds.
pub fn context_step(parent: Digest, ext: &[Hyp]) -> Digest {
    if ext.is_empty() {
        return parent;
    }
    let mut h = Hasher::new("psk-ctx-step");
    h.digest(&parent);
    hyps_into(&mut h, ext);
    h.finish()
}

fn method_into(h: &mut Hasher, n: &SketchNode) {
    h.str(n.method.tag());
    match &n.method {
        Method::Rewrite {
            fact,
            position,
            direction,
            bindings,
        } => {
            h.str(fact).str(&position.to_string()).str(&format!("{direction:?}"));
            for b in bindings {
                h.str(&b.var).term(&b.term);
            }
            // The equation obligation is read off the child's goal.
            for c in &n.children {
                h.formula(&c.goal);
            }
        }
        Method::Exact { fact, bindings } => {
            h.str(fact);
            for b in bindings {
                h.str(&b.var).term(&b.term);
            }
        }
        Method::Split(c) => {
            h.formula(c);
        }
        Method::Induction(v) => {
            h.str(v);
        }
        Method::Contradiction | Method::Hole => {}
    }
}

/// Key over the node's goal, method and parameters, context chain and sorted
/// hint ids. Children do not contribute except where the method reads them.
pub fn node_key(n: &SketchNode, ctx_digest: Digest, hints: &[String]) -> CacheKey {
    let mut h = Hasher::new("psk-node-key");
    h.formula(&n.goal);
    method_into(&mut h, n);
    let uses: BTreeSet<&String> = n.uses.iter().collect();
    h.u64(uses.len() as u64);
    for u in uses {
        h.str(u);
    }
    h.digest(&ctx_digest);
    let mut hs: Vec<&String> = hints.iter().collect();
    hs.sort();
    hs.dedup();
    h.u64(hs.len() as u64);
    for x in hs {
        h.str(x);
    }
    CacheKey(h.finish())
}

/// Library lemmas named by a node, as hypotheses.
pub fn used_lemmas(n: &SketchNode, lib: &LemmaLibrary) -> Vec<Hyp> {
    let names: BTreeSet<&str> = n
        .method
        .fact()
        .into_iter()
        .chain(n.uses.iter().map(|u| u.as_str()))
        .collect();
    names
        .into_iter()
        .filter_map(|id| lib.get(id).map(|l| Hyp::new(id, l.formula.clone())))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyConfig {
    pub hints: usize,
    /// Mixed into every key, e.g. solver budgets.
    pub salt: String,
}

impl Default for KeyConfig {
    fn default() -> Self {
        KeyConfig {
            hints: 3,
            salt: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeKeyInfo {
    pub key: CacheKey,
    pub hints: Vec<String>,
}

/// Keys of all nodes, in document order.
pub fn node_keys(s: &Sketch, lib: &LemmaLibrary, cfg: &KeyConfig) -> Vec<(String, NodeKeyInfo)> {
    fn go(n: &SketchNode, chain: Digest, lib: &LemmaLibrary, cfg: &KeyConfig, out: &mut Vec<(String, NodeKeyInfo)>) {
        let hints = retrieve_hints(&n.goal, lib, cfg.hints);
        let local = context_step(chain, &used_lemmas(n, lib));
        out.push((
            n.id.clone(),
            NodeKeyInfo {
                key: node_key(n, local, &hints),
                hints,
            },
        ));
        for (i, c) in n.children.iter().enumerate() {
            go(c, context_step(chain, &n.child_extension(i)), lib, cfg, out);
        }
    }
    let mut out = Vec::new();
    go(
        &s.root,
        context_root(&s.signature, &s.context, &cfg.salt),
        lib,
        cfg,
        &mut out,
    );
    out
}

/// Nodes of `new` whose key is absent from `old`.
pub fn dirty_set(old: &Sketch, new: &Sketch, lib: &LemmaLibrary, cfg: &KeyConfig) -> BTreeSet<String> {
    let before: BTreeMap<String, CacheKey> = node_keys(old, lib, cfg)
        .into_iter()
        .map(|(id, k)| (id, k.key))
        .collect();
    node_keys(new, lib, cfg)
        .into_iter()
        .filter(|(id, k)| before.get(id) != Some(&k.key))
        .map(|(id, _)| id)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredTheorem {
    pub obligation: String,
    pub sequent: Sequent,
    pub proof: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredCert {
    pub sequent: Sequent,
    pub kind: String,
    pub text: String,
}

impl StoredCert {
    pub fn new(sequent: Sequent, cert: &Certificate) -> Self {
        StoredCert {
            sequent,
            kind: cert.kind().to_string(),
            text: cert.text(),
        }
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryVerdict {
    Accepted { theorems: Vec<StoredTheorem> },
    Failed(FailureRecord),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub node_id: String,
    pub verdict: EntryVerdict,
    pub certificates: Vec<StoredCert>,
    pub signature: Signature,
    pub created: u64,
}

impl CacheEntry {
    pub fn cert_digests(&self) -> Vec<Digest> {
        self.certificates.iter().map(|c| c.sequent.digest()).collect()
    }

    /// Re-checks the certificates and replays every stored proof object.
    pub fn restore(&self, kernel: &Kernel) -> Result<Vec<Theorem>, String> {
        for c in &self.certificates {
            let cert = Certificate::parse(&c.kind, &c.text).map_err(|e| e.to_string())?;
            let token = certify(&c.sequent, &cert).map_err(|e| e.to_string())?;
            kernel.admit_certified(&c.sequent, &token).map_err(|e| e.to_string())?;
        }
        let EntryVerdict::Accepted { theorems } = &self.verdict else {
            return Ok(Vec::new());
        };
        theorems
            .iter()
            .map(|t| {
                let po = ProofObject::parse(&t.proof).map_err(|e| format!("{}: {e}", t.obligation))?;
                kernel
                    .replay(&po, &t.sequent)
                    .map_err(|e| format!("{}: {e}", t.obligation))
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store {0} is locked by another process (remove LOCK if stale)")]
    Locked(PathBuf),
    #[error("store {path} has version `{found}`, expected `{STORE_VERSION}`")]
    Version { path: PathBuf, found: String },
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub struct Store {
    root: Option<PathBuf>,
    memory: Mutex<BTreeMap<CacheKey, CacheEntry>>,
    writes: Mutex<()>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish()
    }
}

fn entry_text(e: &CacheEntry) -> String {
    let body = serde_json::to_string_pretty(e).expect("entries serialize");
    format!("{ENTRY_MAGIC} {}\n{body}\n", Digest::of_bytes(body.as_bytes()))
}

fn parse_entry(text: &str) -> Result<CacheEntry, String> {
    let (header, body) = text.split_once('\n').ok_or("missing header")?;
    let digest = header.strip_prefix(ENTRY_MAGIC).ok_or("bad header")?.trim();
    let digest = Digest::from_str(digest).map_err(|e| e.to_string())?;
    let body = body.strip_suffix('\n').unwrap_or(body);
    if Digest::of_bytes(body.as_bytes()) != digest {
        return Err("digest mismatch".into());
    }
    serde_json::from_str(body).map_err(|e| e.to_string())
}

impl Store {
    pub fn in_memory() -> Store {
        Store {
            root: None,
            memory: Mutex::new(BTreeMap::new()),
            writes: Mutex::new(()),
        }
    }

    /// Opens (creating if needed) an on-disk store and takes its lock.
    pub fn open(root: impl AsRef<Path>) -> Result<Store, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let version = root.join("VERSION");
        match fs::read_to_string(&version) {
            Ok(v) if v.trim() == STORE_VERSION => {}
            Ok(v) => {
                return Err(StoreError::Version {
                    path: root,
                    found: v.trim().to_string(),
                })
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => fs::write(&version, format!("{STORE_VERSION}\n"))?,
            Err(e) => return Err(e.into()),
        }
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(root.join("LOCK"))
        {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(StoreError::Locked(root)),
            Err(e) => return Err(e.into()),
        }
        Ok(Store {
            root: Some(root),
            memory: Mutex::new(BTreeMap::new()),
            writes: Mutex::new(()),
        })
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    fn path_of(&self, k: &CacheKey) -> Option<PathBuf> {
        let hex = k.0.to_hex();
        self.root
            .as_ref()
            .map(|r| r.join(&hex[..2]).join(format!("{hex}.entry")))
    }

    pub fn lookup(&self, k: &CacheKey) -> Option<CacheEntry> {
        if let Some(e) = self.memory.lock().expect("store lock").get(k) {
            return Some(e.clone());
        }
        let path = self.path_of(k)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                log::warn!("cannot read {}: {e}", path.display());
                return None;
            }
        };
        match parse_entry(&text) {
            Ok(e) if e.key == *k => {
                self.memory.lock().expect("store lock").insert(*k, e.clone());
                Some(e)
            }
            Ok(_) => {
                log::warn!("{}: entry key does not match its file name; ignoring", path.display());
                None
            }
            Err(m) => {
                log::warn!("{}: corrupt entry ({m}); ignoring", path.display());
                None
            }
        }
    }

    pub fn store(&self, e: &CacheEntry) -> Result<(), StoreError> {
        let _w = self.writes.lock().expect("store lock");
        if let Some(path) = self.path_of(&e.key) {
            let dir = path.parent().expect("entry has a parent directory");
            fs::create_dir_all(dir)?;
            let tmp = dir.join(format!(".{}.tmp", e.key.0.to_hex()));
            fs::write(&tmp, entry_text(e))?;
            fs::rename(&tmp, &path)?;
        }
        self.memory.lock().expect("store lock").insert(e.key, e.clone());
        Ok(())
    }

    /// All readable entries plus the paths of corrupt ones.
    pub fn scan(&self) -> (Vec<CacheEntry>, Vec<PathBuf>) {
        let Some(root) = &self.root else {
            return (
                self.memory.lock().expect("store lock").values().cloned().collect(),
                Vec::new(),
            );
        };
        let mut entries = Vec::new();
        let mut corrupt = Vec::new();
        let mut files: Vec<PathBuf> = fs::read_dir(root)
            .into_iter()
            .flatten()
            .flatten()
            .filter(|d| d.path().is_dir())
            .flat_map(|d| fs::read_dir(d.path()).into_iter().flatten().flatten())
            .map(|d| d.path())
            .filter(|p| p.extension().is_some_and(|x| x == "entry"))
            .collect();
        files.sort();
        for p in files {
            match fs::read_to_string(&p)
                .map_err(|e| e.to_string())
                .and_then(|t| parse_entry(&t))
            {
                Ok(e) => entries.push(e),
                Err(_) => corrupt.push(p),
            }
        }
        (entries, corrupt)
    }

    /// Replays every accepted entry through a fresh kernel.
    pub fn audit(&self) -> AuditReport {
        let (entries, corrupt) = self.scan();
        let mut report = AuditReport {
            entries: entries.len(),
            corrupt: corrupt.iter().map(|p| p.display().to_string()).collect(),
            ..AuditReport::default()
        };
        for e in &entries {
            if let EntryVerdict::Accepted { theorems } = &e.verdict {
                let kernel = Kernel::new(e.signature.clone());
                match e.restore(&kernel) {
                    Ok(_) => report.replayed += theorems.len(),
                    Err(m) => report.failures.push((e.key.to_string(), m)),
                }
            }
        }
        report
    }

    /// Removes corrupt entries and entries that fail replay.
    pub fn gc(&self) -> Result<usize, StoreError> {
        let _w = self.writes.lock().expect("store lock");
        let (entries, corrupt) = self.scan();
        let mut removed = 0;
        for p in corrupt {
            fs::remove_file(p)?;
            removed += 1;
        }
        for e in entries {
            let kernel = Kernel::new(e.signature.clone());
            if e.restore(&kernel).is_err() {
                if let Some(p) = self.path_of(&e.key) {
                    fs::remove_file(p)?;
                }
                self.memory.lock().expect("store lock").remove(&e.key);
                removed += 1;
            }
        }
        Ok(removed)
    }
}

impl Drop for Store {
    fn drop(&mut self) {
        if let Some(root) = &self.root {
            let _ = fs::remove_file(root.join("LOCK"));
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub entries: usize,
    pub replayed: usize,
    pub corrupt: Vec<String>,
    pub failures: Vec<(String, String)>,
}

impl AuditReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty() && self.corrupt.is_empty()
    }
}

#[cfg(test)]
mod tests;
