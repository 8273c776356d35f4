//! Independent certificate checking. An [`AcceptanceToken`] can only be
//! minted here, after a certificate has been checked against a problem.
//!
//! ```compile_fail
//! use psk_core::cert::AcceptanceToken;
//! use psk_core::logic::Digest;
//! let t = AcceptanceToken { sequent_digest: Digest([0; 32]), cert_digest: Digest([0; 32]), version: "" };
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::logic::{Digest, Sequent};
use crate::translate::{cnf_translation, lia_translation, CnfProblem, LiaProblem, Row, Unsupported};

mod format;

pub use format::{parse_rational, render_rational, LiaCert, RupProof};

pub const CHECKER_VERSION: &str = "psk-cert/1";

/// Evidence that a certificate was checked for the problem bound to
/// `sequent_digest`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AcceptanceToken {
    sequent_digest: Digest,
    cert_digest: Digest,
    version: &'static str,
}

impl AcceptanceToken {
    fn issue(sequent_digest: Digest, cert_digest: Digest) -> Self {
        AcceptanceToken {
            sequent_digest,
            cert_digest,
            version: CHECKER_VERSION,
        }
    }

    pub fn sequent_digest(&self) -> Digest {
        self.sequent_digest
    }

    pub fn cert_digest(&self) -> Digest {
        self.cert_digest
    }

    pub fn version(&self) -> &'static str {
        self.version
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertError {
    #[error("proof step {step}: clause is not a reverse unit propagation consequence")]
    NotRup { step: usize },
    #[error("proof does not derive the empty clause")]
    NoEmptyClause,
    #[error("proof step {step}: literal {lit} is out of range")]
    LiteralOutOfRange { step: usize, lit: i32 },
    #[error("at {path}: multiplier {index} is negative")]
    NegativeMultiplier { path: String, index: usize },
    #[error("at {path}: expected {expected} multipliers, found {found}")]
    MultiplierCount {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("at {path}: combination leaves variable `{var}` with a nonzero coefficient")]
    NonzeroResidue { path: String, var: String },
    #[error("at {path}: combined constant is not negative")]
    NotContradictory { path: String },
    #[error("at {path}: unknown variable `{var}`")]
    UnknownVariable { path: String, var: String },
    #[error("certificate is malformed: {0}")]
    Malformed(String),
    #[error("sequent cannot be translated: {0}")]
    Translation(#[from] Unsupported),
    #[error("sequent is not in the linear arithmetic fragment")]
    WrongFragment,
}

/// Checks that `proof` refutes `problem` by reverse unit propagation.
pub fn check_rup(problem: &CnfProblem, proof: &RupProof) -> Result<AcceptanceToken, CertError> {
    let n = problem.num_vars() as usize;
    let mut db: Vec<Vec<i32>> = problem.clauses().to_vec();
    let mut closed = db.iter().any(|c| c.is_empty());
    for (step, clause) in proof.clauses.iter().enumerate() {
        if let Some(&lit) = clause.iter().find(|l| **l == 0 || l.unsigned_abs() as usize > n) {
            return Err(CertError::LiteralOutOfRange { step, lit });
        }
        if !closed && !propagates_to_conflict(n, &db, clause) {
            return Err(CertError::NotRup { step });
        }
        if clause.is_empty() {
            closed = true;
        }
        db.push(clause.clone());
    }
    if !closed {
        return Err(CertError::NoEmptyClause);
    }
    Ok(AcceptanceToken::issue(
        problem.origin(),
        Digest::of_bytes(proof.to_text().as_bytes()),
    ))
}

/// Assigns the negation of `clause` and unit-propagates over `db`.
fn propagates_to_conflict(n: usize, db: &[Vec<i32>], clause: &[i32]) -> bool {
    // value[v]: 0 unassigned, 1 true, -1 false
    let mut value = vec![0i8; n + 1];
    let lit_val = |value: &[i8], l: i32| {
        let v = value[l.unsigned_abs() as usize];
        if l > 0 {
            v
        } else {
            -v
        }
    };
    let mut queue = Vec::new();
    for &l in clause {
        match lit_val(&value, -l) {
            -1 => return true,
            0 => {
                value[l.unsigned_abs() as usize] = if l > 0 { -1 } else { 1 };
                queue.push(-l);
            }
            _ => {}
        }
    }
    // occurrence lists by literal
    let idx = |l: i32| 2 * l.unsigned_abs() as usize + usize::from(l < 0);
    let mut occ: Vec<Vec<usize>> = vec![Vec::new(); 2 * n + 2];
    for (i, c) in db.iter().enumerate() {
        for &l in c {
            occ[idx(l)].push(i);
        }
    }
    let mut pending: Vec<usize> = (0..db.len()).collect();
    loop {
        for ci in pending.drain(..) {
            let c = &db[ci];
            let mut unassigned = None;
            let mut count = 0;
            let mut sat = false;
            for &l in c {
                match lit_val(&value, l) {
                    1 => {
                        sat = true;
                        break;
                    }
                    0 => {
                        count += 1;
                        unassigned = Some(l);
                    }
                    _ => {}
                }
            }
            if sat {
                continue;
            }
            match (count, unassigned) {
                (0, _) => return true,
                (1, Some(l)) => {
                    value[l.unsigned_abs() as usize] = if l > 0 { 1 } else { -1 };
                    queue.push(l);
                }
                _ => {}
            }
        }
        let Some(l) = queue.pop() else { return false };
        pending.extend(occ[idx(-l)].iter().copied());
    }
}

fn rational_rows(rows: &[Row], nvars: usize) -> Vec<(Vec<BigInt>, BigInt)> {
    rows.iter()
        .map(|r| {
            let mut a = vec![BigInt::zero(); nvars];
            for &(v, c) in &r.coeffs {
                a[v] += BigInt::from(c);
            }
            (a, BigInt::from(r.rhs))
        })
        .collect()
}

fn check_lia_node(
    p: &LiaProblem,
    rows: &mut Vec<(Vec<BigInt>, BigInt)>,
    cert: &LiaCert,
    path: &mut String,
) -> Result<(), CertError> {
    match cert {
        LiaCert::Farkas(ls) => {
            if ls.len() != rows.len() {
                return Err(CertError::MultiplierCount {
                    path: path.clone(),
                    expected: rows.len(),
                    found: ls.len(),
                });
            }
            if let Some(index) = ls.iter().position(|l| l.is_negative()) {
                return Err(CertError::NegativeMultiplier {
                    path: path.clone(),
                    index,
                });
            }
            let n = p.vars().len();
            let mut sum = vec![BigRational::zero(); n];
            let mut rhs = BigRational::zero();
            for (l, (a, b)) in ls.iter().zip(rows.iter()) {
                if l.is_zero() {
                    continue;
                }
                for (s, c) in sum.iter_mut().zip(a) {
                    *s += l * BigRational::from_integer(c.clone());
                }
                rhs += l * BigRational::from_integer(b.clone());
            }
            if let Some(v) = sum.iter().position(|s| !s.is_zero()) {
                return Err(CertError::NonzeroResidue {
                    path: path.clone(),
                    var: p.vars()[v].clone(),
                });
            }
            if !rhs.is_negative() {
                return Err(CertError::NotContradictory { path: path.clone() });
            }
            Ok(())
        }
        LiaCert::Branch {
            var,
            bound,
            left,
            right,
        } => {
            let x = p.var_index(var).ok_or_else(|| CertError::UnknownVariable {
                path: path.clone(),
                var: var.clone(),
            })?;
            let len = path.len();
            for (side, row, sub) in [
                ("L", Row::upper(x, *bound as i128), left),
                ("R", Row::lower(x, *bound as i128 + 1), right),
            ] {
                path.push('.');
                path.push_str(side);
                rows.extend(rational_rows(&[row], p.vars().len()));
                let r = check_lia_node(p, rows, sub, path);
                rows.pop();
                path.truncate(len);
                r?;
            }
            Ok(())
        }
    }
}

/// Checks that `cert` shows `problem` has no integer solution.
pub fn check_lia(problem: &LiaProblem, cert: &LiaCert) -> Result<AcceptanceToken, CertError> {
    let mut rows = rational_rows(&problem.rows(), problem.vars().len());
    check_lia_node(problem, &mut rows, cert, &mut "root".to_string())?;
    Ok(AcceptanceToken::issue(
        problem.origin(),
        Digest::of_bytes(cert.to_string().as_bytes()),
    ))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    Rup(RupProof),
    Lia(LiaCert),
}

impl Certificate {
    pub fn kind(&self) -> &'static str {
        match self {
            Certificate::Rup(_) => "rup",
            Certificate::Lia(_) => "lia",
        }
    }

    pub fn text(&self) -> String {
        match self {
            Certificate::Rup(p) => p.to_text(),
            Certificate::Lia(c) => c.to_string(),
        }
    }

    pub fn parse(kind: &str, text: &str) -> Result<Certificate, CertError> {
        match kind {
            "rup" => RupProof::parse(text).map(Certificate::Rup),
            "lia" => LiaCert::parse(text).map(Certificate::Lia),
            _ => Err(format!("unknown certificate kind `{kind}`")),
        }
        .map_err(CertError::Malformed)
    }

    pub fn digest(&self) -> Digest {
        Digest::of_bytes(self.text().as_bytes())
    }
}

/// Re-translates `seq` and checks `cert` against the result. The returned
/// token is bound to the sequent's digest.
pub fn certify(seq: &Sequent, cert: &Certificate) -> Result<AcceptanceToken, CertError> {
    match cert {
        Certificate::Rup(p) => check_rup(&cnf_translation(seq)?, p),
        Certificate::Lia(c) => check_lia(&lia_translation(seq)?.ok_or(CertError::WrongFragment)?, c),
    }
}

#[cfg(test)]
mod tests;
