//! Canonical serialization and SHA-256 digests.
//!
//! Bound variables are encoded as de Bruijn indices, so alpha-equivalent
//! formulas share a digest. Everything else is encoded structurally with
//! length-prefixed names; nothing depends on hash-map iteration order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use super::{Formula, Sequent, Sort, Term};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn of_bytes(bytes: &[u8]) -> Digest {
        Digest(Sha256::digest(bytes).into())
    }

    /// Digest of a serde value via its JSON form. Only deterministic for
    /// values without hash-ordered maps.
    pub fn of_json<T: Serialize + ?Sized>(v: &T) -> Digest {
        let bytes = serde_json::to_vec(v).expect("serializable value");
        let mut buf = b"psk/json/v1\0".to_vec();
        buf.extend_from_slice(&bytes);
        Digest::of_bytes(&buf)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..6])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.short())
    }
}

impl FromStr for Digest {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Incremental builder for composite digests.
#[derive(Clone, Default)]
pub struct Hasher {
    buf: Vec<u8>,
}

impl Hasher {
    pub fn new(domain: &str) -> Self {
        let mut h = Hasher { buf: Vec::new() };
        h.str(domain);
        h
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.buf.extend_from_slice(&(s.len() as u64).to_le_bytes());
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn digest(&mut self, d: &Digest) -> &mut Self {
        self.buf.extend_from_slice(&d.0);
        self
    }

    pub fn formula(&mut self, f: &Formula) -> &mut Self {
        f.encode(&mut self.buf);
        self
    }

    pub fn term(&mut self, t: &Term) -> &mut Self {
        encode_term(t, &mut Vec::new(), &mut self.buf);
        self
    }

    pub fn finish(&self) -> Digest {
        Digest::of_bytes(&self.buf)
    }
}

/// Values with an alpha-canonical byte encoding.
pub trait Canonical {
    fn encode(&self, out: &mut Vec<u8>);
}

pub fn canonical_digest<T: Canonical + ?Sized>(v: &T) -> Digest {
    let mut buf = Vec::new();
    v.encode(&mut buf);
    Digest::of_bytes(&buf)
}

fn put_str(s: &str, out: &mut Vec<u8>) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_sort(s: &Sort, out: &mut Vec<u8>) {
    match s {
        Sort::Int => out.push(0),
        Sort::Named(n) => {
            out.push(1);
            put_str(n, out);
        }
    }
}

fn encode_term(t: &Term, bound: &mut Vec<String>, out: &mut Vec<u8>) {
    match t {
        Term::Var(n, s) => match bound.iter().rposition(|b| b == n) {
            Some(i) => {
                out.push(b'b');
                out.extend_from_slice(&((bound.len() - 1 - i) as u32).to_le_bytes());
                put_sort(s, out);
            }
            None => {
                out.push(b'v');
                put_str(n, out);
                put_sort(s, out);
            }
        },
        Term::Const(c) => {
            out.push(b'c');
            put_str(c, out);
        }
        Term::App(f, args) => {
            out.push(b'f');
            put_str(f, out);
            out.extend_from_slice(&(args.len() as u32).to_le_bytes());
            for a in args {
                encode_term(a, bound, out);
            }
        }
        Term::Lit(n) => {
            out.push(b'n');
            out.extend_from_slice(&n.to_le_bytes());
        }
        Term::Add(a, b) | Term::Sub(a, b) => {
            out.push(if matches!(t, Term::Add(..)) { b'+' } else { b'-' });
            encode_term(a, bound, out);
            encode_term(b, bound, out);
        }
        Term::Mul(k, a) => {
            out.push(b'*');
            out.extend_from_slice(&k.to_le_bytes());
            encode_term(a, bound, out);
        }
    }
}

fn encode_formula(f: &Formula, bound: &mut Vec<String>, out: &mut Vec<u8>) {
    match f {
        Formula::True => out.push(b'T'),
        Formula::False => out.push(b'F'),
        Formula::Pred(p, args) => {
            out.push(b'P');
            put_str(p, out);
            out.extend_from_slice(&(args.len() as u32).to_le_bytes());
            for a in args {
                encode_term(a, bound, out);
            }
        }
        Formula::Eq(a, b) => {
            out.push(b'=');
            encode_term(a, bound, out);
            encode_term(b, bound, out);
        }
        Formula::Cmp(op, a, b) => {
            out.push(b'<');
            put_str(op.symbol(), out);
            encode_term(a, bound, out);
            encode_term(b, bound, out);
        }
        Formula::Not(a) => {
            out.push(b'~');
            encode_formula(a, bound, out);
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) => {
            out.push(match f {
                Formula::And(..) => b'&',
                Formula::Or(..) => b'|',
                _ => b'>',
            });
            encode_formula(a, bound, out);
            encode_formula(b, bound, out);
        }
        Formula::Forall(x, s, b) | Formula::Exists(x, s, b) => {
            out.push(if matches!(f, Formula::Forall(..)) { b'A' } else { b'E' });
            put_sort(s, out);
            bound.push(x.clone());
            encode_formula(b, bound, out);
            bound.pop();
        }
    }
}

impl Canonical for Formula {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(b"psk/formula/v1\0");
        encode_formula(self, &mut Vec::new(), out);
    }
}

impl Canonical for Term {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(b"psk/term/v1\0");
        encode_term(self, &mut Vec::new(), out);
    }
}

impl Canonical for Sequent {
    /// Hypotheses are encoded sorted by name, matching the order-insensitive
    /// sequent equality.
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(b"psk/sequent/v1\0");
        let mut hyps: Vec<_> = self.context.iter().collect();
        hyps.sort_by(|a, b| a.name.cmp(&b.name));
        out.extend_from_slice(&(hyps.len() as u32).to_le_bytes());
        for h in hyps {
            put_str(&h.name, out);
            encode_formula(&h.formula, &mut Vec::new(), out);
        }
        encode_formula(&self.goal, &mut Vec::new(), out);
    }
}

impl Canonical for [u8] {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self);
    }
}

impl Canonical for str {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.as_bytes());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, Hyp};

    fn d(s: &str) -> Digest {
        canonical_digest(&parse_formula(s).unwrap())
    }

    #[test]
    fn alpha_equivalent_formulas_share_digest() {
        assert_eq!(d("forall x:S. P(x)"), d("forall y:S. P(y)"));
        assert_ne!(d("A /\\ B"), d("B /\\ A"));
        assert_ne!(d("forall x:S. P(x)"), d("forall x:T. P(x)"));
        assert_ne!(
            d("forall x:S. forall y:S. R(x, y)"),
            d("forall x:S. forall y:S. R(y, x)")
        );
    }

    #[test]
    fn digest_is_stable() {
        // Frozen value: any change to the encoding must be deliberate.
        assert_eq!(d("true"), d("true"));
        assert_eq!(
            Digest::of_bytes(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sequent_digest_ignores_hypothesis_order() {
        let a = parse_formula("A").unwrap();
        let b = parse_formula("B").unwrap();
        let s1 = Sequent::new(
            vec![Hyp::new("h1", a.clone()), Hyp::new("h2", b.clone())],
            Formula::True,
        );
        let s2 = Sequent::new(vec![Hyp::new("h2", b), Hyp::new("h1", a)], Formula::True);
        assert_eq!(s1.digest(), s2.digest());
    }

    #[test]
    fn hex_round_trip() {
        let x = d("P(a)");
        assert_eq!(x.to_hex().parse::<Digest>().unwrap(), x);
        let json = serde_json::to_string(&x).unwrap();
        assert_eq!(serde_json::from_str::<Digest>(&json).unwrap(), x);
    }
}
