//! Textual certificate formats.
//!
//! RUP proofs list one clause per line, each terminated by `0`, ending with
//! the empty clause (a lone `0`). LIA certificates are s-expressions:
//!
//! ```text
//! (branch x 0 (farkas 0 1 2) (farkas 1 0 1/2 1))
//! ```

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RupProof {
    pub clauses: Vec<Vec<i32>>,
}

impl RupProof {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.clauses {
            for l in c {
                out.push_str(&l.to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }

    pub fn parse(text: &str) -> Result<RupProof, String> {
        let mut clauses = Vec::new();
        let mut cur = Vec::new();
        for tok in text.split_whitespace() {
            let l: i32 = tok.parse().map_err(|_| format!("bad literal `{tok}`"))?;
            if l == 0 {
                clauses.push(std::mem::take(&mut cur));
            } else {
                cur.push(l);
            }
        }
        if !cur.is_empty() {
            return Err("unterminated clause".into());
        }
        Ok(RupProof { clauses })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LiaCert {
    /// Case split `var <= bound` (left) or `var >= bound + 1` (right).
    Branch {
        var: String,
        bound: i64,
        left: Box<LiaCert>,
        right: Box<LiaCert>,
    },
    /// Non-negative multipliers, one per row in force at this node.
    Farkas(Vec<BigRational>),
}

const MAX_DEPTH: usize = 1000;

pub fn render_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for LiaCert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiaCert::Branch {
                var,
                bound,
                left,
                right,
            } => write!(f, "(branch {var} {bound} {left} {right})"),
            LiaCert::Farkas(ls) => {
                f.write_str("(farkas")?;
                for l in ls {
                    write!(f, " {}", render_rational(l))?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, PartialEq)]
enum STok {
    Open,
    Close,
    Atom(String),
}

fn lex(text: &str) -> Result<Vec<STok>, String> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                out.push(STok::Open);
            }
            ')' => {
                chars.next();
                out.push(STok::Close);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '"' => {
                let mut s = String::from('"');
                chars.next();
                loop {
                    match chars.next() {
                        None => return Err("unterminated string".into()),
                        Some('\\') => {
                            s.push('\\');
                            s.push(chars.next().ok_or("unterminated string")?);
                        }
                        Some('"') => break,
                        Some(c) => s.push(c),
                    }
                }
                s.push('"');
                out.push(STok::Atom(s));
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c == '(' || c == ')' || c.is_whitespace() {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push(STok::Atom(s));
            }
        }
    }
    Ok(out)
}

pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let bad = || format!("bad rational `{s}`");
    let q = match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.parse().map_err(|_| bad())?;
            let q: BigInt = q.parse().map_err(|_| bad())?;
            if !q.is_positive() {
                return Err(bad());
            }
            BigRational::new(p, q)
        }
        None => BigRational::from_integer(s.parse().map_err(|_| bad())?),
    };
    Ok(q)
}

impl LiaCert {
    pub fn parse(text: &str) -> Result<LiaCert, String> {
        let toks = lex(text)?;
        let mut pos = 0;
        let c = parse_node(&toks, &mut pos, 0)?;
        if pos != toks.len() {
            return Err("trailing input after certificate".into());
        }
        Ok(c)
    }

    /// Number of nodes in the case-split tree.
    pub fn size(&self) -> usize {
        match self {
            LiaCert::Branch { left, right, .. } => 1 + left.size() + right.size(),
            LiaCert::Farkas(_) => 1,
        }
    }
}

fn parse_node(toks: &[STok], pos: &mut usize, depth: usize) -> Result<LiaCert, String> {
    if depth > MAX_DEPTH {
        return Err("certificate nested too deeply".into());
    }
    let atom = |pos: &mut usize| -> Result<String, String> {
        match toks.get(*pos) {
            Some(STok::Atom(a)) => {
                *pos += 1;
                Ok(a.clone())
            }
            _ => Err(format!("expected atom at token {pos}")),
        }
    };
    if toks.get(*pos) != Some(&STok::Open) {
        return Err(format!("expected `(` at token {pos}"));
    }
    *pos += 1;
    let head = atom(pos)?;
    let node = match head.as_str() {
        "branch" => {
            let var = atom(pos)?;
            let b = atom(pos)?;
            let bound = b.parse().map_err(|_| format!("bad bound `{b}`"))?;
            let left = Box::new(parse_node(toks, pos, depth + 1)?);
            let right = Box::new(parse_node(toks, pos, depth + 1)?);
            LiaCert::Branch {
                var,
                bound,
                left,
                right,
            }
        }
        "farkas" => {
            let mut ls = Vec::new();
            while let Some(STok::Atom(a)) = toks.get(*pos) {
                ls.push(parse_rational(a)?);
                *pos += 1;
            }
            LiaCert::Farkas(ls)
        }
        other => return Err(format!("unknown certificate node `{other}`")),
    };
    if toks.get(*pos) != Some(&STok::Close) {
        return Err(format!("expected `)` at token {pos}"));
    }
    *pos += 1;
    Ok(node)
}
