//! Concrete syntax for terms and formulas.
//!
//! Precedence, loosest first: quantifiers, `<->` (sugar for two
//! implications), `->` (right associative), `\/`, `/\`, `~`.
//! Quantifier bodies extend as far right as possible.

use std::fmt;

use thiserror::Error;

use super::{CmpOp, Formula, Sort, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Assign,
    Arrow,
    Iff,
    Tilde,
    And,
    Or,
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
    Plus,
    Minus,
    Star,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Int(n) => return write!(f, "`{n}`"),
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Assign => ":=",
            Tok::Arrow => "->",
            Tok::Iff => "<->",
            Tok::Tilde => "~",
            Tok::And => "/\\",
            Tok::Or => "\\/",
            Tok::Eq => "=",
            Tok::Le => "<=",
            Tok::Lt => "<",
            Tok::Ge => ">=",
            Tok::Gt => ">",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Eof => return f.write_str("end of input"),
        };
        write!(f, "`{s}`")
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    /// Byte offsets, used to detect adjacency for dotted names.
    pub start: usize,
    pub end: usize,
}

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    while i < bytes.len() {
        let c = bytes[i];
        let col = i - line_start + 1;
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let two = |a: u8, b: u8| c == a && bytes.get(i + 1) == Some(&b);
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'') {
                i += 1;
            }
            Tok::Ident(src[start..i].to_string())
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = src[start..i].parse::<i64>().map_err(|_| ParseError {
                line,
                col,
                message: "integer literal out of range".into(),
            })?;
            Tok::Int(n)
        } else if c == b'<' && bytes.get(i + 1) == Some(&b'-') && bytes.get(i + 2) == Some(&b'>') {
            i += 3;
            Tok::Iff
        } else {
            let (t, w) = if two(b':', b'=') {
                (Tok::Assign, 2)
            } else if two(b'-', b'>') {
                (Tok::Arrow, 2)
            } else if two(b'/', b'\\') {
                (Tok::And, 2)
            } else if two(b'\\', b'/') {
                (Tok::Or, 2)
            } else if two(b'<', b'=') {
                (Tok::Le, 2)
            } else if two(b'>', b'=') {
                (Tok::Ge, 2)
            } else {
                let t = match c {
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'{' => Tok::LBrace,
                    b'}' => Tok::RBrace,
                    b'[' => Tok::LBracket,
                    b']' => Tok::RBracket,
                    b',' => Tok::Comma,
                    b';' => Tok::Semi,
                    b':' => Tok::Colon,
                    b'.' => Tok::Dot,
                    b'~' => Tok::Tilde,
                    b'=' => Tok::Eq,
                    b'<' => Tok::Lt,
                    b'>' => Tok::Gt,
                    b'+' => Tok::Plus,
                    b'-' => Tok::Minus,
                    b'*' => Tok::Star,
                    _ => {
                        let ch = src[i..].chars().next().unwrap_or('?');
                        return Err(ParseError {
                            line,
                            col,
                            message: format!("unexpected character `{ch}`"),
                        });
                    }
                };
                (t, 1)
            };
            i += w;
            t
        };
        out.push(Token {
            tok,
            line,
            col,
            start,
            end: i,
        });
    }
    let col = bytes.len() - line_start + 1;
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
        start: bytes.len(),
        end: bytes.len(),
    });
    Ok(out)
}

const KEYWORDS: &[&str] = &["forall", "exists", "true", "false"];

/// Cursor over a token vector with the formula/term grammar. The sketch
/// parser drives the same cursor for its own productions.
pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Quantifier-bound variables in scope, innermost last.
    scope: Vec<(String, Sort)>,
}

impl Parser {
    pub fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            scope: Vec::new(),
        })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn token(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = self.token();
        ParseError {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    pub fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {tok}, found {}", self.peek())))
        }
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected `{kw}`, found {}", self.peek())))
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => Err(self.error_here(format!("expected identifier, found {t}"))),
        }
    }

    /// An identifier possibly joined with adjacent `.segment`s, as used by
    /// generated hypothesis names such as `hroot.ih`.
    pub fn dotted_ident(&mut self) -> Result<String, ParseError> {
        let mut name = self.ident()?;
        loop {
            let (a, b, c) = (self.pos, self.pos + 1, self.pos + 2);
            if c >= self.toks.len() {
                break;
            }
            let adjacent = self.toks[a].tok == Tok::Dot
                && self.toks[b].tok != Tok::Eof
                && self.toks[a - 1].end == self.toks[a].start
                && self.toks[a].end == self.toks[b].start;
            match (&self.toks[b].tok, adjacent) {
                (Tok::Ident(seg), true) => {
                    name.push('.');
                    name.push_str(seg);
                    self.pos = b + 1;
                }
                _ => break,
            }
        }
        Ok(name)
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn sort(&mut self) -> Result<Sort, ParseError> {
        Ok(Sort::named(&self.ident()?))
    }

    pub fn formula(&mut self) -> Result<Formula, ParseError> {
        if self.at_keyword("forall") || self.at_keyword("exists") {
            return self.quantifier();
        }
        let lhs = self.implication()?;
        if self.eat(&Tok::Iff) {
            let rhs = self.implication()?;
            return Ok(Formula::and(
                Formula::imp(lhs.clone(), rhs.clone()),
                Formula::imp(rhs, lhs),
            ));
        }
        Ok(lhs)
    }

    fn quantifier(&mut self) -> Result<Formula, ParseError> {
        let universal = self.at_keyword("forall");
        self.bump();
        let x = self.ident()?;
        self.expect(Tok::Colon)?;
        let s = self.sort()?;
        self.expect(Tok::Dot)?;
        self.scope.push((x.clone(), s.clone()));
        let body = self.formula();
        self.scope.pop();
        let body = Box::new(body?);
        Ok(if universal {
            Formula::Forall(x, s, body)
        } else {
            Formula::Exists(x, s, body)
        })
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = if self.at_keyword("forall") || self.at_keyword("exists") {
                self.quantifier()?
            } else {
                self.implication()?
            };
            return Ok(Formula::imp(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) {
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::And) {
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.eat(&Tok::Tilde) {
            return Ok(Formula::not(self.unary()?));
        }
        if self.at_keyword("forall") || self.at_keyword("exists") {
            return self.quantifier();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        if self.at_keyword("true") {
            self.bump();
            return Ok(Formula::True);
        }
        if self.at_keyword("false") {
            self.bump();
            return Ok(Formula::False);
        }
        // A comparison starts with a term; try that first and fall back to a
        // parenthesised formula or a predicate application.
        let save = self.pos;
        if let Ok(lhs) = self.term() {
            let op = self.peek().clone();
            let rel = match op {
                Tok::Eq => Some(None),
                Tok::Le => Some(Some(CmpOp::Le)),
                Tok::Lt => Some(Some(CmpOp::Lt)),
                Tok::Ge => Some(Some(CmpOp::Ge)),
                Tok::Gt => Some(Some(CmpOp::Gt)),
                _ => None,
            };
            if let Some(rel) = rel {
                self.bump();
                let rhs = self.term()?;
                return Ok(match rel {
                    None => Formula::Eq(lhs, rhs),
                    Some(op) => Formula::Cmp(op, lhs, rhs),
                });
            }
        }
        self.pos = save;
        if self.eat(&Tok::LParen) {
            let f = self.formula()?;
            self.expect(Tok::RParen)?;
            return Ok(f);
        }
        let tok = self.token().clone();
        let name = self.ident()?;
        let args = if *self.peek() == Tok::LParen {
            self.args()?
        } else {
            Vec::new()
        };
        if self.scope.iter().any(|(v, _)| *v == name) {
            return Err(ParseError {
                line: tok.line,
                col: tok.col,
                message: format!("variable `{name}` used as a predicate"),
            });
        }
        Ok(Formula::Pred(name, args))
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            if self.eat(&Tok::Comma) {
                continue;
            }
            self.expect(Tok::RParen)?;
            return Ok(args);
        }
    }

    pub fn term(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(&Tok::Plus) {
                lhs = Term::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat(&Tok::Minus) {
                lhs = Term::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Term, ParseError> {
        let at = self.token().clone();
        let lhs = self.unary_term()?;
        if !self.eat(&Tok::Star) {
            return Ok(lhs);
        }
        let rhs = self.product()?;
        match (lhs, rhs) {
            (Term::Lit(k), t) => Ok(Term::Mul(k, Box::new(t))),
            (t, Term::Lit(k)) => Ok(Term::Mul(k, Box::new(t))),
            _ => Err(ParseError {
                line: at.line,
                col: at.col,
                message: "multiplication requires an integer literal operand".into(),
            }),
        }
    }

    fn unary_term(&mut self) -> Result<Term, ParseError> {
        if self.eat(&Tok::Minus) {
            if let Tok::Int(n) = *self.peek() {
                self.bump();
                return Ok(Term::Lit(-n));
            }
            let t = self.unary_term()?;
            return Ok(Term::Mul(-1, Box::new(t)));
        }
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Term::Lit(n))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if *self.peek() == Tok::LParen {
                    return Ok(Term::App(name, self.args()?));
                }
                match self.scope.iter().rev().find(|(v, _)| *v == name) {
                    Some((_, s)) => Ok(Term::Var(name, s.clone())),
                    None => Ok(Term::Const(name)),
                }
            }
            t => Err(self.error_here(format!("expected term, found {t}"))),
        }
    }
}

pub fn parse_formula(src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(src)?;
    let f = p.formula()?;
    if !p.at_eof() {
        return Err(p.error_here(format!("unexpected {}", p.peek())));
    }
    Ok(f)
}

pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.term()?;
    if !p.at_eof() {
        return Err(p.error_here(format!("unexpected {}", p.peek())));
    }
    Ok(t)
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let paren_sum = |t: &Term| matches!(t, Term::Add(..) | Term::Sub(..));
        match self {
            Term::Var(n, _) | Term::Const(n) => f.write_str(n),
            Term::Lit(n) => write!(f, "{n}"),
            Term::App(g, args) => {
                f.write_str(g)?;
                write_args(f, args)
            }
            Term::Add(a, b) => {
                if paren_sum(b) {
                    write!(f, "{a} + ({b})")
                } else {
                    write!(f, "{a} + {b}")
                }
            }
            Term::Sub(a, b) => {
                if paren_sum(b) {
                    write!(f, "{a} - ({b})")
                } else {
                    write!(f, "{a} - {b}")
                }
            }
            Term::Mul(k, t) => {
                if paren_sum(t) {
                    write!(f, "{k} * ({t})")
                } else {
                    write!(f, "{k} * {t}")
                }
            }
        }
    }
}

fn level(f: &Formula) -> u8 {
    match f {
        Formula::Forall(..) | Formula::Exists(..) => 0,
        Formula::Imp(..) => 1,
        Formula::Or(..) => 2,
        Formula::And(..) => 3,
        Formula::Not(..) => 4,
        _ => 5,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, g: &Formula, min: u8) -> fmt::Result {
    // Quantifiers always get parentheses below the top level.
    if level(g) < min || level(g) == 0 {
        write!(f, "({g})")
    } else {
        write!(f, "{g}")
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Pred(p, args) => {
                f.write_str(p)?;
                if args.is_empty() {
                    Ok(())
                } else {
                    write_args(f, args)
                }
            }
            Formula::Eq(a, b) => write!(f, "{a} = {b}"),
            Formula::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            Formula::Not(a) => {
                f.write_str("~")?;
                write_at(f, a, 4)
            }
            Formula::And(a, b) => {
                write_at(f, a, 3)?;
                f.write_str(" /\\ ")?;
                write_at(f, b, 4)
            }
            Formula::Or(a, b) => {
                write_at(f, a, 2)?;
                f.write_str(" \\/ ")?;
                write_at(f, b, 3)
            }
            Formula::Imp(a, b) => {
                write_at(f, a, 2)?;
                f.write_str(" -> ")?;
                write_at(f, b, 1)
            }
            Formula::Forall(x, s, b) => write!(f, "forall {x}:{s}. {b}"),
            Formula::Exists(x, s, b) => write!(f, "exists {x}:{s}. {b}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn precedence() {
        let f = parse_formula("~A /\\ B \\/ C -> D -> E").unwrap();
        assert_eq!(f.to_string(), "~A /\\ B \\/ C -> D -> E");
        let Formula::Imp(l, r) = &f else { panic!() };
        assert!(matches!(**l, Formula::Or(..)));
        assert!(matches!(**r, Formula::Imp(..)));
    }

    #[test]
    fn quantifier_scope_and_terms() {
        let f = parse_formula("forall n:Int. n >= 0 -> plus(n, 0) = n").unwrap();
        let Formula::Forall(_, Sort::Int, body) = &f else {
            panic!()
        };
        let Formula::Imp(guard, _) = &**body else { panic!() };
        assert_eq!(
            **guard,
            Formula::Cmp(CmpOp::Ge, Term::var("n", Sort::Int), Term::Lit(0))
        );
        assert_eq!(f.to_string(), "forall n:Int. n >= 0 -> plus(n, 0) = n");
    }

    #[test]
    fn parenthesised_terms_and_formulas() {
        assert!(matches!(parse_formula("(x + 1) >= 0").unwrap(), Formula::Cmp(..)));
        assert!(matches!(parse_formula("(A /\\ B)").unwrap(), Formula::And(..)));
        assert!(matches!(parse_formula("(A)").unwrap(), Formula::Pred(..)));
        assert_eq!(
            parse_term("2 * 3 * x").unwrap(),
            Term::Mul(2, Box::new(Term::Mul(3, Box::new(Term::cnst("x")))))
        );
        assert_eq!(parse_term("-3").unwrap(), Term::Lit(-3));
        assert!(parse_term("x * y").is_err());
    }

    #[test]
    fn iff_is_sugar() {
        let f = parse_formula("A <-> B").unwrap();
        assert_eq!(f, parse_formula("(A -> B) /\\ (B -> A)").unwrap());
    }

    #[test]
    fn errors_carry_location() {
        let e = parse_formula("A /\\\n  (B").unwrap_err();
        assert_eq!((e.line, e.col), (2, 5));
        assert!(parse_formula("forall x:S. x").is_err());
    }

    fn arb_term(depth: u32) -> BoxedStrategy<Term> {
        let leaf = prop_oneof![
            (-5i64..6).prop_map(Term::Lit),
            prop::sample::select(vec!["a", "b", "c"]).prop_map(Term::cnst),
        ];
        leaf.prop_recursive(depth, 16, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::Sub(Box::new(a), Box::new(b))),
                ((-3i64..4), inner.clone()).prop_map(|(k, a)| Term::Mul(k, Box::new(a))),
                prop::collection::vec(inner, 1..3).prop_map(|args| Term::app("f", args)),
            ]
        })
        .boxed()
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let atom = prop_oneof![
            Just(Formula::True),
            Just(Formula::False),
            prop::sample::select(vec!["A", "B"]).prop_map(|p| Formula::pred(p, vec![])),
            arb_term(2).prop_map(|t| Formula::pred("P", vec![t])),
            (arb_term(2), arb_term(2)).prop_map(|(a, b)| Formula::Eq(a, b)),
            (arb_term(2), arb_term(2)).prop_map(|(a, b)| Formula::Cmp(CmpOp::Le, a, b)),
        ];
        atom.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::imp(a, b)),
                inner
                    .clone()
                    .prop_map(|b| Formula::forall("x", Sort::Int, b.subst_const("a", "x"))),
                inner.prop_map(|b| Formula::exists("y", Sort::named("S"), b)),
            ]
        })
    }

    impl Formula {
        /// Test helper: turn constant `c` into a bound Int variable `x`.
        fn subst_const(&self, c: &str, x: &str) -> Formula {
            let mut m = std::collections::BTreeMap::new();
            m.insert(c.to_string(), Sort::Int);
            let renamed = self.bind_consts(&m);
            renamed.subst(c, &Term::var(x, Sort::Int))
        }
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(f in arb_formula()) {
            let text = f.to_string();
            let back = parse_formula(&text).unwrap();
            prop_assert!(back.alpha_eq(&f), "{} reparsed as {}", text, back);
        }
    }
}
