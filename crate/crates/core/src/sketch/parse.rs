use std::collections::BTreeSet;

use thiserror::Error;

use super::{Binding, Direction, Method, Sketch, SketchNode, Span};
use crate::logic::syntax::{Parser, Tok};
use crate::logic::{Hyp, LogicError, ParseError, Position, Signature, Sort};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SketchError {
    #[error("syntax error at {0}")]
    Syntax(#[from] ParseError),
    #[error("{line}:{col}: duplicate node id `{id}`")]
    DuplicateId { id: String, line: usize, col: usize },
    #[error("{line}:{col}: bad declaration: {source}")]
    Declaration {
        line: usize,
        col: usize,
        #[source]
        source: LogicError,
    },
}

impl SketchError {
    pub fn location(&self) -> (usize, usize) {
        match self {
            SketchError::Syntax(e) => (e.line, e.col),
            SketchError::DuplicateId { line, col, .. } | SketchError::Declaration { line, col, .. } => (*line, *col),
        }
    }
}

struct SketchParser {
    p: Parser,
    seen: BTreeSet<String>,
}

impl SketchParser {
    fn signature(&mut self, sig: &mut Signature) -> Result<(), SketchError> {
        self.p.expect(Tok::LBrace)?;
        while !self.p.eat(&Tok::RBrace) {
            let at = self.p.token().clone();
            let decl_err = |source| SketchError::Declaration {
                line: at.line,
                col: at.col,
                source,
            };
            let kw = self.p.ident()?;
            match kw.as_str() {
                "sort" => {
                    let name = self.p.ident()?;
                    sig.add_sort(&name).map_err(decl_err)?;
                }
                "fun" => {
                    let name = self.p.ident()?;
                    self.p.expect(Tok::Colon)?;
                    let args = self.sorts(&Tok::Arrow)?;
                    self.p.expect(Tok::Arrow)?;
                    let res = self.p.sort()?;
                    sig.add_function(&name, args, res).map_err(decl_err)?;
                }
                "pred" => {
                    let name = self.p.ident()?;
                    self.p.expect(Tok::Colon)?;
                    let args = self.sorts(&Tok::Semi)?;
                    sig.add_predicate(&name, args).map_err(decl_err)?;
                }
                "const" => {
                    let name = self.p.ident()?;
                    self.p.expect(Tok::Colon)?;
                    let s = self.p.sort()?;
                    sig.add_constant(&name, s).map_err(decl_err)?;
                }
                other => {
                    return Err(ParseError {
                        line: at.line,
                        col: at.col,
                        message: format!("expected `sort`, `fun`, `pred` or `const`, found `{other}`"),
                    }
                    .into())
                }
            }
            self.p.expect(Tok::Semi)?;
        }
        Ok(())
    }

    /// Possibly empty comma-separated sorts, ended by `stop`.
    fn sorts(&mut self, stop: &Tok) -> Result<Vec<Sort>, SketchError> {
        let mut out = Vec::new();
        if self.p.peek() == stop {
            return Ok(out);
        }
        loop {
            out.push(self.p.sort()?);
            if !self.p.eat(&Tok::Comma) {
                return Ok(out);
            }
        }
    }

    fn fact(&mut self) -> Result<Hyp, SketchError> {
        let name = self.p.dotted_ident()?;
        self.p.expect(Tok::Colon)?;
        let f = self.p.formula()?;
        self.p.expect(Tok::Semi)?;
        Ok(Hyp::new(name, f))
    }

    fn bindings(&mut self) -> Result<Vec<Binding>, SketchError> {
        let mut out = Vec::new();
        while self.p.eat(&Tok::Comma) {
            let var = self.p.ident()?;
            self.p.expect(Tok::Assign)?;
            let term = self.p.term()?;
            out.push(Binding { var, term });
        }
        Ok(out)
    }

    fn position(&mut self) -> Result<Position, SketchError> {
        self.p.expect(Tok::LBracket)?;
        let mut path = Vec::new();
        if self.p.eat(&Tok::RBracket) {
            return Ok(Position(path));
        }
        loop {
            match self.p.bump() {
                Tok::Int(n) => path.push(n as usize),
                t => return Err(self.p.error_here(format!("expected position index, found {t}")).into()),
            }
            if self.p.eat(&Tok::RBracket) {
                return Ok(Position(path));
            }
            self.p.expect(Tok::Comma)?;
        }
    }

    fn method(&mut self) -> Result<Method, SketchError> {
        let at = self.p.token().clone();
        let tag = self.p.ident()?;
        Ok(match tag.as_str() {
            "rewrite" => {
                self.p.expect(Tok::LParen)?;
                let fact = self.p.dotted_ident()?;
                self.p.expect(Tok::Comma)?;
                let position = self.position()?;
                self.p.expect(Tok::Comma)?;
                let direction = match self.p.ident()?.as_str() {
                    "ltr" => Direction::Ltr,
                    "rtl" => Direction::Rtl,
                    d => {
                        return Err(self
                            .p
                            .error_here(format!("expected `ltr` or `rtl`, found `{d}`"))
                            .into())
                    }
                };
                let bindings = self.bindings()?;
                self.p.expect(Tok::RParen)?;
                Method::Rewrite {
                    fact,
                    position,
                    direction,
                    bindings,
                }
            }
            "split" => {
                self.p.expect(Tok::LParen)?;
                let c = self.p.formula()?;
                self.p.expect(Tok::RParen)?;
                Method::Split(c)
            }
            "induction" => {
                self.p.expect(Tok::LParen)?;
                let n = self.p.ident()?;
                self.p.expect(Tok::RParen)?;
                Method::Induction(n)
            }
            "contradiction" => Method::Contradiction,
            "exact" => {
                self.p.expect(Tok::LParen)?;
                let fact = self.p.dotted_ident()?;
                let bindings = self.bindings()?;
                self.p.expect(Tok::RParen)?;
                Method::Exact { fact, bindings }
            }
            "hole" => Method::Hole,
            other => {
                return Err(ParseError {
                    line: at.line,
                    col: at.col,
                    message: format!("unknown method `{other}`"),
                }
                .into())
            }
        })
    }

    fn node(&mut self) -> Result<SketchNode, SketchError> {
        let at = self.p.token().clone();
        self.p.expect_keyword("node")?;
        let id_tok = self.p.token().clone();
        let id = self.p.ident()?;
        if !self.seen.insert(id.clone()) {
            return Err(SketchError::DuplicateId {
                id,
                line: id_tok.line,
                col: id_tok.col,
            });
        }
        self.p.expect(Tok::LBrace)?;
        self.p.expect_keyword("goal")?;
        self.p.expect(Tok::Colon)?;
        let goal = self.p.formula()?;
        self.p.expect(Tok::Semi)?;
        self.p.expect_keyword("method")?;
        self.p.expect(Tok::Colon)?;
        let method = self.method()?;
        self.p.expect(Tok::Semi)?;
        let mut uses = Vec::new();
        if self.p.at_keyword("uses") {
            self.p.bump();
            self.p.expect(Tok::Colon)?;
            loop {
                uses.push(self.p.dotted_ident()?);
                if !self.p.eat(&Tok::Comma) {
                    break;
                }
            }
            self.p.expect(Tok::Semi)?;
        }
        let mut children = Vec::new();
        while self.p.at_keyword("node") {
            children.push(self.node()?);
        }
        self.p.expect(Tok::RBrace)?;
        Ok(SketchNode {
            id,
            goal,
            method,
            uses,
            children,
            span: Span {
                line: at.line,
                col: at.col,
            },
        })
    }

    fn finish(&self) -> Result<(), SketchError> {
        if self.p.at_eof() {
            Ok(())
        } else {
            Err(self.p.error_here(format!("unexpected {}", self.p.peek())).into())
        }
    }
}

pub fn parse_sketch(text: &str) -> Result<Sketch, SketchError> {
    let mut sp = SketchParser {
        p: Parser::new(text)?,
        seen: BTreeSet::new(),
    };
    sp.p.expect_keyword("theorem")?;
    let name = sp.p.ident()?;
    sp.p.expect(Tok::Colon)?;
    let theorem = sp.p.formula()?;
    let mut signature = Signature::new();
    if sp.p.at_keyword("signature") {
        sp.p.bump();
        sp.signature(&mut signature)?;
    }
    sp.p.expect_keyword("context")?;
    sp.p.expect(Tok::LBrace)?;
    let mut context = Vec::new();
    while !sp.p.eat(&Tok::RBrace) {
        context.push(sp.fact()?);
    }
    sp.p.expect_keyword("proof")?;
    let root = sp.node()?;
    sp.finish()?;
    let mut s = Sketch {
        name,
        signature,
        theorem,
        context,
        root,
    };
    s.bind_eigenvariables();
    Ok(s)
}

/// A single `node ... { ... }` subtree, as returned by a proposer. Induction
/// variables are bound once the node is spliced into a sketch.
pub fn parse_node(text: &str) -> Result<SketchNode, SketchError> {
    let mut sp = SketchParser {
        p: Parser::new(text)?,
        seen: BTreeSet::new(),
    };
    let n = sp.node()?;
    sp.finish()?;
    Ok(n)
}

/// Library file entries: `name : formula ;`.
pub(crate) fn parse_facts(text: &str) -> Result<Vec<Hyp>, SketchError> {
    let mut sp = SketchParser {
        p: Parser::new(text)?,
        seen: BTreeSet::new(),
    };
    let mut out = Vec::new();
    while !sp.p.at_eof() {
        out.push(sp.fact()?);
    }
    Ok(out)
}
