//! Recursive descent parser for the q-function expression grammar.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' integer_or_rational)?
//! base   := number | 'x' | 'q' digits | ident '(' 'x' ')' ticks?
//!         | 'ln' '(' expr ')' | 'exp' '(' expr ')' | '(' expr ')' | '-' factor
//! ```
//!
//! Opaque derivatives may be written `a'(x)` or `a(x)'`. Bare identifiers are
//! only accepted when declared as parameters.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use super::atom::Exponent;
use super::tree::Tree;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown symbol `{name}` at {pos}")]
    UnknownSymbol { pos: usize, name: String },
    #[error("jet symbol at {pos} needs a nonnegative integer index")]
    BadJetIndex { pos: usize },
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    params: &'a [&'a str],
}

pub fn parse_tree(text: &str, params: &[&str]) -> Result<Tree, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        params,
    };
    let t = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(t)
}

impl<'a> Parser<'a> {
    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Tree, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Tree::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Tree::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Tree, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Tree::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Tree::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Tree, ParseError> {
        let base = self.base()?;
        if self.eat(b'^') {
            let e = self.exponent()?;
            return Ok(Tree::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("expected integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| ParseError::Syntax {
                pos: start,
                msg: "integer out of range".into(),
            })
    }

    fn exponent(&mut self) -> Result<Exponent, ParseError> {
        if self.eat(b'(') {
            let neg = self.eat(b'-');
            let n = self.integer()?;
            let d = if self.eat(b'/') { self.integer()? } else { 1 };
            if d == 0 {
                return Err(self.syntax("zero denominator in exponent"));
            }
            self.expect(b')')?;
            return Ok(Exponent::new(if neg { -n } else { n }, d));
        }
        let neg = self.eat(b'-');
        let n = self.integer()?;
        Ok(Exponent::from_integer(if neg { -n } else { n }))
    }

    fn number(&mut self) -> Result<Tree, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part = &self.src[start..self.pos];
        let mut frac: &[u8] = &[];
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let fs = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            frac = &self.src[fs..self.pos];
        }
        if int_part.is_empty() && frac.is_empty() {
            return Err(ParseError::Syntax {
                pos: start,
                msg: "malformed number".into(),
            });
        }
        let digits: String = int_part.iter().chain(frac.iter()).map(|&b| b as char).collect();
        let n: BigInt = digits.parse().map_err(|_| ParseError::Syntax {
            pos: start,
            msg: "malformed number".into(),
        })?;
        let d = num_traits::pow::pow(BigInt::from(10), frac.len());
        Ok(Tree::Num(BigRational::new(n, d)))
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn ticks(&mut self) -> u32 {
        let mut n = 0;
        while self.pos < self.src.len() && self.src[self.pos] == b'\'' {
            self.pos += 1;
            n += 1;
        }
        n
    }

    fn base(&mut self) -> Result<Tree, ParseError> {
        let c = self.peek().ok_or_else(|| self.syntax("unexpected end of input"))?;
        if c == b'-' {
            self.pos += 1;
            return Ok(Tree::Neg(Box::new(self.factor()?)));
        }
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if !(c.is_ascii_alphabetic() || c == b'_') {
            return Err(self.syntax(format!("unexpected `{}`", c as char)));
        }
        let start = self.pos;
        let name = self.ident();
        if name == "x" {
            return Ok(Tree::X);
        }
        if let Some(idx) = name.strip_prefix('q') {
            if idx.is_empty() || idx.bytes().all(|b| b.is_ascii_digit()) {
                return idx
                    .parse::<u32>()
                    .map(Tree::Q)
                    .map_err(|_| ParseError::BadJetIndex { pos: start });
            }
        }
        if matches!(name.as_str(), "ln" | "log" | "exp" | "sqrt") {
            self.expect(b'(')?;
            let e = Box::new(self.expr()?);
            self.expect(b')')?;
            return Ok(match name.as_str() {
                "exp" => Tree::Exp(e),
                "sqrt" => Tree::Pow(e, Exponent::new(1, 2)),
                _ => Tree::Ln(e),
            });
        }
        let pre = self.ticks();
        let save = self.pos;
        if self.eat(b'(') {
            let arg_pos = self.pos;
            self.skip_ws();
            let arg = self.ident();
            if arg != "x" {
                self.pos = arg_pos;
                return Err(self.syntax("opaque functions take the argument `x`"));
            }
            self.expect(b')')?;
            let post = self.ticks();
            return Ok(Tree::Func {
                name: Arc::from(name.as_str()),
                deriv: pre + post,
            });
        }
        self.pos = save;
        if pre == 0 && self.params.contains(&name.as_str()) {
            return Ok(Tree::Param(Arc::from(name.as_str())));
        }
        Err(ParseError::UnknownSymbol { pos: start, name })
    }
}
