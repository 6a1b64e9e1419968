//! Surface syntax for process expressions.
//!
//! Grammar (products bind tighter than sums, all operators left
//! associative, same-operator runs flatten):
//!
//! ```text
//! expr    := sum
//! sum     := product (('(+)' | '(^+)' | '[+]@rule') product)*
//! product := concat (('(x)' | '(^x)' | '[x]@rule') concat)*
//! concat  := unary ('.' unary)*
//! unary   := scalar '*' unary | atom
//! atom    := ident | 'O' | '(' expr ')'
//! scalar  := number | number 'i' | number ('+'|'-') number 'i'
//! ```
//!
//! `O` is the zero process. Interactive operators require an `@rule`
//! suffix naming a rule from the rule table.

use num_complex::Complex64;
use tapestry::algebra::{ProcessExpr, RuleTable};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown rule name `{name}` at {pos}")]
    UnknownRule { pos: usize, name: String },
}

fn syntax(pos: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        pos,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Scalar(Complex64),
    SumExcl,
    SumFree,
    SumInter,
    ProdExcl,
    ProdFree,
    ProdInter,
    Dot,
    Star,
    At,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s.as_bytes())
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        if self.pos < self.src.len() && self.src[self.pos] == b'-' {
            self.pos += 1;
        }
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 32) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| syntax(start, "malformed number"))
    }

    fn next(&mut self) -> Result<Option<(usize, Tok)>, ParseError> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let pos = self.pos;
        let c = self.src[pos];
        // Operator brackets first.
        for (text, tok) in [
            ("(^+)", Tok::SumFree),
            ("(^x)", Tok::ProdFree),
            ("(+)", Tok::SumExcl),
            ("(x)", Tok::ProdExcl),
            ("[+]", Tok::SumInter),
            ("[x]", Tok::ProdInter),
        ] {
            if self.starts_with(text) {
                self.pos += text.len();
                return Ok(Some((pos, tok)));
            }
        }
        match c {
            b'(' => {
                self.pos += 1;
                Ok(Some((pos, Tok::LParen)))
            }
            b')' => {
                self.pos += 1;
                Ok(Some((pos, Tok::RParen)))
            }
            b'.' => {
                self.pos += 1;
                Ok(Some((pos, Tok::Dot)))
            }
            b'*' => {
                self.pos += 1;
                Ok(Some((pos, Tok::Star)))
            }
            b'@' => {
                self.pos += 1;
                Ok(Some((pos, Tok::At)))
            }
            b'[' => Err(syntax(pos, "expected [+] or [x]")),
            b'0'..=b'9' | b'-' => {
                let re = self.number()?;
                // Pure imaginary, or the a+bi / a-bi complex form.
                if self.pos < self.src.len() && self.src[self.pos] == b'i' {
                    self.pos += 1;
                    return Ok(Some((pos, Tok::Scalar(Complex64::new(0.0, re)))));
                }
                if self.pos < self.src.len()
                    && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    && self.pos + 1 < self.src.len()
                    && self.src[self.pos + 1].is_ascii_digit()
                {
                    let mark = self.pos;
                    let im = self.number()?;
                    if self.pos < self.src.len() && self.src[self.pos] == b'i' {
                        self.pos += 1;
                        return Ok(Some((pos, Tok::Scalar(Complex64::new(re, im)))));
                    }
                    self.pos = mark;
                }
                Ok(Some((pos, Tok::Scalar(Complex64::new(re, 0.0)))))
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                Ok(Some((pos, Tok::Ident(word.to_string()))))
            }
            other => Err(syntax(pos, format!("unexpected character `{}`", other as char))),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut lexer = Lexer::new(src);
    let mut out = Vec::new();
    while let Some(t) = lexer.next()? {
        out.push(t);
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    end: usize,
    rules: &'a RuleTable,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(_, t)| t.clone());
        self.idx += 1;
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.idx += 1;
                Ok(())
            }
            _ => Err(syntax(self.pos(), format!("expected {what}"))),
        }
    }

    fn rule_suffix(&mut self) -> Result<String, ParseError> {
        self.expect(&Tok::At, "@rulename after interactive operator")?;
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Ident(name)) => {
                if self.rules.get(&name).is_none() {
                    return Err(ParseError::UnknownRule { pos, name });
                }
                Ok(name)
            }
            _ => Err(syntax(pos, "expected rule name after @")),
        }
    }

    fn sum(&mut self) -> Result<ProcessExpr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let (kind, rule) = match self.peek() {
                Some(Tok::SumExcl) => {
                    self.idx += 1;
                    (SumOp::Excl, None)
                }
                Some(Tok::SumFree) => {
                    self.idx += 1;
                    (SumOp::Free, None)
                }
                Some(Tok::SumInter) => {
                    self.idx += 1;
                    (SumOp::Inter, Some(self.rule_suffix()?))
                }
                _ => break,
            };
            let rhs = self.product()?;
            lhs = match (kind, &rule, lhs) {
                (SumOp::Excl, _, ProcessExpr::SumExcl(mut cs)) => {
                    cs.push(rhs);
                    ProcessExpr::SumExcl(cs)
                }
                (SumOp::Excl, _, other) => ProcessExpr::SumExcl(vec![other, rhs]),
                (SumOp::Free, _, ProcessExpr::SumFree(mut cs)) => {
                    cs.push(rhs);
                    ProcessExpr::SumFree(cs)
                }
                (SumOp::Free, _, other) => ProcessExpr::SumFree(vec![other, rhs]),
                (SumOp::Inter, Some(r), ProcessExpr::SumInter(mut cs, r0)) if *r == r0 => {
                    cs.push(rhs);
                    ProcessExpr::SumInter(cs, r0)
                }
                (SumOp::Inter, Some(r), other) => {
                    ProcessExpr::SumInter(vec![other, rhs], r.clone())
                }
                (SumOp::Inter, None, _) => unreachable!(),
            };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<ProcessExpr, ParseError> {
        let mut lhs = self.concat()?;
        loop {
            let (kind, rule) = match self.peek() {
                Some(Tok::ProdExcl) => {
                    self.idx += 1;
                    (SumOp::Excl, None)
                }
                Some(Tok::ProdFree) => {
                    self.idx += 1;
                    (SumOp::Free, None)
                }
                Some(Tok::ProdInter) => {
                    self.idx += 1;
                    (SumOp::Inter, Some(self.rule_suffix()?))
                }
                _ => break,
            };
            let rhs = self.concat()?;
            lhs = match (kind, &rule, lhs) {
                (SumOp::Excl, _, ProcessExpr::ProdExcl(mut cs)) => {
                    cs.push(rhs);
                    ProcessExpr::ProdExcl(cs)
                }
                (SumOp::Excl, _, other) => ProcessExpr::ProdExcl(vec![other, rhs]),
                (SumOp::Free, _, ProcessExpr::ProdFree(mut cs)) => {
                    cs.push(rhs);
                    ProcessExpr::ProdFree(cs)
                }
                (SumOp::Free, _, other) => ProcessExpr::ProdFree(vec![other, rhs]),
                (SumOp::Inter, Some(r), ProcessExpr::ProdInter(mut cs, r0)) if *r == r0 => {
                    cs.push(rhs);
                    ProcessExpr::ProdInter(cs, r0)
                }
                (SumOp::Inter, Some(r), other) => {
                    ProcessExpr::ProdInter(vec![other, rhs], r.clone())
                }
                (SumOp::Inter, None, _) => unreachable!(),
            };
        }
        Ok(lhs)
    }

    fn concat(&mut self) -> Result<ProcessExpr, ParseError> {
        let mut lhs = self.unary()?;
        while matches!(self.peek(), Some(Tok::Dot)) {
            self.idx += 1;
            let rhs = self.unary()?;
            lhs = ProcessExpr::Concat(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ProcessExpr, ParseError> {
        if let Some(Tok::Scalar(w)) = self.peek().cloned() {
            self.idx += 1;
            self.expect(&Tok::Star, "* after scalar weight")?;
            let child = self.unary()?;
            return Ok(ProcessExpr::Scalar(w, Box::new(child)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<ProcessExpr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Ident(name)) if name == "O" => Ok(ProcessExpr::Zero),
            Some(Tok::Ident(name)) => Ok(ProcessExpr::primitive(&name)),
            Some(Tok::LParen) => {
                let e = self.sum()?;
                self.expect(&Tok::RParen, "closing parenthesis")?;
                Ok(e)
            }
            Some(other) => Err(syntax(pos, format!("unexpected token {other:?}"))),
            None => Err(syntax(pos, "unexpected end of input")),
        }
    }
}

enum SumOp {
    Excl,
    Free,
    Inter,
}

/// Parses the surface syntax into a process expression; rule names are
/// resolved against the table.
pub fn parse_process_expr(text: &str, rules: &RuleTable) -> Result<ProcessExpr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        idx: 0,
        end: text.len(),
        rules,
    };
    let e = p.sum()?;
    if p.idx < p.toks.len() {
        return Err(syntax(p.pos(), "trailing input"));
    }
    Ok(e)
}

fn fmt_scalar(w: Complex64) -> String {
    if w.im == 0.0 {
        format!("{}", w.re)
    } else if w.re == 0.0 {
        format!("{}i", w.im)
    } else if w.im < 0.0 {
        format!("{}-{}i", w.re, -w.im)
    } else {
        format!("{}+{}i", w.re, w.im)
    }
}

#[derive(PartialEq, PartialOrd)]
enum Level {
    Sum,
    Prod,
    Concat,
    Unary,
}

fn print_at(e: &ProcessExpr, min: Level, leftmost: bool) -> String {
    let wrap = |s: String, needed: bool| if needed { format!("({s})") } else { s };
    match e {
        ProcessExpr::Primitive(p) => p.id.clone(),
        ProcessExpr::Zero => "O".to_string(),
        ProcessExpr::Scalar(w, child) => {
            let inner = print_at(child, Level::Unary, false);
            format!("{}*{}", fmt_scalar(*w), inner)
        }
        ProcessExpr::Concat(l, r) => {
            let s = format!(
                "{} . {}",
                print_at(l, Level::Concat, true),
                print_at(r, Level::Unary, false)
            );
            wrap(s, min > Level::Concat)
        }
        ProcessExpr::SumExcl(cs) | ProcessExpr::SumFree(cs) | ProcessExpr::SumInter(cs, _) => {
            let op = match e {
                ProcessExpr::SumExcl(_) => " (+) ".to_string(),
                ProcessExpr::SumFree(_) => " (^+) ".to_string(),
                ProcessExpr::SumInter(_, r) => format!(" [+]@{r} "),
                _ => unreachable!(),
            };
            let parts: Vec<String> = cs
                .iter()
                .enumerate()
                .map(|(i, c)| print_at(c, Level::Prod, i == 0 && leftmost))
                .collect();
            let s = parts.join(&op);
            wrap(s, min > Level::Sum || (min == Level::Sum && !leftmost))
        }
        ProcessExpr::ProdExcl(cs) | ProcessExpr::ProdFree(cs) | ProcessExpr::ProdInter(cs, _) => {
            let op = match e {
                ProcessExpr::ProdExcl(_) => " (x) ".to_string(),
                ProcessExpr::ProdFree(_) => " (^x) ".to_string(),
                ProcessExpr::ProdInter(_, r) => format!(" [x]@{r} "),
                _ => unreachable!(),
            };
            let parts: Vec<String> = cs
                .iter()
                .enumerate()
                .map(|(i, c)| print_at(c, Level::Concat, i == 0 && leftmost))
                .collect();
            let s = parts.join(&op);
            wrap(s, min > Level::Prod || (min == Level::Prod && !leftmost))
        }
    }
}

/// Renders an expression back into the surface syntax; `parse . print` is
/// the identity on parser output.
pub fn print_expr(e: &ProcessExpr) -> String {
    print_at(e, Level::Sum, true)
}
