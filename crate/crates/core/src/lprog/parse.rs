//! Parser for rule text: a Prolog-like surface syntax with `%` line
//! comments, list sugar, and `=` constraints. Parsed programs are
//! normalized before being returned.

use std::fmt;

use super::{normalize_raw, Atom, Program, RawLiteral, RawRule, Rule, Term};

/// Syntax error with 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    fn new(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError { line, col, msg: msg.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    /// Lower-case identifier or quoted/numeric constant symbol.
    Name(String),
    /// Upper-case or `_`-prefixed identifier.
    Var(String),
    Punct(char),
    /// `:-`
    Neck,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(s) => write!(f, "`{s}`"),
            Tok::Var(s) => write!(f, "`{s}`"),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Neck => write!(f, "`:-`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    let mut line = 1usize;
    let mut col = 1usize;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |i: &mut usize, line: &mut usize, col: &mut usize| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c.is_ascii_lowercase() || c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
            {
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col);
            }
            out.push(Token { tok: Tok::Name(s), line: tl, col: tc });
            continue;
        }
        if c.is_ascii_uppercase() || c == '_' {
            let mut s = String::new();
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
            {
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col);
            }
            out.push(Token { tok: Tok::Var(s), line: tl, col: tc });
            continue;
        }
        if c == ':' {
            if i + 1 < chars.len() && chars[i + 1] == '-' {
                advance(&mut i, &mut line, &mut col);
                advance(&mut i, &mut line, &mut col);
                out.push(Token { tok: Tok::Neck, line: tl, col: tc });
                continue;
            }
            return Err(ParseError::new(tl, tc, "stray `:` (expected `:-`)"));
        }
        if "(),|[]=.".contains(c) {
            advance(&mut i, &mut line, &mut col);
            out.push(Token { tok: Tok::Punct(c), line: tl, col: tc });
            continue;
        }
        return Err(ParseError::new(tl, tc, format!("unexpected character `{c}`")));
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError::new(t.line, t.col, msg)
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if self.peek().tok == want {
            self.next();
            Ok(())
        } else {
            Err(self.err_here(format!("expected {}, found {}", want, self.peek().tok)))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().tok.clone() {
            Tok::Var(v) => {
                self.next();
                Ok(Term::Var(v))
            }
            Tok::Name(name) => {
                self.next();
                if self.peek().tok == Tok::Punct('(') {
                    self.next();
                    let mut args = vec![self.term()?];
                    while self.peek().tok == Tok::Punct(',') {
                        self.next();
                        args.push(self.term()?);
                    }
                    self.expect(Tok::Punct(')'))?;
                    Ok(Term::Fun(name, args))
                } else {
                    Ok(Term::Fun(name, Vec::new()))
                }
            }
            Tok::Punct('[') => {
                self.next();
                if self.peek().tok == Tok::Punct(']') {
                    self.next();
                    return Ok(Term::constant("[]"));
                }
                let mut elems = vec![self.term()?];
                while self.peek().tok == Tok::Punct(',') {
                    self.next();
                    elems.push(self.term()?);
                }
                let tail = if self.peek().tok == Tok::Punct('|') {
                    self.next();
                    self.term()?
                } else {
                    Term::constant("[]")
                };
                self.expect(Tok::Punct(']'))?;
                Ok(elems
                    .into_iter()
                    .rev()
                    .fold(tail, |t, h| Term::Fun(".".into(), vec![h, t])))
            }
            other => Err(self.err_here(format!("expected a term, found {other}"))),
        }
    }

    /// `name` or `name(t1,...,tn)`.
    fn head(&mut self) -> Result<(String, Vec<Term>), ParseError> {
        match self.term()? {
            Term::Fun(name, args) => Ok((name, args)),
            Term::Var(_) => Err(self.err_here("rule head must be a predicate atom")),
        }
    }

    fn literal(&mut self) -> Result<RawLiteral, ParseError> {
        let (tline, tcol) = {
            let t = self.peek();
            (t.line, t.col)
        };
        let first = self.term()?;
        if self.peek().tok == Tok::Punct('=') {
            self.next();
            let second = self.term()?;
            if !matches!(first, Term::Var(_)) && !matches!(second, Term::Var(_)) {
                return Err(ParseError::new(
                    tline,
                    tcol,
                    "unification constraint needs a variable on one side",
                ));
            }
            return Ok(RawLiteral::Eq(first, second));
        }
        match first {
            Term::Fun(name, args) => Ok(RawLiteral::Call(name, args)),
            Term::Var(_) => Err(ParseError::new(
                tline,
                tcol,
                "a body literal must be a call or a constraint, not a bare variable",
            )),
        }
    }

    fn rule(&mut self) -> Result<RawRule, ParseError> {
        let (head_pred, head_args) = self.head()?;
        let mut body = Vec::new();
        if self.peek().tok == Tok::Neck {
            self.next();
            body.push(self.literal()?);
            while self.peek().tok == Tok::Punct(',') {
                self.next();
                body.push(self.literal()?);
            }
        }
        self.expect(Tok::Punct('.'))?;
        Ok(RawRule { head_pred, head_args, body })
    }

    fn program(&mut self) -> Result<Vec<RawRule>, ParseError> {
        let mut rules = Vec::new();
        while self.peek().tok != Tok::Eof {
            rules.push(self.rule()?);
        }
        Ok(rules)
    }
}

fn parser_for(text: &str) -> Result<Parser, ParseError> {
    Ok(Parser { toks: tokenize(text)?, pos: 0 })
}

/// Parses and normalizes a whole program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = parser_for(text)?;
    let raw = p.program()?;
    Ok(normalize_raw(raw))
}

/// Parses a single rule (terminated by `.`) and flattens it. The rule's
/// ordinal is 0 until the rule is placed into a program.
pub fn parse_rule(text: &str) -> Result<Rule, ParseError> {
    let mut p = parser_for(text)?;
    let raw = p.rule()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.err_here("trailing input after rule"));
    }
    Ok(super::flatten_rule(&raw))
}

/// Parses a flat atom `p(X,Y)` whose arguments must be distinct variables.
pub fn parse_atom(text: &str) -> Result<Atom, ParseError> {
    let mut p = parser_for(text)?;
    let (tline, tcol) = {
        let t = p.peek();
        (t.line, t.col)
    };
    let (pred, args) = p.head()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.err_here("trailing input after atom"));
    }
    let mut names = Vec::new();
    for a in &args {
        match a {
            Term::Var(v) if !names.contains(v) => names.push(v.clone()),
            Term::Var(v) => {
                return Err(ParseError::new(
                    tline,
                    tcol,
                    format!("repeated variable `{v}` in atom"),
                ))
            }
            t => {
                return Err(ParseError::new(
                    tline,
                    tcol,
                    format!("atom argument must be a variable, found `{t}`"),
                ))
            }
        }
    }
    Ok(Atom { pred, args: names })
}
