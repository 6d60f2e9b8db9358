//! Boolean formulas used to state groundness requirements in policy files.
//!
//! Grammar (loosest to tightest): `<->` chains left-associatively, `->` is
//! right-associative, `&` binds tightest; atoms are `true`, `bot`, variable
//! names, and parenthesized formulas. Every connective here is monotone,
//! so any satisfiable formula denotes a valid description.

use std::collections::BTreeSet;

use super::{check_scope, full_mask, DefValue, DomainError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    True,
    Bot,
    Var(String),
    And(Box<Formula>, Box<Formula>),
    Imp(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    fn eval(&self, mask: u32, scope: &[String]) -> Result<bool, DomainError> {
        Ok(match self {
            Formula::True => true,
            Formula::Bot => false,
            Formula::Var(v) => {
                let i = scope.iter().position(|w| w == v).ok_or_else(|| {
                    DomainError::NotInScope {
                        var: v.clone(),
                        scope: scope.join(","),
                    }
                })?;
                mask & (1 << i) != 0
            }
            Formula::And(a, b) => a.eval(mask, scope)? && b.eval(mask, scope)?,
            Formula::Imp(a, b) => !a.eval(mask, scope)? || b.eval(mask, scope)?,
            Formula::Iff(a, b) => a.eval(mask, scope)? == b.eval(mask, scope)?,
        })
    }

    /// The description over `scope` whose models are exactly the
    /// assignments satisfying the formula; `bot` when unsatisfiable.
    /// Rejects formulas (e.g. with `bot` under a connective) whose model
    /// set is not a groundness description.
    pub fn to_def(&self, scope: &[String]) -> Result<DefValue, DomainError> {
        check_scope(scope)?;
        let mut models = BTreeSet::new();
        for m in 0..=full_mask(scope.len()) {
            if self.eval(m, scope)? {
                models.insert(m);
            }
        }
        if models.is_empty() {
            return DefValue::bottom(scope);
        }
        let value = DefValue { scope: scope.to_vec(), models: Some(models) };
        value.validate().map_err(|_| DomainError::InvalidValue {
            reason: "formula does not denote a groundness description".to_string(),
        })?;
        Ok(value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum FTok {
    Word(String),
    And,
    Imp,
    Iff,
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<FTok>, DomainError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '&' {
            out.push(FTok::And);
            i += 1;
        } else if c == '(' {
            out.push(FTok::Open);
            i += 1;
        } else if c == ')' {
            out.push(FTok::Close);
            i += 1;
        } else if c == '<' {
            if chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') {
                out.push(FTok::Iff);
                i += 3;
            } else {
                return Err(DomainError::InvalidValue {
                    reason: format!("bad connective near `{text}`"),
                });
            }
        } else if c == '-' {
            if chars.get(i + 1) == Some(&'>') {
                out.push(FTok::Imp);
                i += 2;
            } else {
                return Err(DomainError::InvalidValue {
                    reason: format!("bad connective near `{text}`"),
                });
            }
        } else if c.is_ascii_alphanumeric() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
            }
            out.push(FTok::Word(s));
        } else {
            return Err(DomainError::InvalidValue {
                reason: format!("unexpected character `{c}` in formula"),
            });
        }
    }
    Ok(out)
}

struct FParser {
    toks: Vec<FTok>,
    pos: usize,
}

impl FParser {
    fn peek(&self) -> Option<&FTok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, t: &FTok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn atom(&mut self) -> Result<Formula, DomainError> {
        if self.eat(&FTok::Open) {
            let f = self.iff()?;
            if !self.eat(&FTok::Close) {
                return Err(DomainError::InvalidValue {
                    reason: "missing `)` in formula".to_string(),
                });
            }
            return Ok(f);
        }
        match self.peek().cloned() {
            Some(FTok::Word(w)) => {
                self.pos += 1;
                Ok(match w.as_str() {
                    "true" => Formula::True,
                    "bot" => Formula::Bot,
                    _ => Formula::Var(w),
                })
            }
            other => Err(DomainError::InvalidValue {
                reason: format!("expected a formula atom, found {other:?}"),
            }),
        }
    }

    fn conj(&mut self) -> Result<Formula, DomainError> {
        let mut f = self.atom()?;
        while self.eat(&FTok::And) {
            f = Formula::And(Box::new(f), Box::new(self.atom()?));
        }
        Ok(f)
    }

    fn imp(&mut self) -> Result<Formula, DomainError> {
        let f = self.conj()?;
        if self.eat(&FTok::Imp) {
            return Ok(Formula::Imp(Box::new(f), Box::new(self.imp()?)));
        }
        Ok(f)
    }

    fn iff(&mut self) -> Result<Formula, DomainError> {
        let mut f = self.imp()?;
        while self.eat(&FTok::Iff) {
            f = Formula::Iff(Box::new(f), Box::new(self.imp()?));
        }
        Ok(f)
    }
}

/// Parses a groundness formula such as `X & Y <-> Z`.
pub fn parse_formula(text: &str) -> Result<Formula, DomainError> {
    let mut p = FParser { toks: tokenize(text)?, pos: 0 };
    let f = p.iff()?;
    if p.pos != p.toks.len() {
        return Err(DomainError::InvalidValue {
            reason: format!("trailing input in formula `{text}`"),
        });
    }
    Ok(f)
}
