//! Groundness descriptions over an ordered variable scope.
//!
//! A description is either the unreachable value `bot` or a family of
//! models: subsets of the scope, each listing the variables that may be
//! bound to ground terms in some constraint store the description covers.
//! Model families always contain the all-variables model and are closed
//! under intersection, which makes every family the model set of a
//! conjunction of definite clauses `X <-> (Y1 & ... & Yk)`. Values are
//! ordered by model-set inclusion with `bot` below everything.
//!
//! Models are stored as bitmasks over the scope (bit `i` stands for the
//! `i`-th scope variable), which keeps equality, meet, and join canonical
//! and cheap for the scope sizes that occur in practice.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lprog::{Constraint, Term};

mod formula;

pub use formula::{parse_formula, Formula};

/// Ordered variable scope of a description.
pub type Scope = Vec<String>;

/// Hard limit on scope size: masks are `u32` and several operations
/// enumerate all `2^n` subsets.
pub const MAX_SCOPE_VARS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("scope mismatch: [{expected}] vs [{found}]")]
    ScopeMismatch { expected: String, found: String },
    #[error("scope has {len} variables, more than the supported {max}")]
    ScopeTooLarge { len: usize, max: usize },
    #[error("variable {var} is not in scope [{scope}]")]
    NotInScope { var: String, scope: String },
    #[error("invalid renaming: {reason}")]
    BadRename { reason: String },
    #[error("malformed description: {reason}")]
    InvalidValue { reason: String },
}

fn scope_str(scope: &[String]) -> String {
    scope.join(",")
}

fn check_scope(scope: &[String]) -> Result<(), DomainError> {
    if scope.len() > MAX_SCOPE_VARS {
        return Err(DomainError::ScopeTooLarge {
            len: scope.len(),
            max: MAX_SCOPE_VARS,
        });
    }
    let distinct: BTreeSet<&String> = scope.iter().collect();
    if distinct.len() != scope.len() {
        return Err(DomainError::InvalidValue {
            reason: format!("scope [{}] has repeated variables", scope_str(scope)),
        });
    }
    Ok(())
}

fn full_mask(n: usize) -> u32 {
    ((1u64 << n) - 1) as u32
}

fn intersection_close(models: &mut BTreeSet<u32>) {
    let mut changed = true;
    while changed {
        changed = false;
        let snapshot: Vec<u32> = models.iter().copied().collect();
        for i in 0..snapshot.len() {
            for j in (i + 1)..snapshot.len() {
                if models.insert(snapshot[i] & snapshot[j]) {
                    changed = true;
                }
            }
        }
    }
}

/// A groundness description: `bot` or an intersection-closed model family
/// over `scope` containing the all-variables model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DefValue {
    scope: Scope,
    /// `None` is `bot`; `Some` holds the model bitmasks.
    models: Option<BTreeSet<u32>>,
}

impl DefValue {
    pub fn top(scope: &[String]) -> Result<DefValue, DomainError> {
        check_scope(scope)?;
        let all = (0..=full_mask(scope.len())).collect();
        Ok(DefValue { scope: scope.to_vec(), models: Some(all) })
    }

    pub fn bottom(scope: &[String]) -> Result<DefValue, DomainError> {
        check_scope(scope)?;
        Ok(DefValue { scope: scope.to_vec(), models: None })
    }

    /// Builds a value from models given as variable-name sets, validating
    /// the family invariants.
    pub fn from_models<I, M, S>(scope: &[String], models: I) -> Result<DefValue, DomainError>
    where
        I: IntoIterator<Item = M>,
        M: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        check_scope(scope)?;
        let mut masks = BTreeSet::new();
        for model in models {
            let mut mask = 0u32;
            for v in model {
                let v = v.as_ref();
                let i = scope.iter().position(|w| w == v).ok_or_else(|| {
                    DomainError::NotInScope { var: v.to_string(), scope: scope_str(scope) }
                })?;
                mask |= 1 << i;
            }
            masks.insert(mask);
        }
        let value = DefValue { scope: scope.to_vec(), models: Some(masks) };
        value.validate()?;
        Ok(value)
    }

    pub fn scope(&self) -> &[String] {
        &self.scope
    }

    pub fn is_bottom(&self) -> bool {
        self.models.is_none()
    }

    pub fn is_top(&self) -> bool {
        match &self.models {
            None => false,
            Some(ms) => ms.len() == (1usize << self.scope.len()),
        }
    }

    pub fn model_masks(&self) -> Option<&BTreeSet<u32>> {
        self.models.as_ref()
    }

    /// Checks the representation invariants: bounded distinct scope, masks
    /// within range, all-variables model present, closure under
    /// intersection.
    pub fn validate(&self) -> Result<(), DomainError> {
        check_scope(&self.scope)?;
        let Some(ms) = &self.models else { return Ok(()) };
        let full = full_mask(self.scope.len());
        for &m in ms {
            if m & !full != 0 {
                return Err(DomainError::InvalidValue {
                    reason: format!("model {m:#b} lies outside the scope"),
                });
            }
        }
        if !ms.contains(&full) {
            return Err(DomainError::InvalidValue {
                reason: "the all-variables model is missing".to_string(),
            });
        }
        let snapshot: Vec<u32> = ms.iter().copied().collect();
        for i in 0..snapshot.len() {
            for j in (i + 1)..snapshot.len() {
                if !ms.contains(&(snapshot[i] & snapshot[j])) {
                    return Err(DomainError::InvalidValue {
                        reason: "model family is not closed under intersection".to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    fn same_scope(&self, other: &DefValue) -> Result<(), DomainError> {
        if self.scope != other.scope {
            return Err(DomainError::ScopeMismatch {
                expected: scope_str(&self.scope),
                found: scope_str(&other.scope),
            });
        }
        Ok(())
    }

    /// Partial order: `bot` below everything, otherwise model-set inclusion.
    pub fn leq(&self, other: &DefValue) -> Result<bool, DomainError> {
        self.same_scope(other)?;
        Ok(match (&self.models, &other.models) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(a), Some(b)) => a.is_subset(b),
        })
    }

    /// Greatest lower bound: model-set intersection.
    pub fn meet(&self, other: &DefValue) -> Result<DefValue, DomainError> {
        self.same_scope(other)?;
        let models = match (&self.models, &other.models) {
            (None, _) | (_, None) => None,
            (Some(a), Some(b)) => Some(a.intersection(b).copied().collect()),
        };
        Ok(DefValue { scope: self.scope.clone(), models })
    }

    /// Least upper bound: model-set union, re-closed under intersection.
    pub fn alub(&self, other: &DefValue) -> Result<DefValue, DomainError> {
        self.same_scope(other)?;
        let models = match (&self.models, &other.models) {
            (None, None) => None,
            (None, Some(b)) => Some(b.clone()),
            (Some(a), None) => Some(a.clone()),
            (Some(a), Some(b)) => {
                let mut u: BTreeSet<u32> = a.union(b).copied().collect();
                intersection_close(&mut u);
                Some(u)
            }
        };
        Ok(DefValue { scope: self.scope.clone(), models })
    }

    /// Restricts the description to `target`, which must name variables of
    /// this scope; the result scope is exactly `target` in the given order.
    pub fn project(&self, target: &[String]) -> Result<DefValue, DomainError> {
        check_scope(target)?;
        let positions: Vec<usize> = target
            .iter()
            .map(|v| {
                self.scope.iter().position(|w| w == v).ok_or_else(|| {
                    DomainError::NotInScope {
                        var: v.clone(),
                        scope: scope_str(&self.scope),
                    }
                })
            })
            .collect::<Result<_, _>>()?;
        let Some(ms) = &self.models else {
            return DefValue::bottom(target);
        };
        let mut out = BTreeSet::new();
        for &m in ms {
            let mut r = 0u32;
            for (i, &p) in positions.iter().enumerate() {
                if m & (1 << p) != 0 {
                    r |= 1 << i;
                }
            }
            out.insert(r);
        }
        intersection_close(&mut out);
        Ok(DefValue { scope: target.to_vec(), models: Some(out) })
    }

    /// Renames scope variables simultaneously via `map` (identity where the
    /// map is silent). The renamed scope must remain distinct.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Result<DefValue, DomainError> {
        let scope: Vec<String> = self
            .scope
            .iter()
            .map(|v| map.get(v).cloned().unwrap_or_else(|| v.clone()))
            .collect();
        let distinct: BTreeSet<&String> = scope.iter().collect();
        if distinct.len() != scope.len() {
            return Err(DomainError::BadRename {
                reason: format!(
                    "renaming maps [{}] onto non-distinct [{}]",
                    scope_str(&self.scope),
                    scope_str(&scope)
                ),
            });
        }
        Ok(DefValue { scope, models: self.models.clone() })
    }

    /// Embeds the description into the larger scope `target` (any order),
    /// leaving the new variables unconstrained.
    pub fn extend(&self, target: &[String]) -> Result<DefValue, DomainError> {
        check_scope(target)?;
        let positions: Vec<usize> = self
            .scope
            .iter()
            .map(|v| {
                target.iter().position(|w| w == v).ok_or_else(|| {
                    DomainError::NotInScope {
                        var: v.clone(),
                        scope: scope_str(target),
                    }
                })
            })
            .collect::<Result<_, _>>()?;
        let Some(ms) = &self.models else {
            return DefValue::bottom(target);
        };
        let mut out = BTreeSet::new();
        for big in 0..=full_mask(target.len()) {
            let mut r = 0u32;
            for (i, &p) in positions.iter().enumerate() {
                if big & (1 << p) != 0 {
                    r |= 1 << i;
                }
            }
            if ms.contains(&r) {
                out.insert(big);
            }
        }
        Ok(DefValue { scope: target.to_vec(), models: Some(out) })
    }

    /// Model bit-index sets in lexicographic order of the ascending index
    /// sequences — the order used by the text form.
    fn sorted_models(&self) -> Vec<Vec<usize>> {
        let Some(ms) = &self.models else { return Vec::new() };
        let mut out: Vec<Vec<usize>> = ms
            .iter()
            .map(|&m| (0..self.scope.len()).filter(|&i| m & (1 << i) != 0).collect())
            .collect();
        out.sort();
        out
    }
}

/// Conjunction of the groundness conditions arising from one unification
/// `t1 = t2`: each variable-term correspondence `X = t` contributes
/// `X <-> (vars of t all ground)`; a functor clash yields `bot`.
pub fn abstract_equation(
    t1: &Term,
    t2: &Term,
    scope: &[String],
) -> Result<DefValue, DomainError> {
    check_scope(scope)?;
    let index = |v: &str| -> Result<usize, DomainError> {
        scope.iter().position(|w| w == v).ok_or_else(|| DomainError::NotInScope {
            var: v.to_string(),
            scope: scope_str(scope),
        })
    };

    fn decompose(t1: &Term, t2: &Term, out: &mut Vec<(String, Vec<String>)>) -> bool {
        match (t1, t2) {
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                out.push((v.clone(), t.vars()));
                true
            }
            (Term::Fun(f, fa), Term::Fun(g, ga)) => {
                f == g
                    && fa.len() == ga.len()
                    && fa.iter().zip(ga).all(|(a, b)| decompose(a, b, out))
            }
        }
    }

    let mut pairs = Vec::new();
    if !decompose(t1, t2, &mut pairs) {
        return DefValue::bottom(scope);
    }

    let mut bit_pairs = Vec::with_capacity(pairs.len());
    for (v, ts) in &pairs {
        let vbit = 1u32 << index(v)?;
        let mut smask = 0u32;
        for w in ts {
            smask |= 1 << index(w)?;
        }
        bit_pairs.push((vbit, smask));
    }

    let mut models = BTreeSet::new();
    for m in 0..=full_mask(scope.len()) {
        if bit_pairs
            .iter()
            .all(|&(vbit, smask)| (m & vbit != 0) == (m & smask == smask))
        {
            models.insert(m);
        }
    }
    Ok(DefValue { scope: scope.to_vec(), models: Some(models) })
}

/// Abstraction of a flat constraint `lhs = rhs` over `scope`.
pub fn abstract_constraint(
    c: &Constraint,
    scope: &[String],
) -> Result<DefValue, DomainError> {
    abstract_equation(&Term::Var(c.lhs.clone()), &c.rhs, scope)
}

// ---------------------------------------------------------------------------
// Text form
// ---------------------------------------------------------------------------

impl fmt::Display for DefValue {
    /// `bot`, `true`, or `models([..];[..])` with each model listing its
    /// variables in scope order and models sorted lexicographically by
    /// their scope-index sequences.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_bottom() {
            return write!(f, "bot");
        }
        if self.is_top() {
            return write!(f, "true");
        }
        write!(f, "models(")?;
        for (k, model) in self.sorted_models().iter().enumerate() {
            if k > 0 {
                write!(f, ";")?;
            }
            write!(f, "[")?;
            for (j, &i) in model.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", self.scope[i])?;
            }
            write!(f, "]")?;
        }
        write!(f, ")")
    }
}

/// Parses the textual form produced by [`DefValue`]'s `Display` against a
/// known scope.
pub fn parse_def_value(text: &str, scope: &[String]) -> Result<DefValue, DomainError> {
    let text = text.trim();
    match text {
        "bot" => return DefValue::bottom(scope),
        "true" => return DefValue::top(scope),
        _ => {}
    }
    let inner = text
        .strip_prefix("models(")
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| DomainError::InvalidValue {
            reason: format!("expected bot, true, or models(..), found `{text}`"),
        })?;
    let mut models: Vec<Vec<String>> = Vec::new();
    for part in inner.split(';') {
        let part = part.trim();
        let body = part
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| DomainError::InvalidValue {
                reason: format!("expected a [..] model, found `{part}`"),
            })?;
        let body = body.trim();
        if body.is_empty() {
            models.push(Vec::new());
        } else {
            models.push(body.split(',').map(|v| v.trim().to_string()).collect());
        }
    }
    DefValue::from_models(scope, models)
}
