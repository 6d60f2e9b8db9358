//! Structured program updates: diff, patch, and classification.
//!
//! An [`Update`] records, per predicate, which rules a new program version
//! adds and which it deletes. Rule identity is content up to a bijective
//! variable renaming — there are no textual positions, so applying an
//! update commutes with reordering rules of other predicates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lprog::{normalize, Literal, Program, Rule, Term};

/// Rules added to and deleted from one predicate, in program order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredUpdate {
    pub add: Vec<Rule>,
    pub del: Vec<Rule>,
}

/// A program update: the per-predicate added and deleted rule sets.
/// Produced by [`diff`], applied by [`patch`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Update {
    /// Keyed by `(predicate, arity)`; a tuple is present only when it
    /// actually adds or deletes something.
    pub tuples: BTreeMap<(String, usize), PredUpdate>,
}

impl Update {
    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Predicates the update touches.
    pub fn predicates(&self) -> impl Iterator<Item = &(String, usize)> {
        self.tuples.keys()
    }

    pub fn rules_added(&self) -> usize {
        self.tuples.values().map(|t| t.add.len()).sum()
    }

    pub fn rules_deleted(&self) -> usize {
        self.tuples.values().map(|t| t.del.len()).sum()
    }
}

/// The shape of an update, which decides what a certificate consumer can
/// assume: additions can only grow answers, deletions can only shrink them,
/// arbitrary changes guarantee neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateClass {
    Empty,
    Addition,
    Deletion,
    Arbitrary,
}

impl fmt::Display for UpdateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateClass::Empty => "empty",
            UpdateClass::Addition => "addition",
            UpdateClass::Deletion => "deletion",
            UpdateClass::Arbitrary => "arbitrary",
        })
    }
}

/// An update asked to delete a rule the program does not contain.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("update deletes a rule the program does not contain: {rule}")]
pub struct PatchConflict {
    pub rule: Rule,
}

/// Running variable correspondence while comparing two rules.
#[derive(Default)]
struct Bijection {
    fwd: BTreeMap<String, String>,
    bwd: BTreeMap<String, String>,
}

impl Bijection {
    fn bind(&mut self, x: &str, y: &str) -> bool {
        match (self.fwd.get(x), self.bwd.get(y)) {
            (Some(y2), _) => y2 == y,
            (None, Some(_)) => false,
            (None, None) => {
                self.fwd.insert(x.to_string(), y.to_string());
                self.bwd.insert(y.to_string(), x.to_string());
                true
            }
        }
    }

    fn terms(&mut self, s: &Term, t: &Term) -> bool {
        match (s, t) {
            (Term::Var(x), Term::Var(y)) => self.bind(x, y),
            (Term::Fun(f, xs), Term::Fun(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(a, b)| self.terms(a, b))
            }
            _ => false,
        }
    }
}

/// True when the rules are equal up to a bijective variable renaming.
/// Body literal order is significant: a reordered body is a different rule.
pub fn variant_eq(a: &Rule, b: &Rule) -> bool {
    if a.head.pred != b.head.pred
        || a.head.arity() != b.head.arity()
        || a.body.len() != b.body.len()
    {
        return false;
    }
    let mut bij = Bijection::default();
    if !a.head.args.iter().zip(&b.head.args).all(|(x, y)| bij.bind(x, y)) {
        return false;
    }
    a.body.iter().zip(&b.body).all(|(la, lb)| match (la, lb) {
        (Literal::Constraint(ca), Literal::Constraint(cb)) => {
            bij.bind(&ca.lhs, &cb.lhs) && bij.terms(&ca.rhs, &cb.rhs)
        }
        (Literal::Call(aa), Literal::Call(ab)) => {
            aa.pred == ab.pred
                && aa.args.len() == ab.args.len()
                && aa.args.iter().zip(&ab.args).all(|(x, y)| bij.bind(x, y))
        }
        _ => false,
    })
}

/// Computes the update that turns `old` into `new`: per predicate, the
/// rules of `new` without a (variant-equal) counterpart in `old` are
/// additions, and the unmatched rules of `old` are deletions. Matching is
/// multiset matching, so duplicated rules are accounted per occurrence.
pub fn diff(new: &Program, old: &Program) -> Update {
    let preds: BTreeSet<(String, usize)> =
        old.predicates().chain(new.predicates()).cloned().collect();
    let mut tuples = BTreeMap::new();
    for key in preds {
        let old_rules: Vec<&Rule> = old.rules_for(&key.0, key.1).collect();
        let mut matched = vec![false; old_rules.len()];
        let mut add = Vec::new();
        for nr in new.rules_for(&key.0, key.1) {
            let hit = old_rules
                .iter()
                .enumerate()
                .position(|(i, or)| !matched[i] && variant_eq(or, nr));
            match hit {
                Some(i) => matched[i] = true,
                None => add.push(nr.clone()),
            }
        }
        let del: Vec<Rule> = old_rules
            .iter()
            .zip(&matched)
            .filter(|(_, m)| !**m)
            .map(|(r, _)| (*r).clone())
            .collect();
        if !add.is_empty() || !del.is_empty() {
            tuples.insert(key, PredUpdate { add, del });
        }
    }
    Update { tuples }
}

/// Applies an update: deletions are matched (up to renaming) and removed,
/// then each tuple's additions are inserted after the predicate's surviving
/// rules (at the program end for a predicate with none). The result is
/// renormalized, with rule ordinals reassigned densely.
pub fn patch(old: &Program, u: &Update) -> Result<Program, PatchConflict> {
    let mut rules: Vec<Rule> = old.rules().to_vec();
    for (key, tuple) in &u.tuples {
        for d in &tuple.del {
            let pos = rules.iter().position(|r| {
                r.head.pred == key.0 && r.head.arity() == key.1 && variant_eq(r, d)
            });
            match pos {
                Some(i) => {
                    rules.remove(i);
                }
                None => return Err(PatchConflict { rule: d.clone() }),
            }
        }
    }
    for (key, tuple) in &u.tuples {
        let insert_at = rules
            .iter()
            .rposition(|r| r.head.pred == key.0 && r.head.arity() == key.1)
            .map(|i| i + 1)
            .unwrap_or(rules.len());
        for (j, a) in tuple.add.iter().enumerate() {
            rules.insert(insert_at + j, a.clone());
        }
    }
    Ok(normalize(&Program::new(rules)))
}

/// Classifies an update: pure addition, pure deletion, empty, or arbitrary.
pub fn classify(u: &Update) -> UpdateClass {
    let any_add = u.tuples.values().any(|t| !t.add.is_empty());
    let any_del = u.tuples.values().any(|t| !t.del.is_empty());
    match (any_add, any_del) {
        (false, false) => UpdateClass::Empty,
        (true, false) => UpdateClass::Addition,
        (false, true) => UpdateClass::Deletion,
        (true, true) => UpdateClass::Arbitrary,
    }
}
