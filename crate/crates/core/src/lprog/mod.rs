//! Normalized constraint logic programs.
//!
//! A program is a set of rules `p(x1,...,xn) :- b1, ..., bm` where the head
//! arguments are distinct variables (identical across all rules of a
//! predicate) and every body literal is either a unification constraint
//! `X = t` or a call whose arguments are distinct variables.  Arbitrary
//! Prolog-style input is accepted by the parser and brought into this form
//! by [`normalize`], which is idempotent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

mod parse;

pub use parse::{parse_atom, parse_program, parse_rule, ParseError};

/// First-order term. Lists are ordinary terms over the pair functor `"."`
/// and the constant `"[]"`; the parser and printer translate `[H|T]` sugar.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Fun(String, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn constant(name: &str) -> Term {
        Term::Fun(name.to_string(), Vec::new())
    }

    /// Appends variables in first-occurrence order, skipping ones already seen.
    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.iter().any(|w| w == v) {
                    out.push(v.clone());
                }
            }
            Term::Fun(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn rename(&self, map: &BTreeMap<String, String>) -> Term {
        match self {
            Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
            Term::Fun(f, args) => {
                Term::Fun(f.clone(), args.iter().map(|a| a.rename(map)).collect())
            }
        }
    }
}

/// An atom in flattened form: predicate applied to distinct variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(pred: &str, args: &[&str]) -> Atom {
        Atom {
            pred: pred.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    fn rename(&self, map: &BTreeMap<String, String>) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self
                .args
                .iter()
                .map(|v| map.get(v).cloned().unwrap_or_else(|| v.clone()))
                .collect(),
        }
    }
}

/// A unification constraint `lhs = rhs` with a variable on the left.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constraint {
    pub lhs: String,
    pub rhs: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    Constraint(Constraint),
    Call(Atom),
}

/// Stable rule identity: predicate, arity, and a 1-based ordinal assigned in
/// program order within the predicate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId {
    pub pred: String,
    pub arity: usize,
    pub ord: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub id: RuleId,
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl Rule {
    /// All variables of the rule in first-occurrence order, head first.
    /// This ordering is the canonical scope for abstract descriptions of
    /// the rule body.
    pub fn scope_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for v in &self.head.args {
            if !out.iter().any(|w| w == v) {
                out.push(v.clone());
            }
        }
        for lit in &self.body {
            match lit {
                Literal::Constraint(c) => {
                    if !out.iter().any(|w| w == &c.lhs) {
                        out.push(c.lhs.clone());
                    }
                    c.rhs.collect_vars(&mut out);
                }
                Literal::Call(a) => {
                    for v in &a.args {
                        if !out.iter().any(|w| w == v) {
                            out.push(v.clone());
                        }
                    }
                }
            }
        }
        out
    }

    fn rename(&self, map: &BTreeMap<String, String>) -> Rule {
        Rule {
            id: self.id.clone(),
            head: self.head.rename(map),
            body: self
                .body
                .iter()
                .map(|l| match l {
                    Literal::Constraint(c) => Literal::Constraint(Constraint {
                        lhs: map.get(&c.lhs).cloned().unwrap_or_else(|| c.lhs.clone()),
                        rhs: c.rhs.rename(map),
                    }),
                    Literal::Call(a) => Literal::Call(a.rename(map)),
                })
                .collect(),
        }
    }
}

/// A program: rules plus a predicate index. Construct via [`parse_program`],
/// [`normalize`], or [`Program::new`] (which rebuilds ids and the index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    rules: Vec<Rule>,
    index: BTreeMap<(String, usize), Vec<usize>>,
}

impl Program {
    /// Builds a program from rules in the given order, reassigning ordinals
    /// densely from 1 per predicate.
    pub fn new(mut rules: Vec<Rule>) -> Program {
        let mut counters: BTreeMap<(String, usize), usize> = BTreeMap::new();
        let mut index: BTreeMap<(String, usize), Vec<usize>> = BTreeMap::new();
        for (i, r) in rules.iter_mut().enumerate() {
            let key = (r.head.pred.clone(), r.head.arity());
            let n = counters.entry(key.clone()).or_insert(0);
            *n += 1;
            r.id = RuleId {
                pred: key.0.clone(),
                arity: key.1,
                ord: *n,
            };
            index.entry(key).or_default().push(i);
        }
        Program { rules, index }
    }

    pub fn empty() -> Program {
        Program::new(Vec::new())
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rules_for(&self, pred: &str, arity: usize) -> impl Iterator<Item = &Rule> {
        self.index
            .get(&(pred.to_string(), arity))
            .into_iter()
            .flatten()
            .map(|&i| &self.rules[i])
    }

    pub fn rule_by_id(&self, id: &RuleId) -> Option<&Rule> {
        self.rules_for(&id.pred, id.arity).find(|r| r.id == *id)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &(String, usize)> {
        self.index.keys()
    }

    /// True when heads are in base form with a per-predicate identical
    /// variable sequence and every call has pairwise-distinct variable
    /// arguments. [`normalize`] establishes this and is the identity on
    /// programs already satisfying it.
    pub fn is_normalized(&self) -> bool {
        let mut canonical: BTreeMap<(String, usize), &[String]> = BTreeMap::new();
        for r in &self.rules {
            let distinct: BTreeSet<&String> = r.head.args.iter().collect();
            if distinct.len() != r.head.args.len() {
                return false;
            }
            match canonical.entry((r.head.pred.clone(), r.head.arity())) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(&r.head.args);
                }
                std::collections::btree_map::Entry::Occupied(e) => {
                    if *e.get() != r.head.args.as_slice() {
                        return false;
                    }
                }
            }
            for lit in &r.body {
                if let Literal::Call(a) = lit {
                    let distinct: BTreeSet<&String> = a.args.iter().collect();
                    if distinct.len() != a.args.len() {
                        return false;
                    }
                }
            }
        }
        true
    }
}

impl Default for Program {
    fn default() -> Program {
        Program::empty()
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Raw (possibly unnormalized) rule as produced by the parser: head and call
/// arguments are arbitrary terms.
#[derive(Debug, Clone)]
pub(crate) struct RawRule {
    pub head_pred: String,
    pub head_args: Vec<Term>,
    pub body: Vec<RawLiteral>,
}

#[derive(Debug, Clone)]
pub(crate) enum RawLiteral {
    /// One side is guaranteed to be a variable (enforced at parse time).
    Eq(Term, Term),
    Call(String, Vec<Term>),
}

/// Canonical variable name for argument position `i` (0-based), used when a
/// fresh head or call argument has to be invented and for the positional
/// scopes of call patterns and answers.
pub(crate) fn positional_base(i: usize) -> String {
    const NAMES: [&str; 8] = ["X", "Y", "Z", "U", "V", "W", "S", "T"];
    if i < NAMES.len() {
        NAMES[i].to_string()
    } else {
        format!("X{}", i + 1)
    }
}

/// First name of the form `base`, `base1`, `base2`, ... not in `used`;
/// reserves the returned name.
fn fresh_name(base: &str, used: &mut BTreeSet<String>) -> String {
    if used.insert(base.to_string()) {
        return base.to_string();
    }
    let mut k = 1usize;
    loop {
        let cand = format!("{base}{k}");
        if used.insert(cand.clone()) {
            return cand;
        }
        k += 1;
    }
}

fn raw_rule_vars(raw: &RawRule) -> BTreeSet<String> {
    let mut vars = Vec::new();
    for t in &raw.head_args {
        t.collect_vars(&mut vars);
    }
    for lit in &raw.body {
        match lit {
            RawLiteral::Eq(a, b) => {
                a.collect_vars(&mut vars);
                b.collect_vars(&mut vars);
            }
            RawLiteral::Call(_, args) => {
                for t in args {
                    t.collect_vars(&mut vars);
                }
            }
        }
    }
    vars.into_iter().collect()
}

/// Flattens one rule: head and call arguments become distinct variables,
/// with a `Var = term` constraint per replaced argument (prepended for the
/// head, inserted before the call for body atoms). A replaced non-variable
/// argument `t` at a position with fresh variable `F` yields `F = t`; a
/// repeated variable `V` yields `V = F`.
fn flatten_rule(raw: &RawRule) -> Rule {
    let mut used = raw_rule_vars(raw);

    let mut head_args: Vec<String> = Vec::new();
    let mut pre: Vec<Literal> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (i, t) in raw.head_args.iter().enumerate() {
        match t {
            Term::Var(v) if !seen.contains(v) => {
                seen.insert(v.clone());
                head_args.push(v.clone());
            }
            Term::Var(v) => {
                let f = fresh_name(&positional_base(i), &mut used);
                pre.push(Literal::Constraint(Constraint {
                    lhs: v.clone(),
                    rhs: Term::Var(f.clone()),
                }));
                head_args.push(f);
            }
            t => {
                let f = fresh_name(&positional_base(i), &mut used);
                pre.push(Literal::Constraint(Constraint {
                    lhs: f.clone(),
                    rhs: t.clone(),
                }));
                head_args.push(f);
            }
        }
    }

    let mut body = pre;
    for lit in &raw.body {
        match lit {
            RawLiteral::Eq(a, b) => {
                let (lhs, rhs) = match (a, b) {
                    (Term::Var(v), t) => (v.clone(), t.clone()),
                    (t, Term::Var(v)) => (v.clone(), t.clone()),
                    // The parser rejects equations without a variable side.
                    _ => unreachable!("unification constraint without variable side"),
                };
                body.push(Literal::Constraint(Constraint { lhs, rhs }));
            }
            RawLiteral::Call(pred, args) => {
                let mut call_args: Vec<String> = Vec::new();
                let mut seen: BTreeSet<String> = BTreeSet::new();
                for (i, t) in args.iter().enumerate() {
                    match t {
                        Term::Var(v) if !seen.contains(v) => {
                            seen.insert(v.clone());
                            call_args.push(v.clone());
                        }
                        Term::Var(v) => {
                            let f = fresh_name(&positional_base(i), &mut used);
                            body.push(Literal::Constraint(Constraint {
                                lhs: v.clone(),
                                rhs: Term::Var(f.clone()),
                            }));
                            call_args.push(f);
                        }
                        t => {
                            let f = fresh_name(&positional_base(i), &mut used);
                            body.push(Literal::Constraint(Constraint {
                                lhs: f.clone(),
                                rhs: t.clone(),
                            }));
                            call_args.push(f);
                        }
                    }
                }
                body.push(Literal::Call(Atom {
                    pred: pred.clone(),
                    args: call_args,
                }));
            }
        }
    }

    Rule {
        id: RuleId {
            pred: raw.head_pred.clone(),
            arity: raw.head_args.len(),
            ord: 0,
        },
        head: Atom {
            pred: raw.head_pred.clone(),
            args: head_args,
        },
        body,
    }
}

/// Renames `rule` so its head variable sequence equals `canonical`,
/// moving any clashing body-only variables out of the way first.
fn align_head(rule: &Rule, canonical: &[String]) -> Rule {
    if rule.head.args == canonical {
        return rule.clone();
    }
    let rule_vars: BTreeSet<String> = rule.scope_vars().into_iter().collect();
    let targets: BTreeSet<String> = canonical.iter().cloned().collect();
    let head_set: BTreeSet<String> = rule.head.args.iter().cloned().collect();

    let mut map: BTreeMap<String, String> = BTreeMap::new();
    let mut avoid: BTreeSet<String> = rule_vars.union(&targets).cloned().collect();
    for (v, c) in rule.head.args.iter().zip(canonical) {
        map.insert(v.clone(), c.clone());
    }
    for w in &rule_vars {
        if head_set.contains(w) {
            continue;
        }
        if targets.contains(w) {
            let f = fresh_name(w, &mut avoid);
            map.insert(w.clone(), f);
        }
    }
    rule.rename(&map)
}

pub(crate) fn normalize_raw(raw: Vec<RawRule>) -> Program {
    let flat: Vec<Rule> = raw.iter().map(flatten_rule).collect();
    let mut canonical: BTreeMap<(String, usize), Vec<String>> = BTreeMap::new();
    for r in &flat {
        canonical
            .entry((r.head.pred.clone(), r.head.arity()))
            .or_insert_with(|| r.head.args.clone());
    }
    let aligned = flat
        .iter()
        .map(|r| align_head(r, &canonical[&(r.head.pred.clone(), r.head.arity())]))
        .collect();
    Program::new(aligned)
}

fn rule_to_raw(r: &Rule) -> RawRule {
    RawRule {
        head_pred: r.head.pred.clone(),
        head_args: r.head.args.iter().map(|v| Term::Var(v.clone())).collect(),
        body: r
            .body
            .iter()
            .map(|l| match l {
                Literal::Constraint(c) => {
                    RawLiteral::Eq(Term::Var(c.lhs.clone()), c.rhs.clone())
                }
                Literal::Call(a) => RawLiteral::Call(
                    a.pred.clone(),
                    a.args.iter().map(|v| Term::Var(v.clone())).collect(),
                ),
            })
            .collect(),
    }
}

/// Brings a program into normalized form. Idempotent: a normalized program
/// comes back structurally unchanged.
pub fn normalize(p: &Program) -> Program {
    normalize_raw(p.rules.iter().map(rule_to_raw).collect())
}

/// Returns a variant of `rule` whose variables all carry a fresh numeric
/// suffix, avoiding every name in `avoid`. The same suffix is used for the
/// whole rule, so `app(X,Y,Z)` becomes `app(X1,Y1,Z1)` on the first attempt.
pub fn rename_rule(rule: &Rule, avoid: &BTreeSet<String>) -> Rule {
    let vars = rule.scope_vars();
    let mut k = 1usize;
    loop {
        let renamed: Vec<String> = vars.iter().map(|v| format!("{v}{k}")).collect();
        let distinct: BTreeSet<&String> = renamed.iter().collect();
        if distinct.len() == renamed.len() && renamed.iter().all(|v| !avoid.contains(v)) {
            let map: BTreeMap<String, String> =
                vars.into_iter().zip(renamed).collect();
            return rule.rename(&map);
        }
        k += 1;
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Fun(name, args) if name == "[]" && args.is_empty() => write!(f, "[]"),
            Term::Fun(name, args) if name == "." && args.len() == 2 => {
                write!(f, "[{}", args[0])?;
                let mut tail = &args[1];
                loop {
                    match tail {
                        Term::Fun(n, a) if n == "." && a.len() == 2 => {
                            write!(f, ",{}", a[0])?;
                            tail = &a[1];
                        }
                        Term::Fun(n, a) if n == "[]" && a.is_empty() => {
                            return write!(f, "]");
                        }
                        other => return write!(f, "|{other}]"),
                    }
                }
            }
            Term::Fun(name, args) if args.is_empty() => write!(f, "{name}"),
            Term::Fun(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Constraint(c) => write!(f, "{} = {}", c.lhs, c.rhs),
            Literal::Call(a) => write!(f, "{a}"),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        write!(f, ".")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.pred, self.arity, self.ord)
    }
}
