//! Goal-dependent groundness analysis.
//!
//! [`analyze`] computes, for a program and a set of root call patterns, the
//! least fixpoint assigning every reachable call pattern its groundness
//! answer, together with the dependency arcs recording which body call of
//! which rule demanded which callee entry. The answer table doubles as a
//! checkable certificate: re-evaluating every entry one step against the
//! table ([`one_step`]) reproduces the table exactly.
//!
//! Entries are keyed by predicate, arity, and a call pattern expressed over
//! the positional scope ([`positional_scope`]), so keys are independent of
//! the variable names a particular program version uses in rule heads.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::defdom::{abstract_constraint, DefValue, DomainError, Scope};
use crate::lprog::{positional_base, Atom, Literal, Program, Rule, RuleId};

/// A call pattern: a groundness description over a positional scope.
pub type CallPattern = DefValue;

/// Canonical scope for call patterns and answers of an `arity`-ary
/// predicate: `X,Y,Z,U,V,W,S,T`, then `X9`, `X10`, ...
pub fn positional_scope(arity: usize) -> Scope {
    (0..arity).map(positional_base).collect()
}

/// Analysis-table key: predicate, arity, and call pattern over the
/// positional scope.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntryKey {
    pub pred: String,
    pub arity: usize,
    pub cp: CallPattern,
}

impl EntryKey {
    /// Builds a key from a call pattern that is already positional.
    pub fn new(pred: &str, arity: usize, cp: CallPattern) -> Result<EntryKey, DomainError> {
        if cp.scope() != positional_scope(arity) {
            return Err(DomainError::InvalidValue {
                reason: format!(
                    "call pattern scope [{}] is not the positional scope of {pred}/{arity}",
                    cp.scope().join(",")
                ),
            });
        }
        Ok(EntryKey { pred: pred.to_string(), arity, cp })
    }

    /// Builds the key demanded by a body call: the pattern over the call's
    /// argument variables is relabeled positionally.
    pub fn from_call(atom: &Atom, cp: &DefValue) -> Result<EntryKey, DomainError> {
        if cp.scope() != atom.args {
            return Err(DomainError::ScopeMismatch {
                expected: atom.args.join(","),
                found: cp.scope().join(","),
            });
        }
        let map: BTreeMap<String, String> = atom
            .args
            .iter()
            .cloned()
            .zip(positional_scope(atom.arity()))
            .collect();
        Ok(EntryKey {
            pred: atom.pred.clone(),
            arity: atom.arity(),
            cp: cp.rename(&map)?,
        })
    }

    /// The entry's atom over positional argument names.
    pub fn atom(&self) -> Atom {
        Atom { pred: self.pred.clone(), args: positional_scope(self.arity) }
    }
}

impl fmt::Display for EntryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {}", self.atom(), self.cp)
    }
}

/// Answer table: groundness answer (over the positional scope) per entry.
pub type AnswerTable = BTreeMap<EntryKey, DefValue>;

/// Arc identity: calling entry, rule, and 1-based body position of the call.
pub type ArcKey = (EntryKey, RuleId, usize);

/// One dependency arc: the body call as written in the rule, the call
/// pattern it was made with (over the call's own argument variables), and
/// the entry it demands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyArc {
    pub body_atom: Atom,
    pub body_cp: DefValue,
    pub callee: EntryKey,
}

/// Dependency arc table.
pub type Dat = BTreeMap<ArcKey, DependencyArc>;

/// Supplies answers for callee entries during a rule-body traversal.
pub trait AnswerSource {
    type Err: From<DomainError>;
    fn lookup(&mut self, key: &EntryKey) -> Result<DefValue, Self::Err>;
}

/// Lookup in a fixed table; a demanded entry the table lacks is an error.
pub struct TableSource<'t> {
    pub table: &'t AnswerTable,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableLookupError {
    #[error("no entry for {0}")]
    Missing(EntryKey),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl AnswerSource for TableSource<'_> {
    type Err = TableLookupError;

    fn lookup(&mut self, key: &EntryKey) -> Result<DefValue, TableLookupError> {
        self.table
            .get(key)
            .cloned()
            .ok_or_else(|| TableLookupError::Missing(key.clone()))
    }
}

/// What one body call contributed to a traversal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraversalRecord {
    /// 1-based position of the call literal in the rule body.
    pub pos: usize,
    pub body_atom: Atom,
    pub body_cp: DefValue,
    pub callee: EntryKey,
    /// Description over the rule scope on entry to the call, before the
    /// callee's answer is applied; resuming the traversal here with a
    /// grown answer continues the fixpoint computation.
    pub d_before: DefValue,
}

/// Result of propagating a call pattern through one rule body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Traversal {
    /// Contribution to the entry's answer, over the positional scope;
    /// `bot` when the body is unreachable under the current answers.
    pub exit: DefValue,
    pub records: Vec<TraversalRecord>,
}

/// Propagates `entry_cp` through `rule`'s body left to right: constraints
/// are met in, calls record an arc and meet in the looked-up answer. With
/// `resume`, the walk restarts at the given 1-based call position from the
/// given description instead of at the rule head. An unreachable (`bot`)
/// description short-circuits the rest of the body.
pub fn traverse_rule<S: AnswerSource>(
    rule: &Rule,
    entry_cp: &DefValue,
    resume: Option<(usize, &DefValue)>,
    src: &mut S,
) -> Result<Traversal, S::Err> {
    let scope = rule.scope_vars();
    let head_positional = positional_scope(rule.head.arity());
    let (skip, mut d) = match resume {
        None => {
            let to_head: BTreeMap<String, String> = head_positional
                .iter()
                .cloned()
                .zip(rule.head.args.iter().cloned())
                .collect();
            let init = entry_cp.rename(&to_head)?.extend(&scope)?;
            (0, init)
        }
        Some((pos, d0)) => (pos - 1, d0.clone()),
    };

    let mut records = Vec::new();
    for (idx, lit) in rule.body.iter().enumerate().skip(skip) {
        if d.is_bottom() {
            break;
        }
        match lit {
            Literal::Constraint(c) => {
                d = d.meet(&abstract_constraint(c, &scope)?)?;
            }
            Literal::Call(atom) => {
                let body_cp = d.project(&atom.args)?;
                let callee = EntryKey::from_call(atom, &body_cp)?;
                records.push(TraversalRecord {
                    pos: idx + 1,
                    body_atom: atom.clone(),
                    body_cp,
                    callee: callee.clone(),
                    d_before: d.clone(),
                });
                let answer = src.lookup(&callee)?;
                let to_args: BTreeMap<String, String> = positional_scope(atom.arity())
                    .into_iter()
                    .zip(atom.args.iter().cloned())
                    .collect();
                let localized = answer.rename(&to_args)?.extend(&scope)?;
                d = d.meet(&localized)?;
            }
        }
    }

    let exit = if d.is_bottom() {
        DefValue::bottom(&head_positional)?
    } else {
        let to_positional: BTreeMap<String, String> = rule
            .head
            .args
            .iter()
            .cloned()
            .zip(head_positional.iter().cloned())
            .collect();
        d.project(&rule.head.args)?.rename(&to_positional)?
    };
    Ok(Traversal { exit, records })
}

/// One evaluation step for a single entry: every rule of the predicate is
/// traversed under `src` and the exits are joined.
pub struct EntryComputation {
    pub answer: DefValue,
    pub traversals: Vec<(RuleId, Traversal)>,
}

pub fn compute_entry<S: AnswerSource>(
    program: &Program,
    key: &EntryKey,
    src: &mut S,
) -> Result<EntryComputation, S::Err> {
    let mut answer = DefValue::bottom(&positional_scope(key.arity))?;
    let mut traversals = Vec::new();
    for rule in program.rules_for(&key.pred, key.arity) {
        let t = traverse_rule(rule, &key.cp, None, src)?;
        answer = answer.alub(&t.exit)?;
        traversals.push((rule.id.clone(), t));
    }
    Ok(EntryComputation { answer, traversals })
}

/// Re-evaluates every entry of `table` one step against `table` itself.
/// A table is a fixpoint — and thus a valid certificate — exactly when the
/// result equals the input.
pub fn one_step(
    program: &Program,
    table: &AnswerTable,
) -> Result<AnswerTable, TableLookupError> {
    let mut out = AnswerTable::new();
    for key in table.keys() {
        let mut src = TableSource { table };
        let c = compute_entry(program, key, &mut src)?;
        out.insert(key.clone(), c.answer);
    }
    Ok(out)
}

/// Counters for one analysis run. Rule traversals include partial
/// resumptions of a body at a recorded call position.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub rule_traversals: usize,
    pub answer_updates: usize,
}

#[derive(Debug, Clone)]
pub struct AnalysisResult {
    pub at: AnswerTable,
    pub dat: Dat,
    pub stats: EngineStats,
}

struct Task {
    entry: EntryKey,
    rule: RuleId,
    /// 0 starts at the rule head; a call position resumes from its memo.
    from_pos: usize,
}

struct Analyzer<'p> {
    program: &'p Program,
    at: AnswerTable,
    dat: Dat,
    /// Description on entry to each recorded call position, used to resume
    /// a body there when the callee's answer grows.
    memos: BTreeMap<ArcKey, DefValue>,
    queue: VecDeque<Task>,
    stats: EngineStats,
}

impl AnswerSource for Analyzer<'_> {
    type Err = DomainError;

    fn lookup(&mut self, key: &EntryKey) -> Result<DefValue, DomainError> {
        self.demand(key)?;
        Ok(self.at.get(key).expect("demanded entry exists").clone())
    }
}

impl<'p> Analyzer<'p> {
    fn demand(&mut self, key: &EntryKey) -> Result<(), DomainError> {
        if self.at.contains_key(key) {
            return Ok(());
        }
        self.at
            .insert(key.clone(), DefValue::bottom(&positional_scope(key.arity))?);
        for rule in self.program.rules_for(&key.pred, key.arity) {
            self.queue.push_back(Task {
                entry: key.clone(),
                rule: rule.id.clone(),
                from_pos: 0,
            });
        }
        Ok(())
    }

    fn run(&mut self, task: Task) -> Result<(), DomainError> {
        let program = self.program;
        let rule = program
            .rule_by_id(&task.rule)
            .expect("tasks reference program rules");
        let memo;
        let resume = if task.from_pos == 0 {
            None
        } else {
            memo = self
                .memos
                .get(&(task.entry.clone(), task.rule.clone(), task.from_pos))
                .expect("resumption has a memo")
                .clone();
            Some((task.from_pos, &memo))
        };
        self.stats.rule_traversals += 1;
        let cp = task.entry.cp.clone();
        let tr = traverse_rule(rule, &cp, resume, self)?;

        for rec in tr.records {
            let arc_key = (task.entry.clone(), task.rule.clone(), rec.pos);
            if let Some(old) = self.memos.get(&arc_key) {
                debug_assert!(
                    old.leq(&rec.d_before).unwrap_or(false),
                    "call-position descriptions grow monotonically"
                );
            }
            self.memos.insert(arc_key.clone(), rec.d_before);
            self.dat.insert(
                arc_key,
                DependencyArc {
                    body_atom: rec.body_atom,
                    body_cp: rec.body_cp,
                    callee: rec.callee,
                },
            );
        }

        let old = self.at.get(&task.entry).expect("demanded entry").clone();
        let new = old.alub(&tr.exit)?;
        if new != old {
            debug_assert!(old.leq(&new).unwrap_or(false), "answers grow monotonically");
            self.stats.answer_updates += 1;
            self.at.insert(task.entry.clone(), new);
            let dependents: Vec<Task> = self
                .dat
                .iter()
                .filter(|(_, arc)| arc.callee == task.entry)
                .map(|((e, r, p), _)| Task {
                    entry: e.clone(),
                    rule: r.clone(),
                    from_pos: *p,
                })
                .collect();
            self.queue.extend(dependents);
        }
        Ok(())
    }
}

/// Drops entries not reachable from `roots` along the arcs, and the arcs
/// hanging off the dropped entries.
pub fn prune_to_roots(at: &mut AnswerTable, dat: &mut Dat, roots: &BTreeSet<EntryKey>) {
    let mut reachable: BTreeSet<EntryKey> =
        roots.iter().filter(|r| at.contains_key(*r)).cloned().collect();
    loop {
        let mut grew = false;
        for ((head, _, _), arc) in dat.iter() {
            if reachable.contains(head) && !reachable.contains(&arc.callee) {
                reachable.insert(arc.callee.clone());
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    at.retain(|k, _| reachable.contains(k));
    dat.retain(|(head, _, _), _| reachable.contains(head));
}

/// Computes the least-fixpoint answer and arc tables for `program`,
/// demanded by the `queries` call patterns, pruned to the entries the
/// queries actually reach.
pub fn analyze(
    program: &Program,
    queries: &BTreeSet<EntryKey>,
) -> Result<AnalysisResult, DomainError> {
    let mut a = Analyzer {
        program,
        at: AnswerTable::new(),
        dat: Dat::new(),
        memos: BTreeMap::new(),
        queue: VecDeque::new(),
        stats: EngineStats::default(),
    };
    for q in queries {
        a.demand(q)?;
    }
    while let Some(task) = a.queue.pop_front() {
        a.run(task)?;
    }
    let Analyzer { mut at, mut dat, stats, .. } = a;
    prune_to_roots(&mut at, &mut dat, queries);
    Ok(AnalysisResult { at, dat, stats })
}
