//! Certificate checking.
//!
//! A certificate is an answer table. Checking never iterates to a fixpoint:
//! every entry demanded by the queries is re-evaluated exactly once against
//! the certificate's own claims, and the recomputed answer is compared with
//! the claim — equality in strict mode, at-most-the-claim in lenient mode.
//! Entries are visited depth first, so a traversal that demands a not yet
//! verified callee checks the callee first and then resumes with its claim;
//! cyclic demands fall back to the claim directly.

// Rejections deliberately carry both the claimed and the recomputed value
// so callers get a complete diagnostic; the fat error type is the point.
#![allow(clippy::result_large_err)]

use std::collections::BTreeSet;

use crate::defdom::{DefValue, DomainError};
use crate::engine::{
    compute_entry, AnswerSource, AnswerTable, Dat, DependencyArc, EntryKey, TableLookupError,
    TableSource,
};
use crate::lprog::Program;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    /// Recomputed answers must equal the claims: accepts exactly the
    /// fixpoints of the program's evaluation step.
    Strict,
    /// Recomputed answers may fall below the claims: additionally accepts
    /// safe over-approximations.
    Lenient,
}

/// Why a certificate was rejected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("entry {key} claims {claimed} but re-evaluates to {computed}")]
    InvalidAnswer {
        key: EntryKey,
        claimed: DefValue,
        computed: DefValue,
    },
    #[error("no entry for demanded call {key}")]
    MissingEntry { key: EntryKey },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("certificate rejected: {0}")]
    Rejected(#[from] Rejection),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckStats {
    pub entries_checked: usize,
    pub rule_traversals: usize,
}

/// Outcome of a successful check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    /// The verified entries (keyed claims), pruned to what the queries
    /// demanded.
    pub at: AnswerTable,
    /// Dependency arcs recorded while re-evaluating the verified entries.
    pub dat: Dat,
    /// Certificate entries no query ever demanded. Harmless, but worth
    /// surfacing: they were not verified.
    pub unused: Vec<EntryKey>,
    pub stats: CheckStats,
}

struct Dfs<'a> {
    program: &'a Program,
    cert: &'a AnswerTable,
    mode: CheckMode,
    in_progress: BTreeSet<EntryKey>,
    checked: BTreeSet<EntryKey>,
    dat: Dat,
    stats: CheckStats,
}

impl AnswerSource for Dfs<'_> {
    type Err = CheckError;

    fn lookup(&mut self, key: &EntryKey) -> Result<DefValue, CheckError> {
        let claimed = self
            .cert
            .get(key)
            .cloned()
            .ok_or_else(|| Rejection::MissingEntry { key: key.clone() })?;
        if !self.checked.contains(key) && !self.in_progress.contains(key) {
            self.check_key(key)?;
        }
        Ok(claimed)
    }
}

impl<'a> Dfs<'a> {
    fn check_key(&mut self, key: &EntryKey) -> Result<(), CheckError> {
        let claimed = self
            .cert
            .get(key)
            .cloned()
            .ok_or_else(|| Rejection::MissingEntry { key: key.clone() })?;
        self.in_progress.insert(key.clone());
        let program = self.program;
        let comp = compute_entry(program, key, self)?;
        self.in_progress.remove(key);
        self.checked.insert(key.clone());
        self.stats.entries_checked += 1;
        self.stats.rule_traversals += comp.traversals.len();
        for (rule_id, tr) in &comp.traversals {
            for rec in &tr.records {
                self.dat.insert(
                    (key.clone(), rule_id.clone(), rec.pos),
                    DependencyArc {
                        body_atom: rec.body_atom.clone(),
                        body_cp: rec.body_cp.clone(),
                        callee: rec.callee.clone(),
                    },
                );
            }
        }
        let ok = match self.mode {
            CheckMode::Strict => comp.answer == claimed,
            CheckMode::Lenient => comp.answer.leq(&claimed)?,
        };
        if !ok {
            return Err(Rejection::InvalidAnswer {
                key: key.clone(),
                claimed,
                computed: comp.answer,
            }
            .into());
        }
        Ok(())
    }
}

/// Checks `cert` against `program` for the given query entries. Accepts by
/// returning the verified tables; rejects with the first failure found in
/// depth-first demand order.
pub fn check(
    program: &Program,
    cert: &AnswerTable,
    queries: &BTreeSet<EntryKey>,
    mode: CheckMode,
) -> Result<CheckReport, CheckError> {
    let mut dfs = Dfs {
        program,
        cert,
        mode,
        in_progress: BTreeSet::new(),
        checked: BTreeSet::new(),
        dat: Dat::new(),
        stats: CheckStats::default(),
    };
    for q in queries {
        if !dfs.checked.contains(q) {
            dfs.check_key(q)?;
        }
    }
    let at: AnswerTable = cert
        .iter()
        .filter(|(k, _)| dfs.checked.contains(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let unused: Vec<EntryKey> =
        cert.keys().filter(|k| !dfs.checked.contains(*k)).cloned().collect();
    Ok(CheckReport { at, dat: dfs.dat, unused, stats: dfs.stats })
}

/// Re-evaluates a single entry against fixed claims, returning the
/// recomputed answer and the arcs of the traversals. This is the building
/// block for incremental rechecking, where the claim table mixes persisted
/// entries with incoming updated ones.
pub struct EntryCheck {
    pub computed: DefValue,
    /// `(rule, record)` for every body call traversed.
    pub records: Vec<(crate::lprog::RuleId, crate::engine::TraversalRecord)>,
    pub rule_count: usize,
}

pub fn check_entry(
    program: &Program,
    key: &EntryKey,
    claims: &AnswerTable,
) -> Result<EntryCheck, TableLookupError> {
    let mut src = TableSource { table: claims };
    let comp = compute_entry(program, key, &mut src)?;
    let rule_count = comp.traversals.len();
    let mut records = Vec::new();
    for (rule_id, tr) in comp.traversals {
        for rec in tr.records {
            records.push((rule_id.clone(), rec));
        }
    }
    Ok(EntryCheck { computed: comp.answer, records, rule_count })
}
