//! Producer-side incremental certification.
//!
//! When a certified program is updated, the producer does not ship a whole
//! new certificate: it computes the extended certificate for the patched
//! program and ships only the entries that differ from the previous one
//! (the incremental certificate). Consumers overlay those entries on their
//! persisted tables and recheck just the affected part.

use std::collections::BTreeSet;

use crate::defdom::DomainError;
use crate::engine::{analyze, AnswerTable, Dat, EngineStats, EntryKey};
use crate::lprog::Program;
use crate::update::{classify, patch, PatchConflict, Update, UpdateClass};

/// Everything the producer derives from an update.
#[derive(Debug, Clone)]
pub struct IncCertifyOutput {
    /// Full certificate of the patched program. Covers every entry of the
    /// previous certificate (recomputed) plus whatever the update newly
    /// demands, so consumers can reconstruct it from their old tables.
    pub ext: AnswerTable,
    /// The shipped part: entries of `ext` that are new or changed relative
    /// to the base certificate.
    pub inc: AnswerTable,
    /// Dependency arcs for the producer's own persisted state.
    pub dat: Dat,
    /// The patched program.
    pub program: Program,
    pub stats: EngineStats,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IncCertifyError {
    #[error(transparent)]
    Patch(#[from] PatchConflict),
    #[error(transparent)]
    Domain(#[from] DomainError),
    /// Reusing the previous certificate unchanged is only sound for pure
    /// deletions, where the old fixpoint stays a safe over-approximation.
    #[error("cannot reuse the certificate for an update classified as {class}")]
    ReuseNotDeletion { class: UpdateClass },
}

/// Entries of `ext` that are absent from `base` or carry a different
/// answer. Values compare by model set, so renamed-but-equal answers do
/// not count as changes.
pub fn cert_diff(ext: &AnswerTable, base: &AnswerTable) -> AnswerTable {
    ext.iter()
        .filter(|(k, v)| base.get(*k) != Some(*v))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Certifies the patched program against a base certificate the caller
/// already holds (typically the producer's persisted answer table).
///
/// The analysis runs from the consumer queries *and* every base entry, so
/// `ext` assigns a (possibly changed) answer to each previously certified
/// call pattern even when the update made it unreachable from the queries
/// alone. That is exactly the coverage a consumer needs: it rechecks its
/// existing entries against the patched program, and each one must find
/// its new answer in `base ⊕ inc`.
pub fn ext_certify_from(
    p_old: &Program,
    base: &AnswerTable,
    u: &Update,
    queries: &BTreeSet<EntryKey>,
) -> Result<IncCertifyOutput, IncCertifyError> {
    let program = patch(p_old, u)?;
    let mut roots = queries.clone();
    roots.extend(base.keys().cloned());
    let r = analyze(&program, &roots)?;
    let inc = cert_diff(&r.at, base);
    Ok(IncCertifyOutput { ext: r.at, inc, dat: r.dat, program, stats: r.stats })
}

/// Certifies an update from scratch: analyzes the old program to obtain
/// the base certificate, then proceeds as [`ext_certify_from`].
pub fn ext_certify(
    p_old: &Program,
    u: &Update,
    queries: &BTreeSet<EntryKey>,
) -> Result<IncCertifyOutput, IncCertifyError> {
    let base = analyze(p_old, queries)?.at;
    ext_certify_from(p_old, &base, u, queries)
}

/// Fast path for pure deletions: the old certificate is reused as-is and
/// nothing is shipped. Sound because deleting rules only shrinks answers,
/// so every old answer stays a valid over-approximation — consumers must
/// check leniently. The answers may now be less precise than a fresh
/// analysis would give, and the kept dependency arcs may cite rule
/// ordinals the patched program no longer has; both are tolerated by
/// design, and a later [`ext_certify_from`] run tightens them again.
pub fn reuse_certify(
    p_old: &Program,
    at: &AnswerTable,
    dat: &Dat,
    u: &Update,
) -> Result<IncCertifyOutput, IncCertifyError> {
    let class = classify(u);
    if !matches!(class, UpdateClass::Deletion | UpdateClass::Empty) {
        return Err(IncCertifyError::ReuseNotDeletion { class });
    }
    let program = patch(p_old, u)?;
    Ok(IncCertifyOutput {
        ext: at.clone(),
        inc: AnswerTable::new(),
        dat: dat.clone(),
        program,
        stats: EngineStats::default(),
    })
}
