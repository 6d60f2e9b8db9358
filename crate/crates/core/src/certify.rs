//! Producer-side certificate generation and policy trust checks.
//!
//! A certificate is the answer table of a finished analysis: for every
//! call pattern the queries demand, the groundness value the program
//! guarantees on success. [`certify`] produces it (together with the
//! dependency arcs a producer persists for later incremental runs), and
//! [`vc_check`] compares a certificate against a safety policy.

use std::collections::BTreeSet;
use std::fmt;

use crate::defdom::{DefValue, DomainError};
use crate::engine::{analyze, AnswerTable, Dat, EngineStats, EntryKey};
use crate::lprog::Program;

/// A generated certificate plus the producer-side bookkeeping.
#[derive(Debug, Clone)]
pub struct CertifyOutput {
    /// Answer per demanded call pattern — the certificate itself.
    pub cert: AnswerTable,
    /// Dependency arcs; not shipped to consumers, but kept by the producer
    /// so later updates can be certified incrementally.
    pub dat: Dat,
    pub stats: EngineStats,
}

/// Runs the analysis to a fixpoint and packages the result as a
/// certificate. The certificate contains exactly the entries reachable
/// from `queries`.
pub fn certify(
    program: &Program,
    queries: &BTreeSet<EntryKey>,
) -> Result<CertifyOutput, DomainError> {
    let r = analyze(program, queries)?;
    Ok(CertifyOutput { cert: r.at, dat: r.dat, stats: r.stats })
}

/// One policy requirement: the named call pattern must be certified at
/// least as precisely as `required`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyLine {
    pub key: EntryKey,
    pub required: DefValue,
}

/// A safety policy: the groundness guarantees a consumer insists on
/// before trusting the code.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SafetyPolicy {
    pub lines: Vec<PolicyLine>,
}

/// How one requirement fared against the certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrustVerdict {
    /// The certified answer implies the requirement.
    Trusted,
    /// The certificate covers the call pattern but guarantees less than
    /// the policy demands.
    TooWeak { actual: DefValue },
    /// The certificate has no entry for the call pattern at all.
    NotCovered,
}

/// A requirement together with its verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustLine {
    pub key: EntryKey,
    pub required: DefValue,
    pub verdict: TrustVerdict,
}

/// Verdicts for every policy line, in policy order.
#[derive(Debug, Clone, Default)]
pub struct TrustReport {
    pub lines: Vec<TrustLine>,
}

impl TrustReport {
    /// True when every requirement is met.
    pub fn trusted(&self) -> bool {
        self.lines.iter().all(|l| l.verdict == TrustVerdict::Trusted)
    }
}

impl fmt::Display for TrustLine {
    /// Mirrors the policy file line (`<atom> : <cp> => <required>`) with
    /// the verdict appended.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}: ", self.key, self.required)?;
        match &self.verdict {
            TrustVerdict::Trusted => write!(f, "trusted"),
            TrustVerdict::TooWeak { actual } => {
                write!(f, "too weak (certified: {actual})")
            }
            TrustVerdict::NotCovered => write!(f, "not covered"),
        }
    }
}

/// Checks the verification condition: the certificate entry for each
/// required call pattern must be at or below the required value in the
/// domain order. Requirements for call patterns the certificate does not
/// cover are reported as not covered and leave the program untrusted.
pub fn vc_check(cert: &AnswerTable, policy: &SafetyPolicy) -> Result<TrustReport, DomainError> {
    let mut lines = Vec::with_capacity(policy.lines.len());
    for req in &policy.lines {
        let verdict = match cert.get(&req.key) {
            None => TrustVerdict::NotCovered,
            Some(actual) => {
                if actual.leq(&req.required)? {
                    TrustVerdict::Trusted
                } else {
                    TrustVerdict::TooWeak { actual: actual.clone() }
                }
            }
        };
        lines.push(TrustLine { key: req.key.clone(), required: req.required.clone(), verdict });
    }
    Ok(TrustReport { lines })
}
