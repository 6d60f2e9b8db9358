//! Fixpoint certificates for constraint logic programs.
//!
//! The pipeline: a producer analyses a normalized logic program over the
//! groundness domain and ships the fixpoint (an answer table) as a
//! certificate.  A consumer re-traverses the program once, resolving every
//! call from the claimed answers, and accepts only if the claims reproduce
//! themselves.  Program updates travel as rule deltas together with an
//! incremental certificate carrying just the entries whose answers changed;
//! the consumer revalidates only the affected part of its persisted tables.
//!
//! Modules follow the data flow: [`lprog`] (programs), [`defdom`] (abstract
//! values), [`engine`] (fixpoint analysis), [`certify`]/[`checker`] (full
//! certificates), [`update`]/[`inccert`]/[`inccheck`] (deltas and
//! incremental checking), [`store`] (on-disk state).

pub mod lprog;
pub mod defdom;
pub mod engine;
pub mod certify;
pub mod checker;
pub mod update;
pub mod inccert;
pub mod inccheck;
pub mod store;

pub use certify::{certify, vc_check, CertifyOutput, SafetyPolicy, TrustReport};
pub use checker::{check, CheckError, CheckMode, CheckReport, Rejection};
pub use defdom::{DefValue, DomainError, Scope};
pub use engine::{analyze, AnalysisResult, AnswerTable, CallPattern, Dat, DependencyArc, EntryKey};
pub use inccert::{cert_diff, ext_certify, ext_certify_from, reuse_certify, IncCertifyOutput};
pub use inccheck::{inc_check, remove_unreachable, ConsumerState, IncCheckOutcome, IncStats};
pub use lprog::{parse_program, Atom, Literal, Program, Rule, RuleId, Term};
pub use update::{classify, diff, patch, Update, UpdateClass};
