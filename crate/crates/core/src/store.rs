//! On-disk formats: state directories, update packages, and policies.
//!
//! Everything is line-oriented text with a canonical serialization —
//! writing the same state twice produces identical bytes, so states can be
//! compared and versioned with ordinary file tools. A state directory
//! holds the verified program (`program.pl`), the answer table
//! (`answers.cert`), the dependency arcs (`deps.dat`), and the root
//! queries (`queries.q`); an update package holds the structured update
//! (`update.u`) and the incremental certificate (`inc.cert`).

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::certify::{PolicyLine, SafetyPolicy};
use crate::defdom::{parse_def_value, parse_formula};
use crate::engine::{AnswerTable, Dat, DependencyArc, EntryKey};
use crate::inccheck::ConsumerState;
use crate::lprog::{parse_atom, parse_program, parse_rule, RuleId};
use crate::update::{PredUpdate, Update};

pub const PROGRAM_FILE: &str = "program.pl";
pub const ANSWERS_FILE: &str = "answers.cert";
pub const DEPS_FILE: &str = "deps.dat";
pub const QUERIES_FILE: &str = "queries.q";
pub const LOCK_FILE: &str = "lock";
pub const UPDATE_FILE: &str = "update.u";
pub const INC_CERT_FILE: &str = "inc.cert";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("corrupt state: {reason}")]
    Corrupt { reason: String },
    #[error("state is locked (lock file {path} exists)")]
    Locked { path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn corrupt(reason: impl Into<String>) -> StoreError {
    StoreError::Corrupt { reason: reason.into() }
}

fn in_file(file: &str, e: StoreError) -> StoreError {
    match e {
        StoreError::Corrupt { reason } => corrupt(format!("{file}: {reason}")),
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Entry keys and answer tables
// ---------------------------------------------------------------------------

/// Prints an entry as `<atom>:<value>` with the atom over positional names.
fn entry_text(key: &EntryKey) -> String {
    format!("{}:{}", key.atom(), key.cp)
}

/// Parses `<atom>:<value>`, value in the `bot`/`true`/`models(...)` form
/// over the atom's own argument names.
fn parse_entry(text: &str) -> Result<EntryKey, StoreError> {
    let (atom_text, value_text) = text
        .split_once(':')
        .ok_or_else(|| corrupt(format!("expected `<atom>:<value>`, found `{text}`")))?;
    let atom = parse_atom(atom_text.trim()).map_err(|e| corrupt(e.to_string()))?;
    let cp = parse_def_value(value_text.trim(), &atom.args)
        .map_err(|e| corrupt(e.to_string()))?;
    EntryKey::from_call(&atom, &cp).map_err(|e| corrupt(e.to_string()))
}

/// `<atom> : <cp> => <answer>` per line, in key order.
pub fn serialize_answers(at: &AnswerTable) -> String {
    let mut out = String::new();
    for (key, answer) in at {
        out.push_str(&format!("{} : {} => {}\n", key.atom(), key.cp, answer));
    }
    out
}

pub fn parse_answers(text: &str) -> Result<AnswerTable, StoreError> {
    let mut at = AnswerTable::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| corrupt(format!("line {}: {msg}", i + 1));
        let (entry_part, answer_part) = line
            .split_once(" => ")
            .ok_or_else(|| err(format!("expected `<atom> : <cp> => <answer>`, found `{line}`")))?;
        let key = parse_entry(entry_part).map_err(|e| in_file(&format!("line {}", i + 1), e))?;
        let answer = parse_def_value(answer_part.trim(), &positional(&key))
            .map_err(|e| err(e.to_string()))?;
        if at.insert(key.clone(), answer).is_some() {
            return Err(err(format!("duplicate entry {key}")));
        }
    }
    Ok(at)
}

fn positional(key: &EntryKey) -> Vec<String> {
    crate::engine::positional_scope(key.arity)
}

/// `<atom> : <cp>` per line, in key order.
pub fn serialize_queries(queries: &BTreeSet<EntryKey>) -> String {
    let mut out = String::new();
    for key in queries {
        out.push_str(&format!("{} : {}\n", key.atom(), key.cp));
    }
    out
}

pub fn parse_queries(text: &str) -> Result<BTreeSet<EntryKey>, StoreError> {
    let mut queries = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let key = parse_entry(line).map_err(|e| in_file(&format!("line {}", i + 1), e))?;
        if !queries.insert(key.clone()) {
            return Err(corrupt(format!("line {}: duplicate query {key}", i + 1)));
        }
    }
    Ok(queries)
}

// ---------------------------------------------------------------------------
// Dependency arcs
// ---------------------------------------------------------------------------

/// `<head-atom>:<head-cp> => <pred>/<arity>/<ord>#<pos> <body-atom>:<body-cp>`
/// per arc, in arc-key order. The body call is written as it appears in the
/// rule, with its call pattern over the call's own argument variables.
pub fn serialize_deps(dat: &Dat) -> String {
    let mut out = String::new();
    for ((head, rule, pos), arc) in dat {
        out.push_str(&format!(
            "{} => {rule}#{pos} {}:{}\n",
            entry_text(head),
            arc.body_atom,
            arc.body_cp
        ));
    }
    out
}

fn parse_rule_ref(text: &str) -> Result<(RuleId, usize), StoreError> {
    let (id_text, pos_text) = text
        .split_once('#')
        .ok_or_else(|| corrupt(format!("expected `<rule>#<pos>`, found `{text}`")))?;
    let parts: Vec<&str> = id_text.split('/').collect();
    let [pred, arity, ord] = parts.as_slice() else {
        return Err(corrupt(format!("expected `<pred>/<arity>/<ord>`, found `{id_text}`")));
    };
    let arity: usize =
        arity.parse().map_err(|_| corrupt(format!("bad arity in rule id `{id_text}`")))?;
    let ord: usize =
        ord.parse().map_err(|_| corrupt(format!("bad ordinal in rule id `{id_text}`")))?;
    let pos: usize =
        pos_text.parse().map_err(|_| corrupt(format!("bad body position `{pos_text}`")))?;
    Ok((RuleId { pred: pred.to_string(), arity, ord }, pos))
}

pub fn parse_deps(text: &str) -> Result<Dat, StoreError> {
    let mut dat = Dat::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| corrupt(format!("line {}: {msg}", i + 1));
        let wrap = |e: StoreError| in_file(&format!("line {}", i + 1), e);
        let (head_part, rest) = line
            .split_once(" => ")
            .ok_or_else(|| err(format!("expected `<entry> => <rule>#<pos> <call>`: `{line}`")))?;
        let head = parse_entry(head_part).map_err(wrap)?;
        let (ref_part, call_part) = rest
            .trim()
            .split_once(' ')
            .ok_or_else(|| err(format!("expected `<rule>#<pos> <call>`, found `{rest}`")))?;
        let (rule, pos) = parse_rule_ref(ref_part).map_err(wrap)?;
        if rule.pred != head.pred || rule.arity != head.arity {
            return Err(err(format!("arc rule {rule} does not belong to {}", head.atom())));
        }
        let (atom_text, cp_text) = call_part
            .trim()
            .split_once(':')
            .ok_or_else(|| err(format!("expected `<atom>:<value>`, found `{call_part}`")))?;
        let body_atom = parse_atom(atom_text.trim()).map_err(|e| err(e.to_string()))?;
        let body_cp = parse_def_value(cp_text.trim(), &body_atom.args)
            .map_err(|e| err(e.to_string()))?;
        let callee =
            EntryKey::from_call(&body_atom, &body_cp).map_err(|e| err(e.to_string()))?;
        let arc_key = (head, rule, pos);
        if dat.insert(arc_key.clone(), DependencyArc { body_atom, body_cp, callee }).is_some() {
            return Err(err("duplicate dependency arc".to_string()));
        }
    }
    Ok(dat)
}

// ---------------------------------------------------------------------------
// Updates
// ---------------------------------------------------------------------------

/// Blocks `@ <pred>/<arity>` with `- <rule>.` lines (deletions) followed by
/// `+ <rule>.` lines (additions).
pub fn serialize_update(u: &Update) -> String {
    let mut out = String::new();
    for ((pred, arity), tuple) in &u.tuples {
        out.push_str(&format!("@ {pred}/{arity}\n"));
        for r in &tuple.del {
            out.push_str(&format!("- {r}\n"));
        }
        for r in &tuple.add {
            out.push_str(&format!("+ {r}\n"));
        }
    }
    out
}

pub fn parse_update(text: &str) -> Result<Update, StoreError> {
    let mut u = Update::default();
    let mut current: Option<(String, usize)> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| corrupt(format!("line {}: {msg}", i + 1));
        if let Some(head) = line.strip_prefix("@ ") {
            let (pred, arity_text) = head
                .trim()
                .split_once('/')
                .ok_or_else(|| err(format!("expected `@ <pred>/<arity>`, found `{line}`")))?;
            let arity: usize = arity_text
                .parse()
                .map_err(|_| err(format!("bad arity `{arity_text}`")))?;
            current = Some((pred.to_string(), arity));
            continue;
        }
        let (sign, rule_text) = match line.split_at(1) {
            ("+", rest) => (true, rest),
            ("-", rest) => (false, rest),
            _ => return Err(err(format!("expected `@`, `+` or `-` line, found `{line}`"))),
        };
        let Some(key) = current.clone() else {
            return Err(err("rule line before any `@ <pred>/<arity>` header".to_string()));
        };
        let rule = parse_rule(rule_text.trim()).map_err(|e| err(e.to_string()))?;
        if rule.head.pred != key.0 || rule.head.arity() != key.1 {
            return Err(err(format!(
                "rule for {}/{} inside the block of {}/{}",
                rule.head.pred,
                rule.head.arity(),
                key.0,
                key.1
            )));
        }
        let tuple = u.tuples.entry(key).or_insert_with(PredUpdate::default);
        if sign {
            tuple.add.push(rule);
        } else {
            tuple.del.push(rule);
        }
    }
    u.tuples.retain(|_, t| !t.add.is_empty() || !t.del.is_empty());
    Ok(u)
}

// ---------------------------------------------------------------------------
// Policies and call patterns
// ---------------------------------------------------------------------------

/// One required entry per line: `<atom> : <cp-formula> => <required-formula>`
/// with both formulas over the atom's argument names.
pub fn parse_policy(text: &str) -> Result<SafetyPolicy, StoreError> {
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let err = |msg: String| corrupt(format!("line {}: {msg}", i + 1));
        let (entry_part, required_part) = line
            .split_once(" => ")
            .ok_or_else(|| err(format!("expected `<atom> : <formula> => <formula>`: `{line}`")))?;
        let (atom_text, cp_text) = entry_part
            .split_once(':')
            .ok_or_else(|| err(format!("expected `<atom> : <formula>`, found `{entry_part}`")))?;
        let atom = parse_atom(atom_text.trim()).map_err(|e| err(e.to_string()))?;
        let cp = parse_formula(cp_text.trim())
            .and_then(|f| f.to_def(&atom.args))
            .map_err(|e| err(e.to_string()))?;
        let required = parse_formula(required_part.trim())
            .and_then(|f| f.to_def(&atom.args))
            .map_err(|e| err(e.to_string()))?;
        let key = EntryKey::from_call(&atom, &cp).map_err(|e| err(e.to_string()))?;
        // Relabel the requirement into the key's positional scope the same
        // way the call pattern was.
        let required = EntryKey::from_call(&atom, &required).map_err(|e| err(e.to_string()))?.cp;
        lines.push(PolicyLine { key, required });
    }
    Ok(SafetyPolicy { lines })
}

/// A query as written on a command line: `<atom>:<formula>`, e.g.
/// `rev(X,Y):true` or `app(X,Y,Z):X & Y`.
pub fn parse_call_pattern(text: &str) -> Result<EntryKey, StoreError> {
    let (atom_text, formula_text) = text
        .split_once(':')
        .ok_or_else(|| corrupt(format!("expected `<atom>:<formula>`, found `{text}`")))?;
    let atom = parse_atom(atom_text.trim()).map_err(|e| corrupt(e.to_string()))?;
    let cp = parse_formula(formula_text.trim())
        .and_then(|f| f.to_def(&atom.args))
        .map_err(|e| corrupt(e.to_string()))?;
    EntryKey::from_call(&atom, &cp).map_err(|e| corrupt(e.to_string()))
}

// ---------------------------------------------------------------------------
// State directories and packages
// ---------------------------------------------------------------------------

fn read(path: &Path) -> Result<String, StoreError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            Err(corrupt(format!("missing file {}", path.display())))
        }
        Err(e) => Err(StoreError::Io { path: path.to_path_buf(), source: e }),
    }
}

fn write_all_atomically(files: &[(PathBuf, String)]) -> Result<(), StoreError> {
    let tmp_of = |p: &PathBuf| p.with_extension(match p.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".to_string(),
    });
    let mut written: Vec<PathBuf> = Vec::new();
    for (path, content) in files {
        let tmp = tmp_of(path);
        if let Err(e) = fs::write(&tmp, content) {
            for t in &written {
                let _ = fs::remove_file(t);
            }
            return Err(StoreError::Io { path: tmp, source: e });
        }
        written.push(tmp);
    }
    for (path, _) in files {
        let tmp = tmp_of(path);
        if let Err(e) = fs::rename(&tmp, path) {
            return Err(StoreError::Io { path: path.to_path_buf(), source: e });
        }
    }
    Ok(())
}

/// Writes the four state files. All content is serialized and written to
/// temporaries first; the originals are replaced only after every write
/// has succeeded, so a failed save leaves the previous state in place.
pub fn save_state(dir: &Path, state: &ConsumerState) -> Result<(), StoreError> {
    fs::create_dir_all(dir)
        .map_err(|e| StoreError::Io { path: dir.to_path_buf(), source: e })?;
    write_all_atomically(&[
        (dir.join(PROGRAM_FILE), state.program.to_string()),
        (dir.join(ANSWERS_FILE), serialize_answers(&state.at)),
        (dir.join(DEPS_FILE), serialize_deps(&state.dat)),
        (dir.join(QUERIES_FILE), serialize_queries(&state.queries)),
    ])
}

/// Reads and validates a state directory: the files must parse, every arc
/// endpoint must be a certified entry, and every query must be certified.
/// Arc rule ordinals are deliberately not checked against the program —
/// a state kept through a pure-deletion reuse may cite ordinals the
/// current program no longer has.
pub fn load_state(dir: &Path) -> Result<ConsumerState, StoreError> {
    let program = parse_program(&read(&dir.join(PROGRAM_FILE))?)
        .map_err(|e| corrupt(format!("{PROGRAM_FILE}: {e}")))?;
    let at = parse_answers(&read(&dir.join(ANSWERS_FILE))?)
        .map_err(|e| in_file(ANSWERS_FILE, e))?;
    let dat = parse_deps(&read(&dir.join(DEPS_FILE))?).map_err(|e| in_file(DEPS_FILE, e))?;
    let queries = parse_queries(&read(&dir.join(QUERIES_FILE))?)
        .map_err(|e| in_file(QUERIES_FILE, e))?;

    for ((head, _, _), arc) in &dat {
        if !at.contains_key(head) {
            return Err(corrupt(format!("{DEPS_FILE}: arc head {head} has no answer entry")));
        }
        if !at.contains_key(&arc.callee) {
            return Err(corrupt(format!(
                "{DEPS_FILE}: arc callee {} has no answer entry",
                arc.callee
            )));
        }
    }
    for q in &queries {
        if !at.contains_key(q) {
            return Err(corrupt(format!("{QUERIES_FILE}: query {q} has no answer entry")));
        }
    }
    Ok(ConsumerState { program, at, dat, queries })
}

/// Writes an update package: the structured update plus the incremental
/// certificate.
pub fn save_package(dir: &Path, u: &Update, inc: &AnswerTable) -> Result<(), StoreError> {
    fs::create_dir_all(dir)
        .map_err(|e| StoreError::Io { path: dir.to_path_buf(), source: e })?;
    write_all_atomically(&[
        (dir.join(UPDATE_FILE), serialize_update(u)),
        (dir.join(INC_CERT_FILE), serialize_answers(inc)),
    ])
}

pub fn load_package(dir: &Path) -> Result<(Update, AnswerTable), StoreError> {
    let u = parse_update(&read(&dir.join(UPDATE_FILE))?).map_err(|e| in_file(UPDATE_FILE, e))?;
    let inc = parse_answers(&read(&dir.join(INC_CERT_FILE))?)
        .map_err(|e| in_file(INC_CERT_FILE, e))?;
    Ok((u, inc))
}

/// Holds the advisory lock on a state directory; dropping it releases the
/// lock. Only one writer may hold it at a time.
#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Takes the advisory lock for `dir`, creating the directory if needed.
pub fn lock_state(dir: &Path) -> Result<LockGuard, StoreError> {
    fs::create_dir_all(dir)
        .map_err(|e| StoreError::Io { path: dir.to_path_buf(), source: e })?;
    let path = dir.join(LOCK_FILE);
    match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
        Ok(_) => Ok(LockGuard { path }),
        Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(StoreError::Locked { path }),
        Err(e) => Err(StoreError::Io { path, source: e }),
    }
}
