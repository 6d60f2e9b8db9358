//! Producer/consumer command line for groundness certificates.
//!
//! Producer side: `certify` analyzes a program and persists the certified
//! state; `diff` turns two program versions into a structured update;
//! `inc-certify` certifies an update against the persisted state and emits
//! a package holding the update plus the incremental certificate.
//!
//! Consumer side: `check` validates a full certificate; `inc-check`
//! validates a package against the persisted state and commits the result;
//! `trust` compares certified answers against a safety policy.
//!
//! Exit codes: 0 success/trusted; 1 certificate or policy rejection
//! (including patch conflicts); 2 usage or input parse errors; 3 state
//! store problems (corrupt, locked, I/O). Lines starting with `#` are
//! counters and timings (enabled by `--stats`) and are not part of the
//! stable output.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use acc_core::checker::{check, CheckError, CheckMode};
use acc_core::engine::EntryKey;
use acc_core::inccert::{ext_certify_from, reuse_certify, IncCertifyError};
use acc_core::inccheck::{inc_check, ConsumerState, IncCheckError};
use acc_core::lprog::{parse_program, Program};
use acc_core::store::{
    self, load_package, load_state, lock_state, parse_answers, parse_call_pattern, parse_policy,
    parse_update, save_package, save_state, serialize_answers, StoreError,
};
use acc_core::update::{classify, diff};
use acc_core::certify::{certify, vc_check};

#[derive(Parser)]
#[command(name = "acc", version, about = "Certificates for groundness analyses of logic programs")]
struct Cli {
    /// Print `#`-prefixed counter and timing lines.
    #[arg(long, global = true)]
    stats: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analyze a program and persist the certified state.
    Certify {
        /// Program file.
        prog: PathBuf,
        /// Root call pattern, e.g. 'rev(X,Y):true' (repeatable).
        #[arg(long = "query", required = true, value_name = "CALLPATTERN")]
        queries: Vec<String>,
        /// State directory to write.
        #[arg(long, value_name = "DIR")]
        state: PathBuf,
    },
    /// Write the structured update that turns one program into another.
    Diff {
        /// The current program version.
        old: PathBuf,
        /// The updated program version.
        new: PathBuf,
        /// Update file to write.
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Certify an update against the persisted state and emit a package.
    IncCertify {
        /// Producer state directory (updated in place on success).
        #[arg(long, value_name = "DIR")]
        state: PathBuf,
        /// Update file.
        update: PathBuf,
        /// Package directory to write (update + incremental certificate).
        #[arg(short, long, value_name = "DIR")]
        output: PathBuf,
        /// Keep the previous certificate (sound for pure deletions only;
        /// consumers must then check leniently).
        #[arg(long)]
        reuse: bool,
    },
    /// Check a full certificate against a program.
    Check {
        /// Program file.
        prog: PathBuf,
        /// Certificate file.
        #[arg(long, value_name = "FILE")]
        cert: PathBuf,
        /// Root call pattern, e.g. 'rev(X,Y):true' (repeatable).
        #[arg(long = "query", required = true, value_name = "CALLPATTERN")]
        queries: Vec<String>,
        /// Require recomputed answers to equal the claims (default).
        #[arg(long, conflicts_with = "lenient")]
        strict: bool,
        /// Accept claims that over-approximate the recomputed answers.
        #[arg(long)]
        lenient: bool,
        /// Persist the verified tables as a consumer state directory.
        #[arg(long, value_name = "DIR")]
        state: Option<PathBuf>,
    },
    /// Check an update package against the persisted state and commit it.
    IncCheck {
        /// Consumer state directory (committed on success).
        #[arg(long, value_name = "DIR")]
        state: PathBuf,
        /// Package directory written by inc-certify.
        pkg: PathBuf,
    },
    /// Compare the certified answers against a safety policy.
    Trust {
        /// State directory holding the verified answers.
        #[arg(long, value_name = "DIR")]
        state: PathBuf,
        /// Policy file: lines '<atom> : <formula> => <formula>'.
        #[arg(long, value_name = "FILE")]
        policy: PathBuf,
    },
}

/// A command failure: exit code plus the diagnostic for standard error.
struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl ToString) -> Failure {
    Failure { code, msg: msg.to_string() }
}

/// Input problems (unreadable/unparsable inputs, bad call patterns).
fn input_err(msg: impl ToString) -> Failure {
    fail(2, msg)
}

/// State-store problems are distinguished from plain input problems.
fn store_err(e: StoreError) -> Failure {
    fail(3, e)
}

fn check_err(e: CheckError) -> Failure {
    match e {
        CheckError::Rejected(_) => fail(1, e),
        CheckError::Domain(_) => fail(2, e),
    }
}

fn inc_check_err(e: IncCheckError) -> Failure {
    match e {
        IncCheckError::Rejected(_) | IncCheckError::Patch(_) => fail(1, e),
        IncCheckError::Domain(_) => fail(2, e),
    }
}

fn inc_certify_err(e: IncCertifyError) -> Failure {
    match e {
        IncCertifyError::Patch(_) | IncCertifyError::ReuseNotDeletion { .. } => fail(1, e),
        IncCertifyError::Domain(_) => fail(2, e),
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    parse_program(&read_input(path)?)
        .map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn parse_queries(texts: &[String]) -> Result<BTreeSet<EntryKey>, Failure> {
    texts
        .iter()
        .map(|t| parse_call_pattern(t).map_err(|e| input_err(format!("query `{t}`: {e}"))))
        .collect()
}

fn entries(n: usize) -> String {
    format!("{n} {}", if n == 1 { "entry" } else { "entries" })
}

fn arcs(n: usize) -> String {
    format!("{n} {}", if n == 1 { "arc" } else { "arcs" })
}

struct StatSink {
    enabled: bool,
}

impl StatSink {
    fn line(&self, text: String) {
        if self.enabled {
            println!("# {text}");
        }
    }
}

fn run(cmd: &Cmd, stats: &StatSink) -> Result<(), Failure> {
    match cmd {
        Cmd::Certify { prog, queries, state } => {
            let program = load_program(prog)?;
            let queries = parse_queries(queries)?;
            let out = certify(&program, &queries).map_err(input_err)?;
            let _lock = lock_state(state).map_err(store_err)?;
            let new_state =
                ConsumerState { program, at: out.cert, dat: out.dat, queries };
            save_state(state, &new_state).map_err(store_err)?;
            println!(
                "certified {}, {}",
                entries(new_state.at.len()),
                arcs(new_state.dat.len())
            );
            stats.line(format!(
                "rule traversals: {}, answer updates: {}",
                out.stats.rule_traversals, out.stats.answer_updates
            ));
            Ok(())
        }
        Cmd::Diff { old, new, output } => {
            let p_old = load_program(old)?;
            let p_new = load_program(new)?;
            let u = diff(&p_new, &p_old);
            fs::write(output, store::serialize_update(&u))
                .map_err(|e| input_err(format!("{}: {e}", output.display())))?;
            println!(
                "update classified as {}: {} added, {} deleted",
                classify(&u),
                u.rules_added(),
                u.rules_deleted()
            );
            Ok(())
        }
        Cmd::IncCertify { state, update, output, reuse } => {
            let _lock = lock_state(state).map_err(store_err)?;
            let persisted = load_state(state).map_err(store_err)?;
            let u = parse_update(&read_input(update)?)
                .map_err(|e| input_err(format!("{}: {e}", update.display())))?;
            let out = if *reuse {
                reuse_certify(&persisted.program, &persisted.at, &persisted.dat, &u)
            } else {
                ext_certify_from(&persisted.program, &persisted.at, &u, &persisted.queries)
            }
            .map_err(inc_certify_err)?;
            save_package(output, &u, &out.inc).map_err(store_err)?;
            let new_state = ConsumerState {
                program: out.program,
                at: out.ext,
                dat: out.dat,
                queries: persisted.queries,
            };
            save_state(state, &new_state).map_err(store_err)?;
            println!("package written: {} changed", entries(out.inc.len()));
            let inc_bytes = serialize_answers(&out.inc).len();
            let full_bytes = serialize_answers(&new_state.at).len();
            stats.line(format!(
                "incremental certificate: {}, {inc_bytes} bytes",
                entries(out.inc.len())
            ));
            stats.line(format!(
                "full certificate: {}, {full_bytes} bytes",
                entries(new_state.at.len())
            ));
            stats.line(format!("rule traversals: {}", out.stats.rule_traversals));
            Ok(())
        }
        Cmd::Check { prog, cert, queries, strict: _, lenient, state } => {
            let program = load_program(prog)?;
            let cert_table = parse_answers(&read_input(cert)?)
                .map_err(|e| input_err(format!("{}: {e}", cert.display())))?;
            let queries = parse_queries(queries)?;
            let mode = if *lenient { CheckMode::Lenient } else { CheckMode::Strict };
            let report = check(&program, &cert_table, &queries, mode).map_err(check_err)?;
            for key in &report.unused {
                eprintln!("warning: certificate entry {key} was never demanded");
            }
            println!(
                "certificate accepted: {}, {}",
                entries(report.at.len()),
                arcs(report.dat.len())
            );
            if let Some(dir) = state {
                let _lock = lock_state(dir).map_err(store_err)?;
                let new_state =
                    ConsumerState { program, at: report.at, dat: report.dat, queries };
                save_state(dir, &new_state).map_err(store_err)?;
            }
            stats.line(format!(
                "entries checked: {}, rule traversals: {}",
                report.stats.entries_checked, report.stats.rule_traversals
            ));
            Ok(())
        }
        Cmd::IncCheck { state, pkg } => {
            let _lock = lock_state(state).map_err(store_err)?;
            let persisted = load_state(state).map_err(store_err)?;
            let (u, inc) = load_package(pkg).map_err(|e| match e {
                StoreError::Corrupt { reason } => input_err(format!("package: {reason}")),
                other => store_err(other),
            })?;
            let outcome = inc_check(&persisted, &u, &inc).map_err(inc_check_err)?;
            save_state(state, &outcome.state).map_err(store_err)?;
            println!(
                "{} changed, {} rechecked",
                entries(outcome.stats.entries_changed),
                entries(outcome.stats.entries_rechecked)
            );
            println!(
                "final state: {}, {}",
                entries(outcome.state.at.len()),
                arcs(outcome.state.dat.len())
            );
            stats.line(format!("rule traversals: {}", outcome.stats.rule_traversals));
            Ok(())
        }
        Cmd::Trust { state, policy } => {
            let persisted = load_state(state).map_err(store_err)?;
            let policy = parse_policy(&read_input(policy)?)
                .map_err(|e| input_err(format!("{}: {e}", policy.display())))?;
            let report = vc_check(&persisted.at, &policy).map_err(input_err)?;
            for line in &report.lines {
                println!("{line}");
            }
            if report.trusted() {
                println!("trusted");
                Ok(())
            } else {
                println!("untrusted");
                let unmet = report
                    .lines
                    .iter()
                    .filter(|l| l.verdict != acc_core::certify::TrustVerdict::Trusted)
                    .count();
                Err(fail(1, format!("policy not satisfied: {unmet} requirement(s) unmet")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let stats = StatSink { enabled: cli.stats };
    let result = run(&cli.cmd, &stats);
    stats.line(format!("elapsed: {:?}", started.elapsed()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
