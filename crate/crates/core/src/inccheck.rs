//! Consumer-side incremental certificate checking.
//!
//! A consumer that already holds verified tables for a program does not
//! re-check everything when the program is updated. [`inc_check`] patches
//! the stored program, re-evaluates only the entries the update can have
//! affected — entries of updated predicates, entries with changed claims,
//! and (transitively) entries depending on changed ones — and prunes what
//! the update made unreachable. On success the returned state is verified
//! end to end, exactly as if the full certificate had been checked from
//! scratch against the patched program.

// Rejections carry both compared values for diagnostics; see `checker`.
#![allow(clippy::result_large_err)]

use std::collections::{BTreeSet, VecDeque};

use crate::checker::{check_entry, Rejection};
use crate::defdom::DomainError;
use crate::engine::{prune_to_roots, AnswerTable, Dat, DependencyArc, EntryKey, TableLookupError};
use crate::lprog::Program;
use crate::update::{classify, patch, PatchConflict, Update, UpdateClass};

/// A consumer's persisted view: the program it verified, the verified
/// answer and dependency tables, and the queries it cares about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsumerState {
    pub program: Program,
    pub at: AnswerTable,
    pub dat: Dat,
    pub queries: BTreeSet<EntryKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IncCheckError {
    #[error("incremental certificate rejected: {0}")]
    Rejected(#[from] Rejection),
    #[error(transparent)]
    Patch(#[from] PatchConflict),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Work counters for one incremental check; the point of the exercise is
/// that `entries_rechecked` stays proportional to the update, not to the
/// program.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IncStats {
    /// Entries whose claims the incremental certificate changed or added.
    pub entries_changed: usize,
    /// Entries actually re-evaluated.
    pub entries_rechecked: usize,
    pub rule_traversals: usize,
}

/// Outcome of an accepted incremental check.
#[derive(Debug, Clone)]
pub struct IncCheckOutcome {
    /// The new state to persist; the input state is never modified.
    pub state: ConsumerState,
    pub stats: IncStats,
}

/// Verifies an update against the persisted state, given the incremental
/// certificate `inc` (the changed/new claims shipped by the producer).
///
/// The claims under check are `state.at` overlaid with `inc`. Entries are
/// rechecked by re-evaluating them over the patched program:
/// every entry of an updated predicate, every entry `inc` touches, and,
/// once an entry with a changed answer is confirmed, every still-unchecked
/// entry depending on it through a recorded arc. Each recheck must
/// reproduce the claim exactly; a demanded entry with no claim anywhere is
/// rejected as missing. As the one exception, a pure deletion shipped with
/// an empty `inc` is checked leniently — deleting rules can only shrink
/// answers, so the old claims are kept as valid over-approximations even
/// where the re-evaluation now computes something smaller.
///
/// Accepted entries that the queries can no longer reach through the new
/// arcs are dropped before the state is returned.
pub fn inc_check(
    state: &ConsumerState,
    u: &Update,
    inc: &AnswerTable,
) -> Result<IncCheckOutcome, IncCheckError> {
    let program = patch(&state.program, u)?;
    // Deleting rules can only shrink answers, so an empty inc on a pure
    // deletion means "keep the old claims"; they remain safe bounds even
    // though they may no longer be exact.
    let deletion_lenient = inc.is_empty()
        && matches!(classify(u), UpdateClass::Deletion);

    let mut working = state.at.clone();
    working.extend(inc.iter().map(|(k, v)| (k.clone(), v.clone())));

    let mut seeds: BTreeSet<EntryKey> = state
        .at
        .keys()
        .filter(|k| u.tuples.contains_key(&(k.pred.clone(), k.arity)))
        .cloned()
        .collect();
    seeds.extend(inc.keys().cloned());

    let mut at_mem = state.at.clone();
    let mut dat_mem = state.dat.clone();
    let mut pending: VecDeque<EntryKey> = seeds.iter().cloned().collect();
    let mut seen = seeds;
    let mut stats = IncStats { entries_changed: inc.len(), ..IncStats::default() };

    while let Some(key) = pending.pop_front() {
        stats.entries_rechecked += 1;
        let ec = check_entry(&program, &key, &working).map_err(|e| match e {
            TableLookupError::Missing(k) => IncCheckError::Rejected(Rejection::MissingEntry { key: k }),
            TableLookupError::Domain(d) => IncCheckError::Domain(d),
        })?;
        stats.rule_traversals += ec.rule_count;

        let claimed = &working[&key];
        let ok = if deletion_lenient {
            ec.computed.leq(claimed)?
        } else {
            ec.computed == *claimed
        };
        if !ok {
            return Err(Rejection::InvalidAnswer {
                key,
                claimed: claimed.clone(),
                computed: ec.computed,
            }
            .into());
        }
        at_mem.insert(key.clone(), claimed.clone());

        // The re-evaluation's arcs supersede whatever this entry recorded
        // against the old program.
        dat_mem.retain(|(head, _, _), _| *head != key);
        for (rule, rec) in &ec.records {
            // A callee whose claim changed must itself be verified, even
            // if the old tables never mentioned it.
            if inc.contains_key(&rec.callee) && !seen.contains(&rec.callee) {
                seen.insert(rec.callee.clone());
                pending.push_back(rec.callee.clone());
            }
            dat_mem.insert(
                (key.clone(), rule.clone(), rec.pos),
                DependencyArc {
                    body_atom: rec.body_atom.clone(),
                    body_cp: rec.body_cp.clone(),
                    callee: rec.callee.clone(),
                },
            );
        }

        // A confirmed changed answer invalidates the recorded evaluations
        // of everything that consumed the old one.
        if inc.contains_key(&key) {
            let dependents: Vec<EntryKey> = dat_mem
                .iter()
                .filter(|(_, arc)| arc.callee == key)
                .map(|((head, _, _), _)| head.clone())
                .collect();
            for head in dependents {
                if at_mem.contains_key(&head) && !seen.contains(&head) {
                    seen.insert(head.clone());
                    pending.push_back(head);
                }
            }
        }
    }

    prune_to_roots(&mut at_mem, &mut dat_mem, &state.queries);
    Ok(IncCheckOutcome {
        state: ConsumerState {
            program,
            at: at_mem,
            dat: dat_mem,
            queries: state.queries.clone(),
        },
        stats,
    })
}

/// Drops every entry the roots cannot reach through the arcs, along with
/// the arcs of dropped entries, iterated to a fixpoint (removing an entry
/// can strand the entries only it referenced).
pub fn remove_unreachable(
    at: &AnswerTable,
    dat: &Dat,
    roots: &BTreeSet<EntryKey>,
) -> (AnswerTable, Dat) {
    let mut at = at.clone();
    let mut dat = dat.clone();
    prune_to_roots(&mut at, &mut dat, roots);
    (at, dat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defdom::{parse_def_value, DefValue, Scope};
    use crate::engine::{analyze, positional_scope, CallPattern};
    use crate::inccert::ext_certify_from;
    use crate::lprog::parse_program;
    use crate::update::diff;

    const P0: &str = "\
rev(X,Y) :- X = [], Y = [].
rev(X,Y) :- X = [U|V], rev(V,W), T = [U], app(W,T,Y).
app(X,Y,Z) :- X = [], Y = Z.
app(X,Y,Z) :- X = [U|V], Z = [U|W], app(V,Y,W).
";

    const P1: &str = "\
rev(X,Y) :- X = [], Y = [].
rev(X,Y) :- X = [U|V], rev(V,W), T = [U], app(W,T,Y).
app(X,Y,Z) :- X = [], Y = Z.
app(X,Y,Z) :- X = [U], Z = [U|Y].
app(X,Y,Z) :- X = [U,V], Z = [U,V|Y].
app(X,Y,Z) :- X = [U|V], Z = [U|W], app(V,Y,W).
";

    const P2: &str = "\
rev(X,Y) :- X = [], Y = [].
rev(X,Y) :- X = [U|V], rev(V,W), T = [U], app(W,T,Y).
app(X,Y,Z) :- X = [], Y = [], Z = [].
app(X,Y,Z) :- X = [a|V], Y = [a|U], Z = [a,a|W], app(V,U,W).
";

    fn scope(n: usize) -> Scope {
        positional_scope(n)
    }

    fn val(text: &str, n: usize) -> DefValue {
        parse_def_value(text, &scope(n)).unwrap()
    }

    fn key(pred: &str, n: usize, cp: &str) -> EntryKey {
        EntryKey::new(pred, n, val(cp, n)).unwrap()
    }

    fn key_rev_top() -> EntryKey {
        key("rev", 2, "true")
    }

    fn key_app_top() -> EntryKey {
        key("app", 3, "true")
    }

    fn key_app_first_ground() -> EntryKey {
        key("app", 3, "models([X];[X,Y];[X,Y,Z];[X,Z])")
    }

    fn initial_state(program_text: &str) -> ConsumerState {
        let program = parse_program(program_text).unwrap();
        let queries = BTreeSet::from([key_rev_top()]);
        let r = analyze(&program, &queries).unwrap();
        ConsumerState { program, at: r.at, dat: r.dat, queries }
    }

    /// Producer output and the resulting consumer outcome for old→new.
    fn producer_then_consumer(state: &ConsumerState, new_text: &str) -> IncCheckOutcome {
        let p_new = parse_program(new_text).unwrap();
        let u = diff(&p_new, &state.program);
        let out = ext_certify_from(&state.program, &state.at, &u, &state.queries).unwrap();
        inc_check(state, &u, &out.inc).unwrap()
    }

    #[test]
    fn added_rules_that_preserve_answers_recheck_one_predicate() {
        let state = initial_state(P0);
        let p1 = parse_program(P1).unwrap();
        let u = diff(&p1, &state.program);
        let outcome = inc_check(&state, &u, &AnswerTable::new()).unwrap();

        // Only app's entry is re-evaluated (its four rules in the patched
        // program); rev's rules are never touched.
        assert_eq!(outcome.stats.entries_changed, 0);
        assert_eq!(outcome.stats.entries_rechecked, 1);
        assert_eq!(outcome.stats.rule_traversals, 4);
        // The answers were preserved, so the tables come back unchanged.
        assert_eq!(outcome.state.at, state.at);
        assert_eq!(outcome.state.dat.len(), 3);
        assert_eq!(outcome.state.program.rules().len(), 6);
        // The input state is untouched.
        assert_eq!(state.program.rules().len(), 4);
    }

    #[test]
    fn changed_answers_propagate_to_dependents_and_prune_the_rest() {
        let state = initial_state(P0);
        let after_p1 = producer_then_consumer(&state, P1);
        let after_p2 = producer_then_consumer(&after_p1.state, P2);

        assert_eq!(after_p2.stats.entries_changed, 3);
        assert_eq!(after_p2.stats.entries_rechecked, 3);
        assert_eq!(after_p2.stats.rule_traversals, 6);

        // app:⊤ was rechecked but became unreachable from the queries once
        // rev's call pattern tightened, so it is pruned away.
        let mut want_at = AnswerTable::new();
        want_at.insert(key_rev_top(), val("models([X,Y])", 2));
        want_at.insert(key_app_first_ground(), val("models([X,Y,Z])", 3));
        assert_eq!(after_p2.state.at, want_at);

        let dat = &after_p2.state.dat;
        assert_eq!(dat.len(), 3);
        let rev2 = after_p2.state.program.rules()[1].id.clone();
        let napp2 = after_p2.state.program.rules()[3].id.clone();
        assert_eq!(dat[&(key_rev_top(), rev2.clone(), 2)].callee, key_rev_top());
        assert_eq!(
            dat[&(key_rev_top(), rev2.clone(), 4)].callee,
            key_app_first_ground()
        );
        assert_eq!(
            dat[&(key_rev_top(), rev2, 4)].body_cp,
            parse_def_value(
                "models([W];[W,T];[W,T,Y];[W,Y])",
                &["W".to_string(), "T".to_string(), "Y".to_string()],
            )
            .unwrap()
        );
        assert_eq!(
            dat[&(key_app_first_ground(), napp2, 4)].callee,
            key_app_first_ground()
        );
    }

    #[test]
    fn a_missing_new_call_pattern_is_rejected() {
        let state = initial_state(P0);
        let after_p1 = producer_then_consumer(&state, P1);
        let p2 = parse_program(P2).unwrap();
        let u = diff(&p2, &after_p1.state.program);
        let out =
            ext_certify_from(&after_p1.state.program, &after_p1.state.at, &u, &state.queries)
                .unwrap();
        let mut inc = out.inc.clone();
        inc.remove(&key_app_first_ground());

        let err = inc_check(&after_p1.state, &u, &inc).unwrap_err();
        match err {
            IncCheckError::Rejected(Rejection::MissingEntry { key }) => {
                assert_eq!(key, key_app_first_ground());
            }
            other => panic!("expected a missing-entry rejection, got {other:?}"),
        }
    }

    #[test]
    fn a_tampered_claim_is_rejected_at_the_claiming_entry() {
        let state = initial_state(P0);
        let after_p1 = producer_then_consumer(&state, P1);
        let p2 = parse_program(P2).unwrap();
        let u = diff(&p2, &after_p1.state.program);
        let out =
            ext_certify_from(&after_p1.state.program, &after_p1.state.at, &u, &state.queries)
                .unwrap();
        let mut inc = out.inc.clone();
        inc.insert(key_app_first_ground(), CallPattern::top(&scope(3)).unwrap());

        let err = inc_check(&after_p1.state, &u, &inc).unwrap_err();
        match err {
            IncCheckError::Rejected(Rejection::InvalidAnswer { key, computed, .. }) => {
                assert_eq!(key, key_app_first_ground());
                assert_eq!(computed, val("models([X];[X,Y];[X,Y,Z];[X,Z])", 3));
            }
            other => panic!("expected an invalid-answer rejection, got {other:?}"),
        }
    }

    #[test]
    fn tampering_a_doomed_entry_cannot_poison_the_persisted_state() {
        // app:⊤'s recursive rule echoes whatever the claim says through the
        // self-call, so any widened claim on it re-justifies itself — it is
        // a genuine alternative fixpoint, and the checker accepts it. The
        // update makes app:⊤ unreachable from the queries, though, so the
        // pruned final state is identical to the honest one.
        let state = initial_state(P0);
        let after_p1 = producer_then_consumer(&state, P1);
        let p2 = parse_program(P2).unwrap();
        let u = diff(&p2, &after_p1.state.program);
        let out =
            ext_certify_from(&after_p1.state.program, &after_p1.state.at, &u, &state.queries)
                .unwrap();
        let mut inc = out.inc.clone();
        inc.insert(key_app_top(), CallPattern::top(&scope(3)).unwrap());

        let tampered = inc_check(&after_p1.state, &u, &inc).unwrap();
        let honest = inc_check(&after_p1.state, &u, &out.inc).unwrap();
        assert!(!tampered.state.at.contains_key(&key_app_top()));
        assert_eq!(tampered.state.at, honest.state.at);
        assert_eq!(tampered.state.dat, honest.state.dat);
    }

    #[test]
    fn deletions_with_no_new_claims_are_checked_leniently() {
        let two_rules = "p(X).\np(X) :- X = a.\n";
        let program = parse_program(two_rules).unwrap();
        let queries = BTreeSet::from([key("p", 1, "true")]);
        let r = analyze(&program, &queries).unwrap();
        let state = ConsumerState { program, at: r.at, dat: r.dat, queries };
        assert_eq!(state.at[&key("p", 1, "true")], val("true", 1));

        let keep_fact_only = parse_program("p(X) :- X = a.\n").unwrap();
        let u = diff(&keep_fact_only, &state.program);
        assert_eq!(classify(&u), UpdateClass::Deletion);

        // With nothing shipped, the old (now conservative) claim survives.
        let lenient = inc_check(&state, &u, &AnswerTable::new()).unwrap();
        assert_eq!(lenient.state.at[&key("p", 1, "true")], val("true", 1));

        // A producer that recertifies ships the tightened claim instead,
        // and it must then match exactly.
        let list = ext_certify_from(&state.program, &state.at, &u, &state.queries).unwrap();
        assert_eq!(list.inc.len(), 1);
        let fresh = inc_check(&state, &u, &list.inc).unwrap();
        assert_eq!(fresh.state.at[&key("p", 1, "true")], val("models([X])", 1));
    }

    #[test]
    fn unsupported_claims_on_an_empty_update_are_rejected() {
        let program = parse_program("p(X) :- X = a.\n").unwrap();
        let queries = BTreeSet::from([key("p", 1, "true")]);
        let r = analyze(&program, &queries).unwrap();
        let state = ConsumerState { program, at: r.at, dat: r.dat, queries };

        // The update changes nothing, so a "changed" claim cannot check out.
        let mut inc = AnswerTable::new();
        inc.insert(key("p", 1, "true"), val("true", 1));
        let err = inc_check(&state, &Update::default(), &inc).unwrap_err();
        assert!(matches!(
            err,
            IncCheckError::Rejected(Rejection::InvalidAnswer { .. })
        ));
    }

    #[test]
    fn patch_conflicts_reject_before_any_checking() {
        let state = initial_state(P0);
        let p1 = parse_program(P1).unwrap();
        let u = diff(&state.program, &p1); // deletes rules P0 lacks
        assert!(matches!(
            inc_check(&state, &u, &AnswerTable::new()),
            Err(IncCheckError::Patch(_))
        ));
    }

    #[test]
    fn unreachable_entries_cascade_away() {
        let mut at = AnswerTable::new();
        let a = key("a", 1, "true");
        let b = key("b", 1, "true");
        let c = key("c", 1, "true");
        at.insert(a.clone(), val("models([X])", 1));
        at.insert(b.clone(), val("models([X])", 1));
        at.insert(c.clone(), val("models([X])", 1));
        let arc = |callee: &EntryKey| DependencyArc {
            body_atom: crate::lprog::Atom {
                pred: callee.pred.clone(),
                args: vec!["X".to_string()],
            },
            body_cp: val("true", 1),
            callee: callee.clone(),
        };
        let rule = |p: &str| crate::lprog::RuleId { pred: p.to_string(), arity: 1, ord: 1 };
        let mut dat = Dat::new();
        dat.insert((a.clone(), rule("a"), 1), arc(&b));
        dat.insert((b.clone(), rule("b"), 1), arc(&c));

        let roots = BTreeSet::from([a.clone()]);
        let (kept_at, kept_dat) = remove_unreachable(&at, &dat, &roots);
        assert_eq!(kept_at.len(), 3);
        assert_eq!(kept_dat.len(), 2);

        // Cutting a→b strands b, and with b gone c follows.
        dat.remove(&(a.clone(), rule("a"), 1));
        let (kept_at, kept_dat) = remove_unreachable(&at, &dat, &roots);
        assert_eq!(kept_at.into_keys().collect::<Vec<_>>(), vec![a]);
        assert!(kept_dat.is_empty());
    }

    #[test]
    fn detached_cycles_do_not_keep_themselves_alive() {
        let mut at = AnswerTable::new();
        let a = key("a", 1, "true");
        let b = key("b", 1, "true");
        at.insert(a.clone(), val("true", 1));
        at.insert(b.clone(), val("true", 1));
        let mut dat = Dat::new();
        dat.insert(
            (b.clone(), crate::lprog::RuleId { pred: "b".into(), arity: 1, ord: 1 }, 1),
            DependencyArc {
                body_atom: crate::lprog::Atom { pred: "b".into(), args: vec!["X".into()] },
                body_cp: val("true", 1),
                callee: b.clone(),
            },
        );
        let (kept_at, kept_dat) = remove_unreachable(&at, &dat, &BTreeSet::from([a.clone()]));
        // b's self-arc alone cannot justify keeping b.
        assert_eq!(kept_at.into_keys().collect::<Vec<_>>(), vec![a]);
        assert!(kept_dat.is_empty());
    }
}
