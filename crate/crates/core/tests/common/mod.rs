#![allow(dead_code)]

use std::collections::BTreeSet;

use mdim_core::acts::{SystemActType, UserActType};
use mdim_core::harness::EpisodeLog;
use mdim_core::ontology::{Database, NAME_SLOT};

/// Reward components recounted from the logged acts alone.
#[derive(Debug, PartialEq, Eq)]
pub struct Recount {
    pub success: bool,
    pub turns: i64,
    pub social: i64,
    pub unsignalled: i64,
}

impl Recount {
    pub fn total(&self) -> i64 {
        100 * i64::from(self.success) - self.turns - 5 * self.social - 25 * self.unsignalled
    }
}

/// Replays a logged dialogue without touching the simulator: success from
/// offers and answers checked against the goal and database, social events
/// from unanswered thanks and from social acts when no thank or bye reached
/// the tracker, unsignalled problems from user turns that reached the tracker
/// empty or not at all.
pub fn recount(log: &EpisodeLog, db: &Database) -> Recount {
    let mut accepted: Option<String> = None;
    let mut satisfied: BTreeSet<String> = BTreeSet::new();
    let mut matched = false;
    let mut success = false;
    let mut social = 0;
    let mut unsignalled = 0;
    for turn in &log.turns {
        let said = |k: UserActType| turn.user_acts.iter().any(|a| a.kind == k);
        let did = |k: SystemActType| turn.system_acts.iter().any(|a| a.kind == k);
        let heard_social = turn
            .hypotheses
            .iter()
            .flatten()
            .any(|h| matches!(h.act.kind, UserActType::Thank | UserActType::Bye));
        social += i64::from(said(UserActType::Thank) && !did(SystemActType::AcceptThanking));
        social += i64::from(
            !heard_social && (did(SystemActType::AcceptThanking) || did(SystemActType::ReturnGoodbye)),
        );
        let nothing_heard = turn.hypotheses.as_ref().is_none_or(|h| h.is_empty());
        if nothing_heard && !did(SystemActType::AutoNegative) {
            unsignalled += 1;
        }
        for act in &turn.system_acts {
            match act.kind {
                SystemActType::Offer => {
                    let venue = act.value(NAME_SLOT).and_then(|n| db.venue(n));
                    if let Some(v) = venue.filter(|v| v.matches(&log.goal.constraints)) {
                        if accepted.as_deref() != Some(v.name.as_str()) {
                            accepted = Some(v.name.clone());
                            satisfied.clear();
                        }
                        matched = true;
                        satisfied.insert(NAME_SLOT.to_string());
                    }
                }
                SystemActType::Answer => {
                    let venue = act.value(NAME_SLOT).map(String::from).or_else(|| accepted.clone());
                    if venue.is_some() && venue == accepted {
                        for arg in &act.args {
                            if log.goal.requests.contains(&arg.slot) {
                                satisfied.insert(arg.slot.clone());
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        if matched && log.goal.requests.iter().all(|r| satisfied.contains(r)) {
            success = true;
        }
    }
    Recount {
        success,
        turns: log.turns.len() as i64,
        social,
        unsignalled,
    }
}

/// Longest run of identical consecutive system turns.
pub fn longest_repeat(log: &EpisodeLog) -> usize {
    let mut best = 0;
    let mut run = 0;
    for (i, t) in log.turns.iter().enumerate() {
        run = if i > 0 && log.turns[i - 1].system_acts == t.system_acts { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}
