//! Agenda-based simulated user, semantic error model and processing-problem
//! injection.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acts::{Arg, ScoredHypothesis, SystemAct, SystemActType, UserAct, UserActType};
use crate::error::{Error, Result};
use crate::ontology::{Database, Ontology, UserGoal, DONTCARE, NAME_SLOT};
use crate::tracker::SocialPending;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatorConfig {
    /// The user hangs up after this many system turns.
    pub max_turns: u32,
    /// The user hangs up after this many identical consecutive system turns.
    pub max_repeats: u32,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            max_turns: 30,
            max_repeats: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgendaState {
    pub goal: UserGoal,
    /// Pending acts; the top of the stack is the last element.
    pub agenda: Vec<UserAct>,
    pub satisfied_requests: BTreeSet<String>,
    /// Last offered venue that matched every constraint.
    pub accepted_venue: Option<String>,
    pub received_matching_offer: bool,
    pub completed: bool,
    pub thanked: bool,
    pub said_bye: bool,
    pub hung_up: bool,
    pub turn_count: u32,
    pub last_user_acts: Vec<UserAct>,
    last_system_acts: Option<Vec<SystemAct>>,
    identical_system_turns: u32,
    config: SimulatorConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserTurnOutcome {
    /// The user's next acts, before the error model. Empty after hang-up.
    pub true_acts: Vec<UserAct>,
    pub task_completed_now: bool,
    pub social_penalty_events: u32,
    pub hung_up: bool,
}

fn has(acts: &[SystemAct], kind: SystemActType) -> bool {
    acts.iter().any(|a| a.kind == kind)
}

impl AgendaState {
    /// Agenda from top to bottom: constraint informs in random order, requests
    /// in goal order, then `bye`.
    pub fn new<R: Rng + ?Sized>(goal: UserGoal, config: SimulatorConfig, rng: &mut R) -> Self {
        let mut agenda = vec![UserAct::bare(UserActType::Bye)];
        agenda.extend(goal.requests.iter().rev().map(UserAct::request));
        let mut informs: Vec<UserAct> = goal
            .constraints
            .iter()
            .map(|(s, v)| UserAct::inform(s, v))
            .collect();
        informs.shuffle(rng);
        agenda.extend(informs);
        Self {
            goal,
            agenda,
            satisfied_requests: BTreeSet::new(),
            accepted_venue: None,
            received_matching_offer: false,
            completed: false,
            thanked: false,
            said_bye: false,
            hung_up: false,
            turn_count: 0,
            last_user_acts: Vec::new(),
            last_system_acts: None,
            identical_system_turns: 0,
            config,
        }
    }

    /// The agenda listed from top to bottom.
    pub fn agenda_top_down(&self) -> Vec<UserAct> {
        self.agenda.iter().rev().cloned().collect()
    }

    /// The user's first turn.
    pub fn opening_turn(&mut self) -> Vec<UserAct> {
        let acts = self.pop_next();
        self.last_user_acts = acts.clone();
        acts
    }

    fn pop_next(&mut self) -> Vec<UserAct> {
        let at_bye = self.agenda.last().is_none_or(|a| a.kind == UserActType::Bye);
        if at_bye && !self.completed {
            return self.restate_goal();
        }
        match self.agenda.pop() {
            Some(act) => {
                if act.kind == UserActType::Bye {
                    self.said_bye = true;
                }
                vec![act]
            }
            None => {
                self.said_bye = true;
                vec![UserAct::bare(UserActType::Bye)]
            }
        }
    }

    /// What an unfinished user says instead of leaving: the outstanding
    /// requests once a matching venue was offered, else every constraint.
    fn restate_goal(&self) -> Vec<UserAct> {
        if self.received_matching_offer {
            self.goal
                .requests
                .iter()
                .filter(|r| !self.satisfied_requests.contains(*r))
                .map(UserAct::request)
                .collect()
        } else {
            self.goal.constraints.iter().map(|(s, v)| UserAct::inform(s, v)).collect()
        }
    }

    fn correct_value(&self, slot: &str) -> &str {
        self.goal.constraint(slot).unwrap_or(DONTCARE)
    }

    /// An unconstrained slot accepts any value.
    fn value_ok(&self, slot: &str, value: &str) -> bool {
        match self.goal.constraint(slot) {
            Some(v) => v == value,
            None => true,
        }
    }

    fn remove_where(&mut self, pred: impl Fn(&UserAct) -> bool) {
        self.agenda.retain(|a| !pred(a));
    }

    /// Reacts to one system turn and produces the user's next acts.
    ///
    /// `social_pending` is what the system believed it owed socially when it
    /// chose `system_acts`; a SOM act is uncalled-for only if that was none.
    pub fn respond(
        &mut self,
        system_acts: &[SystemAct],
        social_pending: SocialPending,
        db: &Database,
        ontology: &Ontology,
    ) -> Result<UserTurnOutcome> {
        if self.hung_up {
            return Err(Error::Contract("user has already hung up".into()));
        }
        self.turn_count += 1;

        let prev_thank = self.last_user_acts.iter().any(|a| a.kind == UserActType::Thank);
        let prev_bye = self.last_user_acts.iter().any(|a| a.kind == UserActType::Bye);
        let mut social_penalty_events = 0;
        if prev_thank && !has(system_acts, SystemActType::AcceptThanking) {
            social_penalty_events += 1;
        }
        let som = system_acts
            .iter()
            .any(|a| matches!(a.kind, SystemActType::AcceptThanking | SystemActType::ReturnGoodbye));
        if som && social_pending == SocialPending::None {
            social_penalty_events += 1;
        }

        if self.last_system_acts.as_deref() == Some(system_acts) {
            self.identical_system_turns += 1;
        } else {
            self.identical_system_turns = 1;
        }
        self.last_system_acts = Some(system_acts.to_vec());

        let mut responses: Vec<UserAct> = Vec::new();
        for act in system_acts {
            match act.kind {
                SystemActType::Request => {
                    let Some(slot) = act.args.first().map(|a| a.slot.clone()) else {
                        continue;
                    };
                    if ontology.is_informable(&slot) {
                        let value = self.correct_value(&slot).to_string();
                        self.remove_where(|a| a.kind == UserActType::Inform && a.slot() == Some(&slot));
                        responses.push(UserAct::inform(slot, value));
                    }
                }
                SystemActType::ExplConfirm => {
                    if let Some((slot, value)) = act.first_pair() {
                        if self.value_ok(slot, value) {
                            responses.push(UserAct::new(UserActType::Affirm, vec![Arg::pair(slot, value)]));
                        } else {
                            responses.push(UserAct::new(UserActType::Negate, vec![Arg::pair(slot, value)]));
                            responses.push(UserAct::inform(slot, self.correct_value(slot)));
                        }
                    }
                }
                SystemActType::ImplConfirm => {
                    for arg in &act.args {
                        let Some(value) = &arg.value else { continue };
                        if ontology.is_informable(&arg.slot) && !self.value_ok(&arg.slot, value) {
                            responses.push(UserAct::new(UserActType::Negate, vec![arg.clone()]));
                            responses.push(UserAct::inform(&arg.slot, self.correct_value(&arg.slot)));
                        }
                    }
                }
                SystemActType::Offer => {
                    let venue = act.value(NAME_SLOT).and_then(|n| db.venue(n));
                    match venue {
                        Some(v) if v.matches(&self.goal.constraints) => {
                            if self.accepted_venue.as_deref() != Some(v.name.as_str()) {
                                self.accepted_venue = Some(v.name.clone());
                                self.satisfied_requests.clear();
                            }
                            self.received_matching_offer = true;
                            self.satisfied_requests.insert(NAME_SLOT.to_string());
                            self.remove_where(|a| matches!(a.kind, UserActType::Inform | UserActType::Request));
                            for slot in &self.goal.requests {
                                if !self.satisfied_requests.contains(slot) {
                                    responses.push(UserAct::request(slot));
                                }
                            }
                        }
                        other => {
                            let violated = self
                                .goal
                                .constraints
                                .iter()
                                .find(|(s, val)| other.and_then(|v| v.get(s)) != Some(val.as_str()))
                                .or(self.goal.constraints.first())
                                .cloned();
                            if let Some((slot, value)) = violated {
                                self.remove_where(|a| a.kind == UserActType::Inform && a.slot() == Some(&slot));
                                responses.push(UserAct::inform(slot, value));
                            }
                        }
                    }
                }
                SystemActType::Answer => {
                    let venue = act.value(NAME_SLOT).map(String::from).or_else(|| self.accepted_venue.clone());
                    if venue.is_some() && venue == self.accepted_venue {
                        for arg in &act.args {
                            if self.goal.requests.contains(&arg.slot) {
                                self.satisfied_requests.insert(arg.slot.clone());
                                let slot = arg.slot.clone();
                                self.remove_where(|a| a.kind == UserActType::Request && a.slot() == Some(&slot));
                            }
                        }
                    }
                }
                SystemActType::AcceptThanking => {
                    if self.completed && self.thanked {
                        self.remove_where(|a| a.kind != UserActType::Bye);
                    }
                }
                SystemActType::AutoNegative => responses.extend(self.last_user_acts.iter().cloned()),
                SystemActType::ReturnGoodbye | SystemActType::None => {}
            }
        }

        let mut task_completed_now = false;
        if !self.completed
            && self.received_matching_offer
            && self.goal.requests.iter().all(|r| self.satisfied_requests.contains(r))
        {
            self.completed = true;
            task_completed_now = true;
            if !self.thanked {
                self.thanked = true;
                self.agenda.push(UserAct::bare(UserActType::Thank));
            }
        }

        self.hung_up = has(system_acts, SystemActType::ReturnGoodbye)
            || prev_bye
            || self.turn_count >= self.config.max_turns
            || self.identical_system_turns >= self.config.max_repeats;

        let true_acts = if self.hung_up {
            Vec::new()
        } else if responses.is_empty() {
            self.pop_next()
        } else {
            if responses.iter().any(|a| a.kind == UserActType::Bye) {
                self.said_bye = true;
            }
            responses
        };
        self.last_user_acts = true_acts.clone();
        Ok(UserTurnOutcome {
            true_acts,
            task_completed_now,
            social_penalty_events,
            hung_up: self.hung_up,
        })
    }
}

/// Independently corrupts each user act with probability `error_rate`.
///
/// Given corruption: value substitution 0.7, deletion 0.2, act-type
/// substitution 0.1. Clean acts score uniform [0.6, 1.0]; corrupted ones
/// uniform [0.3, 0.8].
#[derive(Clone, Debug)]
pub struct ErrorModel {
    ontology: Arc<Ontology>,
    error_rate: f64,
}

impl ErrorModel {
    pub fn new(ontology: Arc<Ontology>, error_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&error_rate) {
            return Err(Error::Config(format!("error rate {error_rate} outside [0, 1]")));
        }
        Ok(Self { ontology, error_rate })
    }

    pub fn error_rate(&self) -> f64 {
        self.error_rate
    }

    pub fn apply<R: Rng + ?Sized>(&self, true_acts: &[UserAct], rng: &mut R) -> Vec<ScoredHypothesis> {
        let mut out = Vec::with_capacity(true_acts.len());
        for act in true_acts {
            if !rng.random_bool(self.error_rate) {
                out.push(ScoredHypothesis {
                    act: act.clone(),
                    confidence: rng.random_range(0.6..=1.0),
                    corrupted: false,
                });
                continue;
            }
            let u: f64 = rng.random();
            let corrupted = if u < 0.7 {
                self.substitute_value(act, rng).unwrap_or_else(|| self.substitute_type(act, rng))
            } else if u < 0.9 {
                continue;
            } else {
                self.substitute_type(act, rng)
            };
            out.push(ScoredHypothesis {
                act: corrupted,
                confidence: rng.random_range(0.3..=0.8),
                corrupted: true,
            });
        }
        out
    }

    fn substitute_value<R: Rng + ?Sized>(&self, act: &UserAct, rng: &mut R) -> Option<UserAct> {
        let arg = act.args.first()?;
        let mut new_arg = arg.clone();
        match &arg.value {
            Some(value) => {
                let values = self.ontology.values(&arg.slot).ok()?;
                let options: Vec<&str> = values
                    .iter()
                    .map(String::as_str)
                    .chain(std::iter::once(DONTCARE))
                    .filter(|v| v != value)
                    .collect();
                new_arg.value = Some(options.choose(rng)?.to_string());
            }
            None => {
                let options: Vec<&String> = self
                    .ontology
                    .requestable()
                    .iter()
                    .filter(|s| **s != arg.slot)
                    .collect();
                new_arg.slot = options.choose(rng)?.to_string();
            }
        }
        let mut args = act.args.clone();
        args[0] = new_arg;
        Some(UserAct::new(act.kind, args))
    }

    fn substitute_type<R: Rng + ?Sized>(&self, act: &UserAct, rng: &mut R) -> UserAct {
        use UserActType as U;
        match act.kind {
            U::Inform => UserAct::new(U::Negate, act.args.clone()),
            U::Request => match act.slot() {
                Some(slot) if self.ontology.is_informable(slot) => {
                    let value = self
                        .ontology
                        .values(slot)
                        .ok()
                        .and_then(|v| v.choose(rng))
                        .cloned()
                        .unwrap_or_else(|| DONTCARE.to_string());
                    UserAct::inform(slot, value)
                }
                _ => UserAct::new(U::Reqalts, Vec::new()),
            },
            U::Affirm => UserAct::new(U::Negate, act.args.clone()),
            U::Negate => UserAct::new(U::Affirm, act.args.clone()),
            U::Thank => UserAct::bare(U::Bye),
            U::Bye | U::Hello => UserAct::bare(U::Thank),
            U::Reqalts => UserAct::bare(U::Negate),
            U::Null => UserAct::bare(U::Null),
        }
    }
}

/// True with probability `p`: the user turn is lost and the tracker sees no
/// input.
pub fn maybe_processing_problem<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.random_bool(p.clamp(0.0, 1.0))
}
