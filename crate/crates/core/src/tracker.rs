//! Rule-based dialogue state tracking and the shared policy feature vector.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acts::{ScoredHypothesis, SystemAct, SystemActType, UserActType};
use crate::ontology::{Ontology, DONTCARE, NAME_SLOT};

/// Confidence above which a belief counts as a usable constraint.
pub const DEFAULT_USE_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub value: String,
    pub confidence: f64,
    /// Tracker-wide update counter at the time of the last change.
    pub updated_at: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SocialPending {
    #[default]
    None,
    Thanking,
    Goodbye,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfferedVenue {
    pub name: String,
    pub attributes: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    /// One entry per informable slot, in ontology order.
    pub beliefs: Vec<Option<Belief>>,
    pub requested: BTreeSet<String>,
    pub offered: Option<OfferedVenue>,
    pub discussed: Vec<String>,
    pub processing_problem: bool,
    pub problem_signalled: bool,
    pub last_user_acts: Vec<UserActType>,
    pub last_system_acts: Vec<SystemAct>,
    pub repeat_count: u32,
    pub social_pending: SocialPending,
    /// Target of the previous turn's explicit confirmation.
    pub pending_confirmation: Option<(String, String)>,
    pub turn_index: u32,
    pub update_seq: u64,
    /// Hypotheses dropped because they named unknown slots or values.
    pub warnings: u32,
}

impl DialogueState {
    pub fn belief(&self, ontology: &Ontology, slot: &str) -> Option<&Belief> {
        ontology
            .slot_index(slot)
            .and_then(|i| self.beliefs.get(i))
            .and_then(Option::as_ref)
    }

    pub fn confidence(&self, index: usize) -> f64 {
        self.beliefs[index].as_ref().map_or(0.0, |b| b.confidence)
    }

    /// Beliefs usable as database constraints: confidence above `threshold`
    /// and not `dontcare`.
    pub fn constraints(&self, ontology: &Ontology, threshold: f64) -> Vec<(String, String)> {
        ontology
            .informable_names()
            .zip(&self.beliefs)
            .filter_map(|(slot, b)| {
                b.as_ref()
                    .filter(|b| b.confidence > threshold && b.value != DONTCARE)
                    .map(|b| (slot.to_string(), b.value.clone()))
            })
            .collect()
    }
}

/// Applies the tracking rules for one ontology.
#[derive(Clone, Debug)]
pub struct Tracker {
    ontology: Arc<Ontology>,
    use_threshold: f64,
}

impl Tracker {
    pub fn new(ontology: Arc<Ontology>) -> Self {
        Self {
            ontology,
            use_threshold: DEFAULT_USE_THRESHOLD,
        }
    }

    pub fn with_use_threshold(mut self, threshold: f64) -> Self {
        self.use_threshold = threshold;
        self
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn init_state(&self) -> DialogueState {
        DialogueState {
            beliefs: vec![None; self.ontology.informable().len()],
            requested: BTreeSet::new(),
            offered: None,
            discussed: Vec::new(),
            processing_problem: false,
            problem_signalled: false,
            last_user_acts: Vec::new(),
            last_system_acts: Vec::new(),
            repeat_count: 0,
            social_pending: SocialPending::None,
            pending_confirmation: None,
            turn_index: 0,
            update_seq: 0,
            warnings: 0,
        }
    }

    /// Folds one user turn into the state. `None` means understanding returned
    /// nothing: a processing problem.
    pub fn update_with_user_input(
        &self,
        state: &DialogueState,
        hypotheses: Option<&[ScoredHypothesis]>,
    ) -> DialogueState {
        let mut next = state.clone();
        next.turn_index += 1;
        next.problem_signalled = false;
        next.social_pending = SocialPending::None;
        let hyps = match hypotheses {
            Some(h) if !h.is_empty() => h,
            _ => {
                next.processing_problem = true;
                next.last_user_acts = vec![UserActType::Null];
                return next;
            }
        };
        next.processing_problem = false;
        let mut kinds = BTreeSet::new();
        for hyp in hyps {
            let c = hyp.confidence.clamp(0.0, 1.0);
            let act = &hyp.act;
            kinds.insert(act.kind);
            match act.kind {
                UserActType::Inform => {
                    for arg in &act.args {
                        match (self.ontology.slot_index(&arg.slot), &arg.value) {
                            (Some(i), Some(v)) if self.ontology.accepts(&arg.slot, v) => {
                                self.inform(&mut next, i, v, c)
                            }
                            _ => next.warnings += 1,
                        }
                    }
                }
                UserActType::Negate => {
                    let target = act
                        .first_pair()
                        .map(|(s, v)| (s.to_string(), v.to_string()))
                        .or_else(|| next.pending_confirmation.clone());
                    if let Some((slot, value)) = target {
                        match self.ontology.slot_index(&slot) {
                            Some(i) => {
                                if next.beliefs[i].as_ref().is_some_and(|b| b.value == value) {
                                    next.beliefs[i] = None;
                                    next.update_seq += 1;
                                }
                            }
                            None => next.warnings += 1,
                        }
                    }
                }
                UserActType::Affirm => {
                    let target = next
                        .pending_confirmation
                        .clone()
                        .or_else(|| act.first_pair().map(|(s, v)| (s.to_string(), v.to_string())));
                    if let Some((slot, value)) = target {
                        if let Some(i) = self.ontology.slot_index(&slot) {
                            let current = next.beliefs[i]
                                .as_ref()
                                .filter(|b| b.value == value)
                                .map_or(0.0, |b| b.confidence);
                            next.update_seq += 1;
                            next.beliefs[i] = Some(Belief {
                                value,
                                confidence: c.max(current),
                                updated_at: next.update_seq,
                            });
                        }
                    }
                }
                UserActType::Request => {
                    for arg in &act.args {
                        if self.ontology.is_requestable(&arg.slot) {
                            next.requested.insert(arg.slot.clone());
                        } else {
                            next.warnings += 1;
                        }
                    }
                }
                UserActType::Thank => next.social_pending = SocialPending::Thanking,
                UserActType::Bye => {
                    if next.social_pending == SocialPending::None {
                        next.social_pending = SocialPending::Goodbye;
                    }
                }
                UserActType::Hello | UserActType::Reqalts | UserActType::Null => {}
            }
        }
        next.last_user_acts = kinds.into_iter().collect();
        next
    }

    fn inform(&self, state: &mut DialogueState, index: usize, value: &str, confidence: f64) {
        let replace = match &state.beliefs[index] {
            None => true,
            Some(b) if b.value == value => {
                if confidence > b.confidence {
                    state.update_seq += 1;
                    let b = state.beliefs[index].as_mut().expect("present");
                    b.confidence = confidence;
                    b.updated_at = state.update_seq;
                }
                false
            }
            Some(b) => confidence >= b.confidence,
        };
        if replace {
            state.update_seq += 1;
            state.beliefs[index] = Some(Belief {
                value: value.to_string(),
                confidence,
                updated_at: state.update_seq,
            });
        }
    }

    /// Records the system's own turn.
    pub fn update_with_system_acts(&self, state: &DialogueState, acts: &[SystemAct]) -> DialogueState {
        let mut next = state.clone();
        if !acts.is_empty() && acts == state.last_system_acts.as_slice() {
            next.repeat_count += 1;
        } else {
            next.repeat_count = 0;
        }
        next.last_system_acts = acts.to_vec();
        next.pending_confirmation = None;
        for act in acts {
            match act.kind {
                SystemActType::Offer => {
                    if let Some(name) = act.value(NAME_SLOT) {
                        let attributes = act
                            .args
                            .iter()
                            .filter(|a| a.slot != NAME_SLOT)
                            .filter_map(|a| a.value.clone().map(|v| (a.slot.clone(), v)))
                            .collect();
                        next.offered = Some(OfferedVenue {
                            name: name.to_string(),
                            attributes,
                        });
                        if !next.discussed.iter().any(|d| d == name) {
                            next.discussed.push(name.to_string());
                        }
                    }
                }
                SystemActType::Answer => {
                    for arg in &act.args {
                        next.requested.remove(&arg.slot);
                    }
                }
                SystemActType::AutoNegative => next.problem_signalled = true,
                SystemActType::AcceptThanking | SystemActType::ReturnGoodbye => {
                    next.social_pending = SocialPending::None
                }
                SystemActType::ExplConfirm => {
                    next.pending_confirmation = act
                        .first_pair()
                        .map(|(s, v)| (s.to_string(), v.to_string()));
                }
                SystemActType::Request | SystemActType::ImplConfirm | SystemActType::None => {}
            }
        }
        next
    }

    pub fn feature_map(&self) -> FeatureMap {
        FeatureMap::new(&self.ontology)
    }

    /// Encodes the state; `db_match_count` is the number of venues matching the
    /// usable beliefs.
    pub fn extract_features(&self, state: &DialogueState, db_match_count: usize) -> Vec<f64> {
        let o = &*self.ontology;
        let mut f = Vec::with_capacity(FeatureMap::len_for(o));
        for i in 0..o.informable().len() {
            let c = state.confidence(i);
            let bin = if c <= 0.0 {
                0
            } else if c <= 0.3 {
                1
            } else if c <= 0.7 {
                2
            } else {
                3
            };
            f.extend((0..4).map(|b| flag(b == bin)));
        }
        for b in &state.beliefs {
            f.push(flag(b.as_ref().is_some_and(|b| b.value != DONTCARE)));
        }
        for slot in o.requestable() {
            f.push(flag(state.requested.contains(slot)));
        }
        let match_bin = match db_match_count {
            0 => 0,
            1 => 1,
            2..=4 => 2,
            _ => 3,
        };
        f.extend((0..4).map(|b| flag(b == match_bin)));
        f.push(flag(state.offered.is_some()));
        f.push(flag(self.offer_matches_beliefs(state)));
        f.push(flag(state.processing_problem));
        f.push(flag(state.problem_signalled));
        for pending in [SocialPending::None, SocialPending::Thanking, SocialPending::Goodbye] {
            f.push(flag(state.social_pending == pending));
        }
        for kind in UserActType::ALL {
            f.push(flag(state.last_user_acts.contains(&kind)));
        }
        let repeat_bin = state.repeat_count.min(2) as usize;
        f.extend((0..3).map(|b| flag(b == repeat_bin)));
        f.push(flag(state.pending_confirmation.is_some()));
        f.push((f64::from(state.turn_index) / 30.0).clamp(0.0, 1.0));
        f.push(1.0);
        debug_assert_eq!(f.len(), FeatureMap::len_for(o));
        f
    }

    fn offer_matches_beliefs(&self, state: &DialogueState) -> bool {
        let Some(offered) = &state.offered else {
            return false;
        };
        state
            .constraints(&self.ontology, self.use_threshold)
            .iter()
            .all(|(slot, value)| {
                offered
                    .attributes
                    .iter()
                    .any(|(s, v)| s == slot && v == value)
            })
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Names of every feature, in vector order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMap {
    names: Vec<String>,
}

impl FeatureMap {
    pub fn new(ontology: &Ontology) -> Self {
        let mut names = Vec::new();
        for slot in ontology.informable_names() {
            for bin in ["0", "(0,0.3]", "(0.3,0.7]", "(0.7,1]"] {
                names.push(format!("belief_conf[{slot}]={bin}"));
            }
        }
        for slot in ontology.informable_names() {
            names.push(format!("constrained[{slot}]"));
        }
        for slot in ontology.requestable() {
            names.push(format!("requested[{slot}]"));
        }
        for bin in ["0", "1", "2-4", ">=5"] {
            names.push(format!("db_matches={bin}"));
        }
        names.push("offered_venue".into());
        names.push("offer_matches_beliefs".into());
        names.push("processing_problem".into());
        names.push("problem_signalled".into());
        for p in ["none", "thanking", "goodbye"] {
            names.push(format!("social_pending={p}"));
        }
        for kind in UserActType::ALL {
            names.push(format!("last_user_act={}", kind.label()));
        }
        for bin in ["0", "1", ">=2"] {
            names.push(format!("repeat_count={bin}"));
        }
        names.push("pending_expl_confirm".into());
        names.push("turn_index/30".into());
        names.push("bias".into());
        Self { names }
    }

    /// Length implied by the layout: 4 confidence bins and a constrained flag
    /// per informable slot, one flag per requestable slot, and 26 fixed entries.
    pub fn len_for(ontology: &Ontology) -> usize {
        5 * ontology.informable().len() + ontology.requestable().len() + 26
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Adds the Evaluation agent's candidate presence bits.
    pub fn with_candidate_bits(&self) -> Self {
        let mut names = self.names.clone();
        names.extend(["candidate[task]", "candidate[autofeedback]", "candidate[som]"].map(String::from));
        Self { names }
    }

    /// Hex SHA-256 of the newline-joined names; stored in policy files.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for name in &self.names {
            hasher.update(name.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
