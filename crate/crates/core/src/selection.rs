//! Per-turn response selection for the one- and multi-dimensional systems,
//! and the heuristics that turn abstract actions into concrete acts.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{
    combination_mask, combine, AbstractAction, ActionSet, AgentKind, Candidates, CombinationSelection,
    FeedbackAction, JointAction, Scenario, SocialAction, TaskAction,
};
use crate::acts::{Arg, Dimension, SystemAct, SystemActType};
use crate::domain::Domain;
use crate::error::{Error, IoContext, Result};
use crate::ontology::{Database, Ontology, NAME_SLOT};
use crate::rl::{Exploration, LinearPolicy};
use crate::tracker::DialogueState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    OneDim,
    MultiDim,
    MdimAda,
    MdimSrc,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::OneDim, Variant::MultiDim, Variant::MdimAda, Variant::MdimSrc];

    pub fn label(self) -> &'static str {
        match self {
            Variant::OneDim => "one_dim",
            Variant::MultiDim => "multi_dim",
            Variant::MdimAda => "mdim_ada",
            Variant::MdimSrc => "mdim_src",
        }
    }

    pub fn default_scenario(self) -> Scenario {
        match self {
            Variant::MdimSrc => Scenario::Source,
            _ => Scenario::Target,
        }
    }

    pub fn is_multi_dimensional(self) -> bool {
        self != Variant::OneDim
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.label() == norm)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnsemblePolicies {
    OneDim(LinearPolicy),
    Multi {
        task: LinearPolicy,
        feedback: LinearPolicy,
        social: LinearPolicy,
        evaluation: LinearPolicy,
    },
}

/// The policies of one system variant.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentEnsemble {
    pub variant: Variant,
    pub scenario: Scenario,
    pub policies: EnsemblePolicies,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    variant: Variant,
    scenario: Scenario,
    agents: Vec<AgentKind>,
}

fn policy_file(kind: AgentKind) -> String {
    format!("{}.json", kind.label())
}

impl AgentEnsemble {
    /// Zero-initialised policies for `variant` in `scenario`.
    pub fn fresh(variant: Variant, scenario: Scenario, domain: &Domain) -> Self {
        let policies = if variant.is_multi_dimensional() {
            EnsemblePolicies::Multi {
                task: fresh_policy(AgentKind::Task, scenario, domain),
                feedback: fresh_policy(AgentKind::AutoFeedback, scenario, domain),
                social: fresh_policy(AgentKind::Som, scenario, domain),
                evaluation: fresh_policy(AgentKind::Evaluation, scenario, domain),
            }
        } else {
            EnsemblePolicies::OneDim(fresh_policy(AgentKind::OneDim, scenario, domain))
        };
        Self {
            variant,
            scenario,
            policies,
        }
    }

    pub fn agents(&self) -> Vec<(AgentKind, &LinearPolicy)> {
        match &self.policies {
            EnsemblePolicies::OneDim(p) => vec![(AgentKind::OneDim, p)],
            EnsemblePolicies::Multi {
                task,
                feedback,
                social,
                evaluation,
            } => vec![
                (AgentKind::Task, task),
                (AgentKind::AutoFeedback, feedback),
                (AgentKind::Som, social),
                (AgentKind::Evaluation, evaluation),
            ],
        }
    }

    pub fn agents_mut(&mut self) -> Vec<(AgentKind, &mut LinearPolicy)> {
        match &mut self.policies {
            EnsemblePolicies::OneDim(p) => vec![(AgentKind::OneDim, p)],
            EnsemblePolicies::Multi {
                task,
                feedback,
                social,
                evaluation,
            } => vec![
                (AgentKind::Task, task),
                (AgentKind::AutoFeedback, feedback),
                (AgentKind::Som, social),
                (AgentKind::Evaluation, evaluation),
            ],
        }
    }

    pub fn policy(&self, kind: AgentKind) -> Option<&LinearPolicy> {
        self.agents().into_iter().find(|(k, _)| *k == kind).map(|(_, p)| p)
    }

    pub fn policy_mut(&mut self, kind: AgentKind) -> Option<&mut LinearPolicy> {
        self.agents_mut().into_iter().find(|(k, _)| *k == kind).map(|(_, p)| p)
    }

    pub fn set_episodes(&mut self, episodes: u64, seed: u64) {
        for (_, p) in self.agents_mut() {
            p.metadata.episodes = episodes;
            p.metadata.seed = seed;
        }
    }

    /// Writes `manifest.json` plus one policy file per agent into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).at(dir)?;
        let manifest = Manifest {
            variant: self.variant,
            scenario: self.scenario,
            agents: self.agents().iter().map(|(k, _)| *k).collect(),
        };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).at(&path)?;
        for (kind, policy) in self.agents() {
            policy.save(dir.join(policy_file(kind)))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, domain: &Domain) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&path).at(&path)?)?;
        let mut ensemble = Self::fresh(manifest.variant, manifest.scenario, domain);
        for (kind, slot) in ensemble.agents_mut() {
            *slot = load_policy(&dir.join(policy_file(kind)), kind, manifest.scenario, domain)?;
        }
        Ok(ensemble)
    }
}

pub fn fresh_policy(kind: AgentKind, scenario: Scenario, domain: &Domain) -> LinearPolicy {
    let map = if kind == AgentKind::Evaluation {
        &domain.evaluation_features
    } else {
        &domain.features
    };
    LinearPolicy::new(ActionSet::new(kind, scenario, &domain.ontology), map.len(), map.hash())
}

/// Loads one agent's policy, checking it against this domain's layout.
pub fn load_policy(path: &Path, kind: AgentKind, scenario: Scenario, domain: &Domain) -> Result<LinearPolicy> {
    let map = if kind == AgentKind::Evaluation {
        &domain.evaluation_features
    } else {
        &domain.features
    };
    LinearPolicy::load(
        path,
        ActionSet::new(kind, scenario, &domain.ontology),
        map.len(),
        &map.hash(),
    )
}

/// Confidence thresholds used when realising abstract actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RealizationConfig {
    /// Summary requests go to the first slot below this confidence.
    pub request_threshold: f64,
    /// Beliefs above this confidence constrain offers.
    pub use_threshold: f64,
    /// Implicit confirmation band `[impl_low, impl_high)`.
    pub impl_low: f64,
    pub impl_high: f64,
    /// Explicit confirmation band `[expl_low, impl_low)`.
    pub expl_low: f64,
}

impl Default for RealizationConfig {
    fn default() -> Self {
        Self {
            request_threshold: 0.5,
            use_threshold: 0.5,
            impl_low: 0.5,
            impl_high: 0.9,
            expl_low: 0.3,
        }
    }
}

pub fn realize_request(action: &TaskAction, state: &DialogueState, ontology: &Ontology, config: &RealizationConfig) -> SystemAct {
    match action {
        TaskAction::RequestSlot(slot) => SystemAct::request(slot),
        _ => {
            let slots: Vec<&str> = ontology.informable_names().collect();
            let slot = (0..slots.len())
                .find(|&i| state.confidence(i) < config.request_threshold)
                .unwrap_or_else(|| {
                    (0..slots.len())
                        .min_by(|&a, &b| state.confidence(a).total_cmp(&state.confidence(b)))
                        .expect("at least one informable slot")
                });
            SystemAct::request(slots[slot])
        }
    }
}

pub fn realize_offer(state: &DialogueState, ontology: &Ontology, db: &Database, config: &RealizationConfig) -> Result<SystemAct> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let constraints = state.constraints(ontology, config.use_threshold);
    let score = |v: &crate::ontology::Venue| {
        constraints
            .iter()
            .filter(|(s, val)| v.get(s) == Some(val.as_str()))
            .count()
    };
    let mut best = &db.venues()[0];
    let mut best_score = score(best);
    for v in &db.venues()[1..] {
        if best_score == constraints.len() {
            break;
        }
        let s = score(v);
        if s > best_score {
            best = v;
            best_score = s;
        }
    }
    let mut args = vec![Arg::pair(NAME_SLOT, &best.name)];
    for slot in ontology.informable_names() {
        if let Some(value) = best.get(slot) {
            args.push(Arg::pair(slot, value));
        }
    }
    Ok(SystemAct::make(SystemActType::Offer, args))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfirmKind {
    Implicit,
    Explicit,
}

/// Confirms one belief: the most recently updated one inside the kind's
/// confidence band, else the most recently updated belief. `none` when there
/// are no beliefs.
pub fn realize_confirm(kind: ConfirmKind, state: &DialogueState, ontology: &Ontology, config: &RealizationConfig) -> SystemAct {
    let (low, high) = match kind {
        ConfirmKind::Implicit => (config.impl_low, config.impl_high),
        ConfirmKind::Explicit => (config.expl_low, config.impl_low),
    };
    let beliefs: Vec<(&str, &crate::tracker::Belief)> = ontology
        .informable_names()
        .zip(&state.beliefs)
        .filter_map(|(s, b)| b.as_ref().map(|b| (s, b)))
        .collect();
    let latest = |in_band: bool| {
        beliefs
            .iter()
            .filter(|(_, b)| !in_band || (b.confidence >= low && b.confidence < high))
            .max_by_key(|(_, b)| b.updated_at)
            .map(|(s, b)| (*s, b.value.clone()))
    };
    let chosen = latest(true).or_else(|| latest(false));
    let dimension_kind = match kind {
        ConfirmKind::Implicit => SystemActType::ImplConfirm,
        ConfirmKind::Explicit => SystemActType::ExplConfirm,
    };
    match chosen {
        Some((slot, value)) => SystemAct::make(dimension_kind, vec![Arg::pair(slot, value)]),
        None => SystemAct::none(Dimension::AutoFeedback),
    }
}

/// Answers every requested slot about the offered venue; `none` when nothing
/// is requested or nothing has been offered.
pub fn realize_answer(state: &DialogueState, ontology: &Ontology, db: &Database) -> SystemAct {
    let venue = state.offered.as_ref().and_then(|o| db.venue(&o.name));
    let Some(venue) = venue.filter(|_| !state.requested.is_empty()) else {
        return SystemAct::none(Dimension::Task);
    };
    let mut args = vec![Arg::pair(NAME_SLOT, &venue.name)];
    for slot in ontology.requestable() {
        if slot != NAME_SLOT && state.requested.contains(slot) {
            if let Some(value) = venue.get(slot) {
                args.push(Arg::pair(slot, value));
            }
        }
    }
    SystemAct::make(SystemActType::Answer, args)
}

fn realize_task(action: &TaskAction, state: &DialogueState, domain: &Domain, config: &RealizationConfig) -> Result<SystemAct> {
    Ok(match action {
        TaskAction::Offer => realize_offer(state, &domain.ontology, &domain.db, config)?,
        TaskAction::Request | TaskAction::RequestSlot(_) => realize_request(action, state, &domain.ontology, config),
        TaskAction::Answer => realize_answer(state, &domain.ontology, &domain.db),
        TaskAction::None => SystemAct::none(Dimension::Task),
    })
}

fn realize_feedback(action: FeedbackAction, state: &DialogueState, ontology: &Ontology, config: &RealizationConfig) -> SystemAct {
    match action {
        FeedbackAction::ImplConfirm => realize_confirm(ConfirmKind::Implicit, state, ontology, config),
        FeedbackAction::ExplConfirm => realize_confirm(ConfirmKind::Explicit, state, ontology, config),
        FeedbackAction::AutoNegative => SystemAct::make(SystemActType::AutoNegative, vec![]),
        FeedbackAction::None => SystemAct::none(Dimension::AutoFeedback),
    }
}

fn realize_social(action: SocialAction) -> SystemAct {
    match action {
        SocialAction::AcceptThanking => SystemAct::make(SystemActType::AcceptThanking, vec![]),
        SocialAction::ReturnGoodbye => SystemAct::make(SystemActType::ReturnGoodbye, vec![]),
        SocialAction::None => SystemAct::none(Dimension::Som),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentDecision {
    pub agent: AgentKind,
    pub features: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    /// The action that took effect: `none` for a dimension agent whose
    /// candidate was not forwarded or realised to nothing, else `action`.
    pub executed: usize,
    pub label: String,
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub decisions: Vec<AgentDecision>,
    pub final_acts: Vec<SystemAct>,
    /// True when every candidate was `none` and auto_negative was emitted.
    pub fallback: bool,
}

fn decide<R: Rng + ?Sized>(
    agent: AgentKind,
    policy: &LinearPolicy,
    features: Vec<f64>,
    mask: Vec<bool>,
    exploration: Exploration,
    rng: &mut R,
) -> Result<AgentDecision> {
    let choice = policy.select_action(&features, &mask, exploration, rng)?;
    Ok(AgentDecision {
        agent,
        label: policy.action_set().actions[choice.action].label(),
        features,
        mask,
        action: choice.action,
        executed: choice.action,
        probabilities: choice.probabilities,
    })
}

fn none_index(agent: AgentKind, ensemble: &AgentEnsemble) -> Result<usize> {
    let none = match agent {
        AgentKind::Task => AbstractAction::Task(TaskAction::None),
        AgentKind::AutoFeedback => AbstractAction::Feedback(FeedbackAction::None),
        AgentKind::Som => AbstractAction::Social(SocialAction::None),
        _ => return Err(Error::Contract(format!("{} has no none action", agent.label()))),
    };
    ensemble
        .policy(agent)
        .and_then(|p| p.action_set().index_of(&none))
        .ok_or_else(|| Error::Contract(format!("{} lacks a none action", agent.label())))
}

fn fallback_act() -> SystemAct {
    SystemAct::make(SystemActType::AutoNegative, vec![])
}

/// Chooses the system turn for `state`. Never returns an empty act list.
pub fn select_response<R: Rng + ?Sized>(
    ensemble: &AgentEnsemble,
    domain: &Domain,
    state: &DialogueState,
    config: &RealizationConfig,
    exploration: Exploration,
    rng: &mut R,
) -> Result<(Vec<SystemAct>, SelectionTrace)> {
    let match_count = domain.db.count(&state.constraints(&domain.ontology, config.use_threshold))?;
    let features = domain.tracker.extract_features(state, match_count);
    let mut decisions = Vec::with_capacity(4);
    let acts = match &ensemble.policies {
        EnsemblePolicies::OneDim(policy) => {
            let all = vec![true; policy.n_actions()];
            let d = decide(AgentKind::OneDim, policy, features, all, exploration, rng)?;
            let AbstractAction::Joint(joint) = &policy.action_set().actions[d.action] else {
                return Err(Error::Contract("one-dimensional policy holds non-joint actions".into()));
            };
            let JointAction { task, feedback, social } = joint;
            let candidates = Candidates {
                task: realize_task(task, state, domain, config)?,
                feedback: realize_feedback(*feedback, state, &domain.ontology, config),
                social: realize_social(*social),
            };
            decisions.push(d);
            [candidates.feedback, candidates.social, candidates.task]
                .into_iter()
                .filter(|a| !a.is_none())
                .collect::<Vec<_>>()
        }
        EnsemblePolicies::Multi {
            task,
            feedback,
            social,
            evaluation,
        } => {
            let t = decide(AgentKind::Task, task, features.clone(), vec![true; task.n_actions()], exploration, rng)?;
            let f = decide(
                AgentKind::AutoFeedback,
                feedback,
                features.clone(),
                vec![true; feedback.n_actions()],
                exploration,
                rng,
            )?;
            let s = decide(AgentKind::Som, social, features.clone(), vec![true; social.n_actions()], exploration, rng)?;
            let pick = |p: &LinearPolicy, i: usize| p.action_set().actions[i].clone();
            let (AbstractAction::Task(ta), AbstractAction::Feedback(fa), AbstractAction::Social(sa)) =
                (pick(task, t.action), pick(feedback, f.action), pick(social, s.action))
            else {
                return Err(Error::Contract("dimension policy holds foreign actions".into()));
            };
            let candidates = Candidates {
                task: realize_task(&ta, state, domain, config)?,
                feedback: realize_feedback(fa, state, &domain.ontology, config),
                social: realize_social(sa),
            };
            let mut eval_features = features;
            eval_features.extend(candidates.presence().map(|b| if b { 1.0 } else { 0.0 }));
            let allowed = combination_mask(&candidates);
            let mask: Vec<bool> = CombinationSelection::all().map(|c| allowed.contains(&c)).collect();
            let e = decide(AgentKind::Evaluation, evaluation, eval_features, mask, exploration, rng)?;
            let selection = CombinationSelection::from_index(e.action);
            let mut dims = [t, f, s];
            for (d, dim) in dims.iter_mut().zip(Dimension::ALL) {
                if !selection.contains(dim) || candidates.get(dim).is_none() {
                    d.executed = none_index(d.agent, ensemble)?;
                }
            }
            decisions.extend(dims);
            decisions.push(e);
            combine(selection, &candidates)?
        }
    };
    let fallback = acts.is_empty();
    let acts = if fallback { vec![fallback_act()] } else { acts };
    let trace = SelectionTrace {
        decisions,
        final_acts: acts.clone(),
        fallback,
    };
    Ok((acts, trace))
}
