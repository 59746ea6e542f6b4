//! Per-agent abstract action sets and the rules for combining candidate acts
//! from the three dimensions into one system turn.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::acts::{Dimension, SystemAct, SystemActType};
use crate::error::{Error, Result};
use crate::ontology::Ontology;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Summary `request` action, slot chosen by heuristic.
    Source,
    /// One request action per informable slot.
    Target,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Source => "source",
            Scenario::Target => "target",
        })
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(Scenario::Source),
            "target" => Ok(Scenario::Target),
            _ => Err(Error::Config(format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Task,
    AutoFeedback,
    Som,
    OneDim,
    Evaluation,
}

impl AgentKind {
    pub fn label(self) -> &'static str {
        match self {
            AgentKind::Task => "task",
            AgentKind::AutoFeedback => "autofeedback",
            AgentKind::Som => "som",
            AgentKind::OneDim => "onedim",
            AgentKind::Evaluation => "evaluation",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TaskAction {
    Offer,
    /// Summary request; the slot is picked by heuristic.
    Request,
    RequestSlot(String),
    Answer,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeedbackAction {
    ImplConfirm,
    ExplConfirm,
    AutoNegative,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SocialAction {
    AcceptThanking,
    ReturnGoodbye,
    None,
}

/// A one-dimensional action: one abstract action per dimension, at most two of
/// them non-none.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JointAction {
    pub task: TaskAction,
    pub feedback: FeedbackAction,
    pub social: SocialAction,
}

/// A subset of the three dimensions, stored as a bitmask
/// (bit 0 Task, bit 1 AutoFeedback, bit 2 SOM).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CombinationSelection(u8);

impl CombinationSelection {
    pub const EMPTY: Self = Self(0);

    pub fn from_index(index: usize) -> Self {
        assert!(index < 8, "combination index out of range");
        Self(index as u8)
    }

    pub fn of(dims: &[Dimension]) -> Self {
        Self(dims.iter().fold(0, |m, d| m | Self::bit(*d)))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    fn bit(d: Dimension) -> u8 {
        match d {
            Dimension::Task => 1,
            Dimension::AutoFeedback => 2,
            Dimension::Som => 4,
        }
    }

    pub fn contains(self, d: Dimension) -> bool {
        self.0 & Self::bit(d) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..8u8).map(Self)
    }

    pub fn label(self) -> String {
        if self.is_empty() {
            return "empty".to_string();
        }
        Dimension::ALL
            .into_iter()
            .filter(|d| self.contains(*d))
            .map(Dimension::label)
            .collect::<Vec<_>>()
            .join("+")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AbstractAction {
    Task(TaskAction),
    Feedback(FeedbackAction),
    Social(SocialAction),
    Joint(JointAction),
    Combination(CombinationSelection),
}

impl TaskAction {
    pub fn label(&self) -> String {
        match self {
            TaskAction::Offer => "offer".into(),
            TaskAction::Request => "request".into(),
            TaskAction::RequestSlot(s) => format!("request_{s}"),
            TaskAction::Answer => "answer".into(),
            TaskAction::None => "none".into(),
        }
    }
}

impl FeedbackAction {
    pub fn label(self) -> &'static str {
        match self {
            FeedbackAction::ImplConfirm => "impl_confirm",
            FeedbackAction::ExplConfirm => "expl_confirm",
            FeedbackAction::AutoNegative => "auto_negative",
            FeedbackAction::None => "none",
        }
    }
}

impl SocialAction {
    pub fn label(self) -> &'static str {
        match self {
            SocialAction::AcceptThanking => "accept_thanking",
            SocialAction::ReturnGoodbye => "return_goodbye",
            SocialAction::None => "none",
        }
    }
}

impl JointAction {
    pub fn label(&self) -> String {
        let parts: Vec<String> = [
            (self.task != TaskAction::None).then(|| self.task.label()),
            (self.feedback != FeedbackAction::None).then(|| self.feedback.label().to_string()),
            (self.social != SocialAction::None).then(|| self.social.label().to_string()),
        ]
        .into_iter()
        .flatten()
        .collect();
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

impl AbstractAction {
    pub fn label(&self) -> String {
        match self {
            AbstractAction::Task(a) => a.label(),
            AbstractAction::Feedback(a) => a.label().to_string(),
            AbstractAction::Social(a) => a.label().to_string(),
            AbstractAction::Joint(a) => a.label(),
            AbstractAction::Combination(c) => c.label(),
        }
    }
}

/// An agent's ordered action list. The order is part of the weight layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSet {
    pub kind: AgentKind,
    pub scenario: Scenario,
    pub actions: Vec<AbstractAction>,
}

fn task_actions(ontology: &Ontology, scenario: Scenario) -> Vec<TaskAction> {
    let mut actions = vec![TaskAction::Offer];
    match scenario {
        Scenario::Source => actions.push(TaskAction::Request),
        Scenario::Target => actions.extend(
            ontology
                .informable_names()
                .map(|s| TaskAction::RequestSlot(s.to_string())),
        ),
    }
    actions.extend([TaskAction::Answer, TaskAction::None]);
    actions
}

const FEEDBACK_ACTIONS: [FeedbackAction; 4] = [
    FeedbackAction::ImplConfirm,
    FeedbackAction::ExplConfirm,
    FeedbackAction::AutoNegative,
    FeedbackAction::None,
];

const SOCIAL_ACTIONS: [SocialAction; 3] = [
    SocialAction::AcceptThanking,
    SocialAction::ReturnGoodbye,
    SocialAction::None,
];

fn joint(task: TaskAction, feedback: FeedbackAction, social: SocialAction) -> AbstractAction {
    AbstractAction::Joint(JointAction {
        task,
        feedback,
        social,
    })
}

impl ActionSet {
    pub fn new(kind: AgentKind, scenario: Scenario, ontology: &Ontology) -> Self {
        use FeedbackAction as F;
        use SocialAction as S;
        let actions = match kind {
            AgentKind::Task => task_actions(ontology, scenario)
                .into_iter()
                .map(AbstractAction::Task)
                .collect(),
            AgentKind::AutoFeedback => FEEDBACK_ACTIONS.into_iter().map(AbstractAction::Feedback).collect(),
            AgentKind::Som => SOCIAL_ACTIONS.into_iter().map(AbstractAction::Social).collect(),
            AgentKind::Evaluation => CombinationSelection::all()
                .map(AbstractAction::Combination)
                .collect(),
            AgentKind::OneDim => {
                let requests: Vec<TaskAction> = task_actions(ontology, scenario)
                    .into_iter()
                    .filter(|a| matches!(a, TaskAction::Request | TaskAction::RequestSlot(_)))
                    .collect();
                let mut v = vec![
                    joint(TaskAction::Offer, F::None, S::None),
                    joint(TaskAction::Offer, F::ImplConfirm, S::None),
                    joint(TaskAction::Answer, F::None, S::None),
                ];
                v.extend(requests.iter().map(|r| joint(r.clone(), F::None, S::None)));
                v.extend(requests.iter().map(|r| joint(r.clone(), F::ImplConfirm, S::None)));
                v.extend([
                    joint(TaskAction::None, F::ExplConfirm, S::None),
                    joint(TaskAction::None, F::AutoNegative, S::None),
                    joint(TaskAction::None, F::None, S::AcceptThanking),
                    joint(TaskAction::None, F::None, S::ReturnGoodbye),
                ]);
                v
            }
        };
        Self {
            kind,
            scenario,
            actions,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.actions.iter().map(AbstractAction::label).collect()
    }

    pub fn index_of(&self, action: &AbstractAction) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }
}

/// One concrete candidate act per dimension (possibly `none`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidates {
    pub task: SystemAct,
    pub feedback: SystemAct,
    pub social: SystemAct,
}

impl Candidates {
    pub fn get(&self, d: Dimension) -> &SystemAct {
        match d {
            Dimension::Task => &self.task,
            Dimension::AutoFeedback => &self.feedback,
            Dimension::Som => &self.social,
        }
    }

    /// Presence bits (Task, AutoFeedback, SOM) of non-none candidates.
    pub fn presence(&self) -> [bool; 3] {
        Dimension::ALL.map(|d| !self.get(d).is_none())
    }
}

/// The selections the Evaluation agent may choose for these candidates:
/// every singleton with a non-none candidate, plus {AutoFeedback, Task} when
/// an implicit confirmation accompanies an offer or a request. The empty
/// selection is allowed only when all candidates are none.
pub fn combination_mask(candidates: &Candidates) -> Vec<CombinationSelection> {
    let mut allowed: Vec<CombinationSelection> = Dimension::ALL
        .into_iter()
        .filter(|d| !candidates.get(*d).is_none())
        .map(|d| CombinationSelection::of(&[d]))
        .collect();
    if candidates.feedback.kind == SystemActType::ImplConfirm
        && matches!(candidates.task.kind, SystemActType::Offer | SystemActType::Request)
    {
        allowed.push(CombinationSelection::of(&[Dimension::Task, Dimension::AutoFeedback]));
    }
    if allowed.is_empty() {
        allowed.push(CombinationSelection::EMPTY);
    }
    allowed.sort();
    allowed
}

/// The acts of the selected dimensions, feedback first, social next, task last.
pub fn combine(selection: CombinationSelection, candidates: &Candidates) -> Result<Vec<SystemAct>> {
    if !combination_mask(candidates).contains(&selection) {
        return Err(Error::Contract(format!(
            "selection `{}` is not allowed for these candidates",
            selection.label()
        )));
    }
    Ok([Dimension::AutoFeedback, Dimension::Som, Dimension::Task]
        .into_iter()
        .filter(|d| selection.contains(*d))
        .map(|d| candidates.get(d).clone())
        .collect())
}
