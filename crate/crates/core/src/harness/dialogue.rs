use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::AgentKind;
use crate::acts::{ScoredHypothesis, SystemAct, SystemActType, UserAct};
use crate::domain::Domain;
use crate::error::Result;
use crate::ontology::{sample_goal, GoalConfig, UserGoal};
use crate::reward::{turn_reward, RewardBreakdown};
use crate::rl::{Exploration, TraceStep};
use crate::selection::{select_response, AgentEnsemble, RealizationConfig, SelectionTrace};
use crate::simulator::{maybe_processing_problem, AgendaState, ErrorModel, SimulatorConfig};
use crate::tracker::{DialogueState, SocialPending};

/// Anything that can choose a system turn.
pub trait Responder {
    fn respond(
        &self,
        domain: &Domain,
        state: &DialogueState,
        realization: &RealizationConfig,
        rng: &mut dyn rand::RngCore,
    ) -> Result<(Vec<SystemAct>, Option<SelectionTrace>)>;
}

/// A learned ensemble under a fixed exploration setting.
pub struct EnsembleResponder<'a> {
    pub ensemble: &'a AgentEnsemble,
    pub exploration: Exploration,
}

impl Responder for EnsembleResponder<'_> {
    fn respond(
        &self,
        domain: &Domain,
        state: &DialogueState,
        realization: &RealizationConfig,
        rng: &mut dyn rand::RngCore,
    ) -> Result<(Vec<SystemAct>, Option<SelectionTrace>)> {
        let (acts, trace) = select_response(self.ensemble, domain, state, realization, self.exploration, rng)?;
        Ok((acts, Some(trace)))
    }
}

/// Which action a dimension agent's training trace records.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreditAssignment {
    /// The action the agent sampled, whether or not it reached the user.
    Chosen,
    /// The action that took effect; unforwarded candidates count as `none`.
    #[default]
    Executed,
}

/// Simulation settings for one dialogue.
#[derive(Clone, Debug)]
pub struct DialogueSettings {
    pub error_model: ErrorModel,
    pub problem_rate: f64,
    pub simulator: SimulatorConfig,
    pub goals: GoalConfig,
    pub realization: RealizationConfig,
    pub credit: CreditAssignment,
    pub fingerprint: String,
}

impl DialogueSettings {
    pub fn new(domain: &Domain, error_rate: f64, problem_rate: f64) -> Result<Self> {
        Ok(Self {
            error_model: ErrorModel::new(domain.ontology.clone(), error_rate)?,
            problem_rate,
            simulator: SimulatorConfig::default(),
            goals: GoalConfig::default(),
            realization: RealizationConfig::default(),
            credit: CreditAssignment::default(),
            fingerprint: String::new(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// What the user meant this turn.
    pub user_acts: Vec<UserAct>,
    /// What reached the tracker; `None` on a processing problem.
    pub hypotheses: Option<Vec<ScoredHypothesis>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<DialogueState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionTrace>,
    pub system_acts: Vec<SystemAct>,
    pub reward: RewardBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub fingerprint: String,
    pub goal: UserGoal,
    pub turns: Vec<TurnRecord>,
    pub success: bool,
    /// Number of user turns the system responded to.
    pub length: usize,
    pub total_reward: i64,
}

impl EpisodeLog {
    pub fn social_events(&self) -> i64 {
        self.turns.iter().map(|t| i64::from(-t.reward.social_penalty / 5)).sum()
    }

    pub fn unsignalled_problems(&self) -> usize {
        self.turns.iter().filter(|t| t.reward.unsignalled_problem_penalty != 0).count()
    }
}

/// Per-agent training traces of one dialogue. Every trace of a dialogue
/// carries the same reward sequence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTraces {
    pub agents: Vec<(AgentKind, Vec<TraceStep>)>,
}

impl EpisodeTraces {
    fn push(&mut self, trace: SelectionTrace, reward: f64, credit: CreditAssignment) {
        for d in trace.decisions {
            let step = TraceStep {
                features: d.features,
                action: match credit {
                    CreditAssignment::Chosen => d.action,
                    CreditAssignment::Executed => d.executed,
                },
                reward,
            };
            match self.agents.iter_mut().find(|(k, _)| *k == d.agent) {
                Some((_, steps)) => steps.push(step),
                None => self.agents.push((d.agent, vec![step])),
            }
        }
    }
}

/// Independent RNG stream for one dialogue.
pub fn dialogue_rng(seed: u64, run: u64, phase: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((run << 40) | (phase << 32) | index);
    rng
}

/// Simulates one dialogue until the user hangs up.
///
/// `detail` keeps state snapshots and selection traces in the log;
/// `collect_traces` returns per-agent training traces.
pub fn run_dialogue<R: Rng>(
    responder: &dyn Responder,
    domain: &Domain,
    settings: &DialogueSettings,
    rng: &mut R,
    detail: bool,
    collect_traces: bool,
) -> Result<(EpisodeLog, EpisodeTraces)> {
    let goal = sample_goal(&domain.ontology, &domain.db, &settings.goals, rng)?;
    let mut user = AgendaState::new(goal.clone(), settings.simulator.clone(), rng);
    let mut state = domain.tracker.init_state();
    let mut user_acts = user.opening_turn();
    let mut turns = Vec::new();
    let mut traces = EpisodeTraces::default();
    let mut total: i64 = 0;
    loop {
        let hyps = settings.error_model.apply(&user_acts, rng);
        let problem = maybe_processing_problem(settings.problem_rate, rng);
        let hypotheses = (!problem).then_some(hyps);
        state = domain.tracker.update_with_user_input(&state, hypotheses.as_deref());
        let (acts, selection) = responder.respond(domain, &state, &settings.realization, rng)?;
        let outcome = user.respond(&acts, state.social_pending, &domain.db, &domain.ontology)?;
        let reward = turn_reward(&outcome, &state, &acts);
        total += i64::from(reward.total);
        let selection = match selection {
            Some(s) if collect_traces && detail => {
                traces.push(s.clone(), f64::from(reward.total), settings.credit);
                Some(s)
            }
            Some(s) if collect_traces => {
                traces.push(s, f64::from(reward.total), settings.credit);
                None
            }
            other => other.filter(|_| detail),
        };
        turns.push(TurnRecord {
            user_acts: std::mem::take(&mut user_acts),
            hypotheses,
            state: detail.then(|| state.clone()),
            selection,
            system_acts: acts.clone(),
            reward,
        });
        state = domain.tracker.update_with_system_acts(&state, &acts);
        if outcome.hung_up {
            break;
        }
        user_acts = outcome.true_acts;
    }
    Ok((
        EpisodeLog {
            fingerprint: settings.fingerprint.clone(),
            goal,
            length: turns.len(),
            turns,
            success: user.completed,
            total_reward: total,
        },
        traces,
    ))
}

/// A hand-written policy that completes every dialogue when input is clean:
/// signal problems, answer social obligations, ask for each unknown slot,
/// offer, then answer requests.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScriptedPolicy;

impl Responder for ScriptedPolicy {
    fn respond(
        &self,
        domain: &Domain,
        state: &DialogueState,
        realization: &RealizationConfig,
        _rng: &mut dyn rand::RngCore,
    ) -> Result<(Vec<SystemAct>, Option<SelectionTrace>)> {
        use crate::selection::{realize_answer, realize_offer};
        let act = if state.processing_problem {
            SystemAct::make(SystemActType::AutoNegative, vec![])
        } else if state.social_pending == SocialPending::Goodbye {
            SystemAct::make(SystemActType::ReturnGoodbye, vec![])
        } else if state.social_pending == SocialPending::Thanking {
            SystemAct::make(SystemActType::AcceptThanking, vec![])
        } else if let Some(i) = (0..domain.ontology.informable().len()).find(|&i| state.beliefs[i].is_none()) {
            SystemAct::request(&domain.ontology.informable()[i].name)
        } else if state.offered.is_some() && !state.requested.is_empty() {
            realize_answer(state, &domain.ontology, &domain.db)
        } else {
            realize_offer(state, &domain.ontology, &domain.db, realization)?
        };
        Ok((vec![act], None))
    }
}
