use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dialogue::{dialogue_rng, run_dialogue, DialogueSettings, EnsembleResponder, EpisodeLog};
use super::training::PHASE_EVAL;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::rl::Exploration;
use crate::selection::AgentEnsemble;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub n_dialogues: usize,
    /// Percentage.
    pub success_rate: f64,
    pub average_length: f64,
    pub average_reward: f64,
}

impl EvalStats {
    pub fn from_logs<'a>(logs: impl IntoIterator<Item = &'a EpisodeLog>) -> Self {
        let (mut n, mut succ, mut len, mut rew) = (0usize, 0usize, 0usize, 0i64);
        for log in logs {
            n += 1;
            succ += usize::from(log.success);
            len += log.length;
            rew += log.total_reward;
        }
        if n == 0 {
            return Self::default();
        }
        let nf = n as f64;
        Self {
            n_dialogues: n,
            success_rate: 100.0 * succ as f64 / nf,
            average_length: len as f64 / nf,
            average_reward: rew as f64 / nf,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub label: String,
    #[serde(flatten)]
    pub stats: EvalStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub overall: EvalStats,
    pub per_policy: Vec<PolicyStats>,
}

impl EvalReport {
    /// Rebuilds the report from logs, where log `i` was served by pool entry
    /// `i % labels.len()`.
    pub fn from_logs(logs: &[EpisodeLog], labels: &[String]) -> Self {
        let per_policy = labels
            .iter()
            .enumerate()
            .map(|(p, label)| PolicyStats {
                label: label.clone(),
                stats: EvalStats::from_logs(logs.iter().skip(p).step_by(labels.len())),
            })
            .collect();
        Self {
            overall: EvalStats::from_logs(logs),
            per_policy,
        }
    }
}

/// Exploration during evaluation: off (greedy) or Boltzmann at a fixed temperature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvalExploration {
    Off,
    At(f64),
}

impl From<EvalExploration> for Exploration {
    fn from(e: EvalExploration) -> Self {
        match e {
            EvalExploration::Off => Exploration::Greedy,
            EvalExploration::At(t) => Exploration::Boltzmann(t),
        }
    }
}

/// Runs `n_dialogues` against a round-robin pool of frozen ensembles. Each
/// dialogue has its own seed stream, so results do not depend on scheduling.
pub fn run_evaluation(
    pool: &[(String, AgentEnsemble)],
    domain: &Domain,
    settings: &DialogueSettings,
    n_dialogues: usize,
    seed: u64,
    exploration: EvalExploration,
    detail: bool,
) -> Result<(EvalReport, Vec<EpisodeLog>)> {
    if pool.is_empty() {
        return Err(Error::Config("evaluation pool is empty".into()));
    }
    let logs = (0..n_dialogues)
        .into_par_iter()
        .map(|i| {
            let (_, ensemble) = &pool[i % pool.len()];
            let responder = EnsembleResponder {
                ensemble,
                exploration: exploration.into(),
            };
            let mut rng = dialogue_rng(seed, 0, PHASE_EVAL, i as u64);
            run_dialogue(&responder, domain, settings, &mut rng, detail, false).map(|(log, _)| log)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = pool.iter().map(|(l, _)| l.clone()).collect();
    Ok((EvalReport::from_logs(&logs, &labels), logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::Scenario;
    use crate::selection::Variant;

    #[test]
    fn greedy_evaluation_is_deterministic_and_recomputable() {
        let d = Domain::restaurant(100, 7).unwrap();
        let settings = DialogueSettings::new(&d, 0.25, 0.05).unwrap();
        let pool = vec![
            ("a".to_string(), AgentEnsemble::fresh(Variant::MultiDim, Scenario::Target, &d)),
            ("b".to_string(), AgentEnsemble::fresh(Variant::OneDim, Scenario::Target, &d)),
        ];
        let (r1, logs) = run_evaluation(&pool, &d, &settings, 40, 3, EvalExploration::Off, false).unwrap();
        let (r2, _) = run_evaluation(&pool, &d, &settings, 40, 3, EvalExploration::Off, false).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.per_policy[0].stats.n_dialogues, 20);
        assert_eq!(EvalReport::from_logs(&logs, &["a".into(), "b".into()]), r1);
    }

    #[test]
    fn empty_pool_is_rejected() {
        let d = Domain::restaurant(100, 7).unwrap();
        let settings = DialogueSettings::new(&d, 0.25, 0.05).unwrap();
        assert!(run_evaluation(&[], &d, &settings, 1, 0, EvalExploration::Off, false).is_err());
    }
}
