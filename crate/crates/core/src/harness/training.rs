use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::curves::{write_run_curves, CurveRow};
use super::dialogue::{dialogue_rng, run_dialogue, DialogueSettings, EnsembleResponder};
use crate::actions::{AgentKind, Scenario};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::rl::Exploration;
use crate::selection::{load_policy, AgentEnsemble, Variant};

pub(crate) const PHASE_TRAIN: u64 = 0;
pub(crate) const PHASE_EVAL: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Dialogues completed so far.
    pub episode: u64,
    /// Success percentage over the sliding window.
    pub window_success: f64,
    pub window_reward: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub success: bool,
    pub length: u32,
    pub total_reward: i32,
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub run: usize,
    pub curve: Vec<CurvePoint>,
    pub episodes: Vec<EpisodeSummary>,
    pub final_ensemble: AgentEnsemble,
    /// Snapshots keyed by dialogues completed.
    pub checkpoints: Vec<(u64, AgentEnsemble)>,
}

impl RunArtifacts {
    pub fn checkpoint(&self, episode: u64) -> Option<&AgentEnsemble> {
        self.checkpoints.iter().find(|(e, _)| *e == episode).map(|(_, c)| c)
    }
}

#[derive(Clone, Debug)]
pub struct TrainingArtifacts {
    pub config: ExperimentConfig,
    pub runs: Vec<RunArtifacts>,
}

impl TrainingArtifacts {
    pub fn curve_rows(&self) -> Vec<CurveRow> {
        self.runs
            .iter()
            .flat_map(|r| {
                r.curve.iter().map(move |p| CurveRow {
                    variant: self.config.variant.to_string(),
                    run: r.run,
                    episode: p.episode,
                    window_success: p.window_success,
                    window_reward: p.window_reward,
                })
            })
            .collect()
    }

    /// Writes resolved config, per-run final and checkpoint policies, and curves.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.config.write_resolved(dir)?;
        for run in &self.runs {
            let run_dir = run_dir(dir, run.run);
            run.final_ensemble.save(run_dir.join("final"))?;
            for (episode, ensemble) in &run.checkpoints {
                ensemble.save(checkpoint_dir(dir, run.run, *episode))?;
            }
        }
        write_run_curves(&self.curve_rows(), dir.join("curves.csv"))
    }
}

pub fn run_dir(root: &Path, run: usize) -> PathBuf {
    root.join(format!("run_{run}"))
}

pub fn checkpoint_dir(root: &Path, run: usize, episode: u64) -> PathBuf {
    run_dir(root, run).join("checkpoints").join(format!("ep_{episode:06}"))
}

/// Picks the source ensemble for `run`: either `dir` itself or `dir/run_<run>/final`.
pub fn resolve_transfer_dir(dir: &Path, run: usize) -> Result<PathBuf> {
    if dir.join("manifest.json").is_file() {
        return Ok(dir.to_path_buf());
    }
    let per_run = run_dir(dir, run).join("final");
    if per_run.join("manifest.json").is_file() {
        return Ok(per_run);
    }
    Err(Error::Incompatible(format!(
        "no policies for run {run} under {}",
        dir.display()
    )))
}

/// Target-scenario ensemble whose AutoFeedback and SOM policies are copied
/// from the source ensemble in `source_dir`; Task and Evaluation start fresh.
pub fn transfer_init(domain: &Domain, source_dir: &Path) -> Result<AgentEnsemble> {
    let mut ensemble = AgentEnsemble::fresh(Variant::MdimAda, Scenario::Target, domain);
    for kind in [AgentKind::AutoFeedback, AgentKind::Som] {
        let file = source_dir.join(format!("{}.json", kind.label()));
        let policy = load_policy(&file, kind, Scenario::Target, domain)?;
        *ensemble.policy_mut(kind).expect("multi-dimensional ensemble") = policy;
    }
    Ok(ensemble)
}

fn initial_ensembles(config: &ExperimentConfig, domain: &Domain) -> Result<Vec<AgentEnsemble>> {
    (0..config.n_runs)
        .map(|run| match (&config.transfer_source, config.variant) {
            (Some(src), Variant::MdimAda) => transfer_init(domain, &resolve_transfer_dir(src, run)?),
            _ => Ok(AgentEnsemble::fresh(config.variant, config.scenario(), domain)),
        })
        .collect()
}

/// Trains every run (in parallel) and saves artifacts when `out_dir` is set.
pub fn run_training(config: &ExperimentConfig, domain: &Domain) -> Result<TrainingArtifacts> {
    config.validate()?;
    let initial = initial_ensembles(config, domain)?;
    let runs = initial
        .into_par_iter()
        .enumerate()
        .map(|(run, ensemble)| train_run(config, domain, run, ensemble))
        .collect::<Result<Vec<_>>>()?;
    let artifacts = TrainingArtifacts {
        config: config.clone(),
        runs,
    };
    if let Some(dir) = &config.out_dir {
        artifacts.save(dir)?;
    }
    Ok(artifacts)
}

pub fn dialogue_settings(config: &ExperimentConfig, domain: &Domain, error_rate: f64) -> Result<DialogueSettings> {
    let mut settings = DialogueSettings::new(domain, error_rate, config.problem_rate)?;
    settings.simulator = config.simulator.clone();
    settings.goals = config.goals.clone();
    settings.realization = config.realization.clone();
    settings.credit = config.rl.credit;
    settings.fingerprint = config.fingerprint();
    Ok(settings)
}

/// One training run: Boltzmann exploration on the decaying schedule, a Monte
/// Carlo update of every agent after each dialogue.
pub fn train_run(config: &ExperimentConfig, domain: &Domain, run: usize, mut ensemble: AgentEnsemble) -> Result<RunArtifacts> {
    let schedule = config.schedule()?;
    let settings = dialogue_settings(config, domain, config.error_rate)?;
    let early = config.early_checkpoint();
    let mut window: VecDeque<(bool, i64)> = VecDeque::with_capacity(config.sliding_window);
    let mut curve = Vec::new();
    let mut episodes = Vec::with_capacity(config.n_dialogues as usize);
    let mut checkpoints = Vec::new();
    for episode in 0..config.n_dialogues {
        let temperature = schedule.temperature_at(episode);
        let mut rng = dialogue_rng(config.seed, run as u64, PHASE_TRAIN, episode);
        let responder = EnsembleResponder {
            ensemble: &ensemble,
            exploration: Exploration::Boltzmann(temperature),
        };
        let (log, traces) = run_dialogue(&responder, domain, &settings, &mut rng, false, true)?;
        for (kind, steps) in &traces.agents {
            let policy = ensemble
                .policy_mut(*kind)
                .ok_or_else(|| Error::Contract(format!("trace for missing agent {}", kind.label())))?;
            policy.mc_update(steps, config.rl.learning_rate, config.rl.discount)?;
        }
        episodes.push(EpisodeSummary {
            success: log.success,
            length: log.length as u32,
            total_reward: log.total_reward as i32,
        });
        if window.len() == config.sliding_window {
            window.pop_front();
        }
        window.push_back((log.success, log.total_reward));
        let done = episode + 1;
        if done % config.curve_stride == 0 || done == early {
            let n = window.len() as f64;
            curve.push(CurvePoint {
                episode: done,
                window_success: 100.0 * window.iter().filter(|(s, _)| *s).count() as f64 / n,
                window_reward: window.iter().map(|(_, r)| *r as f64).sum::<f64>() / n,
            });
        }
        if done % config.checkpoint_stride == 0 || done == early {
            let mut snapshot = ensemble.clone();
            snapshot.set_episodes(done, config.seed);
            checkpoints.push((done, snapshot));
        }
    }
    ensemble.set_episodes(config.n_dialogues, config.seed);
    Ok(RunArtifacts {
        run,
        curve,
        episodes,
        final_ensemble: ensemble,
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(variant: Variant) -> ExperimentConfig {
        ExperimentConfig {
            variant,
            n_dialogues: 300,
            n_runs: 2,
            sliding_window: 50,
            curve_stride: 50,
            checkpoint_stride: 100,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn zero_budget_gives_empty_curves_and_zero_weights() {
        let d = Domain::restaurant(100, 7).unwrap();
        let config = ExperimentConfig {
            n_dialogues: 0,
            n_runs: 1,
            ..ExperimentConfig::default()
        };
        let a = run_training(&config, &d).unwrap();
        assert!(a.runs[0].curve.is_empty());
        for (_, p) in a.runs[0].final_ensemble.agents() {
            assert!(p.all_weights().iter().all(|w| *w == 0.0));
        }
    }

    #[test]
    fn training_is_reproducible_and_checkpointed() {
        let d = Domain::restaurant(100, 7).unwrap();
        let config = small(Variant::OneDim);
        let a = run_training(&config, &d).unwrap();
        let b = run_training(&config, &d).unwrap();
        assert_eq!(a.runs[1].final_ensemble, b.runs[1].final_ensemble);
        assert_eq!(a.runs[1].curve, b.runs[1].curve);
        assert_ne!(a.runs[0].final_ensemble, a.runs[1].final_ensemble);
        let eps: Vec<u64> = a.runs[0].checkpoints.iter().map(|(e, _)| *e).collect();
        assert_eq!(eps, [51, 100, 200, 300]);
        assert_eq!(a.runs[0].curve.len(), 7);
        assert!(a.runs[0].curve.iter().all(|p| (0.0..=100.0).contains(&p.window_success)));
    }

    #[test]
    fn transfer_copies_only_task_independent_policies() {
        let d = Domain::restaurant(100, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let src = run_training(&small(Variant::MdimSrc), &d).unwrap();
        src.runs[0].final_ensemble.save(dir.path()).unwrap();
        let ada = transfer_init(&d, dir.path()).unwrap();
        let source = &src.runs[0].final_ensemble;
        for kind in [AgentKind::AutoFeedback, AgentKind::Som] {
            assert_eq!(
                ada.policy(kind).unwrap().all_weights(),
                source.policy(kind).unwrap().all_weights()
            );
        }
        for kind in [AgentKind::Task, AgentKind::Evaluation] {
            assert!(ada.policy(kind).unwrap().all_weights().iter().all(|w| *w == 0.0));
        }
        assert_eq!(ada.policy(AgentKind::Task).unwrap().n_actions(), 6);
    }

    #[test]
    fn incompatible_transfer_source_fails_before_training() {
        let d = Domain::restaurant(100, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        AgentEnsemble::fresh(Variant::OneDim, Scenario::Target, &d).save(dir.path()).unwrap();
        let config = ExperimentConfig {
            transfer_source: Some(dir.path().to_path_buf()),
            ..small(Variant::MdimAda)
        };
        assert!(run_training(&config, &d).is_err());
    }
}
