//! Training and evaluation loops, transfer initialisation and learning curves.

pub mod config;
pub mod curves;
pub mod dialogue;
pub mod evaluation;
pub mod training;

pub use config::{ExperimentConfig, RlConfig};
pub use dialogue::{run_dialogue, DialogueSettings, EnsembleResponder, EpisodeLog, Responder, ScriptedPolicy, TurnRecord};
pub use evaluation::{run_evaluation, EvalExploration, EvalReport, EvalStats};
pub use training::{run_training, transfer_init, RunArtifacts, TrainingArtifacts};
