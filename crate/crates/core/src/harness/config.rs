use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dialogue::CreditAssignment;
use crate::actions::Scenario;
use crate::domain::DomainConfig;
use crate::error::{Error, IoContext, Result};
use crate::ontology::GoalConfig;
use crate::rl::TemperatureSchedule;
use crate::selection::{RealizationConfig, Variant};
use crate::simulator::SimulatorConfig;

/// Learning hyperparameters shared by every agent of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RlConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Fraction of the training budget over which the temperature decays.
    pub decay_fraction: f64,
    pub credit: CreditAssignment,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0005,
            discount: 1.0,
            t_start: 10.0,
            t_end: 0.5,
            decay_fraction: 0.8,
            credit: CreditAssignment::Executed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub variant: Variant,
    /// Defaults to source for mdim_src, target otherwise.
    pub scenario: Option<Scenario>,
    pub n_dialogues: u64,
    pub n_runs: usize,
    /// Base seed; run `i` uses stream `i` of this seed.
    pub seed: u64,
    pub error_rate: f64,
    pub problem_rate: f64,
    pub rl: RlConfig,
    /// Directory with mdim_src policies, either a single ensemble or one
    /// `run_<i>/final` per run.
    pub transfer_source: Option<PathBuf>,
    pub sliding_window: usize,
    /// Curve samples are emitted every this many dialogues.
    pub curve_stride: u64,
    pub checkpoint_stride: u64,
    /// Fraction of the budget at which the "partially trained" checkpoint is taken.
    pub early_checkpoint_fraction: f64,
    pub eval_dialogues: usize,
    pub out_dir: Option<PathBuf>,
    pub simulator: SimulatorConfig,
    pub goals: GoalConfig,
    pub realization: RealizationConfig,
    pub domain: DomainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::MultiDim,
            scenario: None,
            n_dialogues: 30_000,
            n_runs: 10,
            seed: 1,
            error_rate: 0.25,
            problem_rate: 0.05,
            rl: RlConfig::default(),
            transfer_source: None,
            sliding_window: 100,
            curve_stride: 100,
            checkpoint_stride: 1000,
            early_checkpoint_fraction: 0.17,
            eval_dialogues: 3000,
            out_dir: None,
            simulator: SimulatorConfig::default(),
            goals: GoalConfig::default(),
            realization: RealizationConfig::default(),
            domain: DomainConfig::default(),
        }
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl ExperimentConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario.unwrap_or_else(|| self.variant.default_scenario())
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant == Variant::MdimAda && self.transfer_source.is_none() {
            return Err(Error::Config("mdim_ada requires a transfer source".into()));
        }
        if self.variant != Variant::MdimAda && self.transfer_source.is_some() {
            return Err(Error::Config(format!("{} does not take a transfer source", self.variant)));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be positive".into()));
        }
        if self.sliding_window == 0 || (self.n_dialogues > 0 && self.sliding_window as u64 > self.n_dialogues) {
            return Err(Error::Config(format!(
                "sliding window {} must be in 1..={}",
                self.sliding_window, self.n_dialogues
            )));
        }
        if self.curve_stride == 0 || self.checkpoint_stride == 0 {
            return Err(Error::Config("strides must be positive".into()));
        }
        check_rate("error_rate", self.error_rate)?;
        check_rate("problem_rate", self.problem_rate)?;
        check_rate("early_checkpoint_fraction", self.early_checkpoint_fraction)?;
        check_rate("rl.decay_fraction", self.rl.decay_fraction)?;
        check_rate("rl.discount", self.rl.discount)?;
        if !(self.rl.learning_rate > 0.0 && self.rl.learning_rate.is_finite()) {
            return Err(Error::Config("rl.learning_rate must be positive".into()));
        }
        self.schedule()?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<TemperatureSchedule> {
        let decay = (self.n_dialogues as f64 * self.rl.decay_fraction).round() as u64;
        TemperatureSchedule::new(self.rl.t_start, self.rl.t_end, decay)
    }

    /// The "partially trained" checkpoint episode; saved in addition to the
    /// regular stride.
    pub fn early_checkpoint(&self) -> u64 {
        (self.n_dialogues as f64 * self.early_checkpoint_fraction).round() as u64
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_toml(&std::fs::read_to_string(path).at(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Short hash of the resolved configuration, stamped into episode logs.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes())[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Writes `config.toml` and `VERSION` into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).at(dir)?;
        let mut resolved = self.clone();
        resolved.scenario = Some(self.scenario());
        let path = dir.join("config.toml");
        std::fs::write(&path, resolved.to_toml()?).at(&path)?;
        let path = dir.join("VERSION");
        std::fs::write(&path, format!("{}\n", env!("CARGO_PKG_VERSION"))).at(&path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(c.n_runs, 10);
        assert_eq!(c.error_rate, 0.25);
        assert_eq!(c.problem_rate, 0.05);
        assert_eq!(c.sliding_window, 100);
        assert_eq!(c.early_checkpoint(), 5100);
        c.validate().unwrap();
    }

    #[test]
    fn mdim_ada_needs_source() {
        let c = ExperimentConfig::for_variant(Variant::MdimAda);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn window_bounded_by_budget() {
        let c = ExperimentConfig {
            n_dialogues: 50,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let empty = ExperimentConfig {
            n_dialogues: 0,
            ..ExperimentConfig::default()
        };
        empty.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig {
            variant: Variant::MdimSrc,
            transfer_source: None,
            seed: 99,
            ..ExperimentConfig::default()
        };
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.scenario(), Scenario::Source);
        let partial = ExperimentConfig::from_toml("variant = \"one_dim\"\nn_runs = 3\n").unwrap();
        assert_eq!(partial.n_runs, 3);
        assert_eq!(partial.rl, RlConfig::default());
    }
}
