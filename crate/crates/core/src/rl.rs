//! Monte Carlo control with linear value-function approximation.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{ActionSet, AgentKind, Scenario};
use crate::error::{Error, IoContext, Result};

const POLICY_FORMAT: &str = "mdim-policy";
const POLICY_VERSION: u32 = 1;

/// Identifies what a weight matrix means: the agent kind and its ordered
/// action labels, plus the feature layout it was trained on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySignature {
    pub kind: AgentKind,
    pub actions: Vec<String>,
    pub feature_length: usize,
    pub feature_map_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub episodes: u64,
    pub seed: u64,
}

/// One weight vector per action over a fixed feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPolicy {
    action_set: ActionSet,
    signature: PolicySignature,
    /// Row-major: `weights[a * feature_length + i]`.
    weights: Vec<f64>,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    format: String,
    version: u32,
    scenario: Scenario,
    #[serde(flatten)]
    signature: PolicySignature,
    metadata: TrainingMetadata,
    weights: Vec<Vec<f64>>,
}

impl LinearPolicy {
    /// Zero-initialised policy.
    pub fn new(action_set: ActionSet, feature_length: usize, feature_map_hash: impl Into<String>) -> Self {
        let signature = PolicySignature {
            kind: action_set.kind,
            actions: action_set.labels(),
            feature_length,
            feature_map_hash: feature_map_hash.into(),
        };
        Self {
            weights: vec![0.0; action_set.len() * feature_length],
            action_set,
            signature,
            metadata: TrainingMetadata::default(),
        }
    }

    pub fn action_set(&self) -> &ActionSet {
        &self.action_set
    }

    pub fn signature(&self) -> &PolicySignature {
        &self.signature
    }

    pub fn n_actions(&self) -> usize {
        self.action_set.len()
    }

    pub fn feature_length(&self) -> usize {
        self.signature.feature_length
    }

    pub fn weights(&self, action: usize) -> &[f64] {
        let n = self.feature_length();
        &self.weights[action * n..(action + 1) * n]
    }

    pub fn weights_mut(&mut self, action: usize) -> &mut [f64] {
        let n = self.feature_length();
        &mut self.weights[action * n..(action + 1) * n]
    }

    pub fn all_weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_features(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.feature_length() {
            return Err(Error::FeatureLength {
                expected: self.feature_length(),
                got: features.len(),
            });
        }
        Ok(())
    }

    pub fn q_value(&self, features: &[f64], action: usize) -> Result<f64> {
        self.check_features(features)?;
        if action >= self.n_actions() {
            return Err(Error::Contract(format!("action index {action} out of range")));
        }
        Ok(dot(self.weights(action), features))
    }

    pub fn q_values(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_features(features)?;
        Ok((0..self.n_actions()).map(|a| dot(self.weights(a), features)).collect())
    }

    /// Picks an action among those allowed by `mask`.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        features: &[f64],
        mask: &[bool],
        exploration: Exploration,
        rng: &mut R,
    ) -> Result<ActionChoice> {
        if mask.len() != self.n_actions() {
            return Err(Error::Contract(format!(
                "mask has {} entries for {} actions",
                mask.len(),
                self.n_actions()
            )));
        }
        let q = self.q_values(features)?;
        select_from_values(&q, mask, exploration, rng)
    }

    /// Every-visit Monte Carlo update towards the observed returns.
    pub fn mc_update(&mut self, trace: &[TraceStep], learning_rate: f64, discount: f64) -> Result<()> {
        if trace.is_empty() {
            return Err(Error::Contract("empty episode trace".into()));
        }
        let returns = discounted_returns(trace.iter().map(|s| s.reward), discount);
        if returns.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite);
        }
        for (step, g) in trace.iter().zip(returns) {
            let q = self.q_value(&step.features, step.action)?;
            let delta = learning_rate * (g - q);
            if delta == 0.0 {
                continue;
            }
            for (w, x) in self.weights_mut(step.action).iter_mut().zip(&step.features) {
                *w += delta * x;
            }
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = PolicyFile {
            format: POLICY_FORMAT.to_string(),
            version: POLICY_VERSION,
            scenario: self.action_set.scenario,
            signature: self.signature.clone(),
            metadata: self.metadata.clone(),
            weights: (0..self.n_actions()).map(|a| self.weights(a).to_vec()).collect(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text).at(path)
    }

    /// Loads a policy and checks it against the action set and feature layout
    /// the caller expects.
    pub fn load(path: impl AsRef<Path>, expected_actions: ActionSet, feature_length: usize, feature_map_hash: &str) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).at(path)?;
        let file: PolicyFile = serde_json::from_str(&text)?;
        if file.format != POLICY_FORMAT || file.version != POLICY_VERSION {
            return Err(Error::Incompatible(format!(
                "{}: unsupported format {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        let mut policy = Self::new(expected_actions, feature_length, feature_map_hash);
        if file.signature != policy.signature {
            return Err(Error::Incompatible(format!(
                "{}: expected {} policy over {:?} with {} features (map {}), found {} over {:?} with {} features (map {})",
                path.display(),
                policy.signature.kind,
                policy.signature.actions,
                policy.signature.feature_length,
                short(&policy.signature.feature_map_hash),
                file.signature.kind,
                file.signature.actions,
                file.signature.feature_length,
                short(&file.signature.feature_map_hash),
            )));
        }
        if file.weights.len() != policy.n_actions()
            || file.weights.iter().any(|row| row.len() != feature_length)
        {
            return Err(Error::Incompatible(format!("{}: weight matrix shape mismatch", path.display())));
        }
        policy.weights = file.weights.into_iter().flatten().collect();
        policy.metadata = file.metadata;
        Ok(policy)
    }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `G_t = r_t + discount * G_{t+1}`.
pub fn discounted_returns(rewards: impl DoubleEndedIterator<Item = f64> + ExactSizeIterator, discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for (i, r) in rewards.enumerate().rev() {
        g = r + discount * g;
        out[i] = g;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "temperature", rename_all = "lowercase")]
pub enum Exploration {
    /// Argmax over the mask, lowest index on ties.
    Greedy,
    /// Softmax over `q / temperature`.
    Boltzmann(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionChoice {
    pub action: usize,
    /// Selection probability per action; zero outside the mask.
    pub probabilities: Vec<f64>,
}

/// Softmax over the masked entries of `q / temperature`.
pub fn masked_softmax(q: &[f64], mask: &[bool], temperature: f64) -> Result<Vec<f64>> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    if !(temperature > 0.0) {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    let max = q
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = q
        .iter()
        .zip(mask)
        .map(|(v, &m)| if m { ((v - max) / temperature).exp() } else { 0.0 })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    Ok(p)
}

pub fn masked_argmax(q: &[f64], mask: &[bool]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &m)) in q.iter().zip(mask).enumerate() {
        if m && best.is_none_or(|b| v > q[b]) {
            best = Some(i);
        }
    }
    best.ok_or(Error::EmptyMask)
}

pub fn select_from_values<R: Rng + ?Sized>(
    q: &[f64],
    mask: &[bool],
    exploration: Exploration,
    rng: &mut R,
) -> Result<ActionChoice> {
    match exploration {
        Exploration::Greedy => {
            let action = masked_argmax(q, mask)?;
            let mut probabilities = vec![0.0; q.len()];
            probabilities[action] = 1.0;
            Ok(ActionChoice { action, probabilities })
        }
        Exploration::Boltzmann(t) => {
            let probabilities = masked_softmax(q, mask, t)?;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut action = None;
            for (i, p) in probabilities.iter().enumerate() {
                if *p > 0.0 {
                    acc += p;
                    action = Some(i);
                    if u < acc {
                        break;
                    }
                }
            }
            Ok(ActionChoice {
                action: action.ok_or(Error::EmptyMask)?,
                probabilities,
            })
        }
    }
}

/// Linear decay from `t_start` at episode 0 to `t_end` at `decay_episodes`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub t_start: f64,
    pub t_end: f64,
    pub decay_episodes: u64,
}

impl TemperatureSchedule {
    pub fn new(t_start: f64, t_end: f64, decay_episodes: u64) -> Result<Self> {
        if !(t_end > 0.0 && t_start >= t_end) {
            return Err(Error::Config(format!(
                "temperature schedule needs t_start >= t_end > 0, got {t_start} -> {t_end}"
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            decay_episodes,
        })
    }

    pub fn temperature_at(&self, episode: u64) -> f64 {
        if self.decay_episodes == 0 || episode >= self.decay_episodes {
            return self.t_end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.t_start + (self.t_end - self.t_start) * frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub features: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}
