//! Chat sessions against frozen ensembles.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acts::{SystemActType, UserActType};
use crate::domain::Domain;
use crate::error::{Error, IoContext, Result};
use crate::harness::curves::mean_std;
use crate::ontology::{sample_goal, GoalConfig, UserGoal, DONTCARE};
use crate::rl::Exploration;
use crate::selection::{select_response, AgentEnsemble, RealizationConfig};
use crate::tracker::DialogueState;

use super::nlg::Generator;
use super::nlu::parse_utterance;

const COUNTER_FILE: &str = "pool_counter";
const RESULTS_FILE: &str = "results.jsonl";
const TRANSCRIPT_DIR: &str = "transcripts";

/// A frozen ensemble served to users under a display label.
#[derive(Clone, Debug)]
pub struct PoolEntry {
    pub label: String,
    pub ensemble: Arc<AgentEnsemble>,
}

/// Frozen ensembles assigned to new sessions in round-robin order. The
/// counter survives restarts when a state directory is configured.
#[derive(Debug)]
pub struct PolicyPool {
    entries: Vec<PoolEntry>,
    counter: Mutex<u64>,
    counter_path: Option<PathBuf>,
}

impl PolicyPool {
    pub fn new(entries: Vec<PoolEntry>, state_dir: Option<&Path>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("policy pool is empty".into()));
        }
        let counter_path = state_dir.map(|d| d.join(COUNTER_FILE));
        let counter = match &counter_path {
            Some(p) if p.exists() => {
                let text = std::fs::read_to_string(p).at(p)?;
                text.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("corrupt pool counter in {}", p.display())))?
            }
            _ => 0,
        };
        Ok(Self {
            entries,
            counter: Mutex::new(counter),
            counter_path,
        })
    }

    /// Loads every ensemble directory; labels default to the directory name.
    pub fn load(dirs: &[(String, PathBuf)], domain: &Domain, state_dir: Option<&Path>) -> Result<Self> {
        let entries = dirs
            .iter()
            .map(|(label, dir)| {
                Ok(PoolEntry {
                    label: label.clone(),
                    ensemble: Arc::new(AgentEnsemble::load(dir, domain)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, state_dir)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    /// Next index, counter + 1, persisted before returning.
    pub fn assign(&self) -> Result<usize> {
        let mut counter = self.counter.lock().expect("pool counter poisoned");
        let index = (*counter % self.entries.len() as u64) as usize;
        let next = *counter + 1;
        if let Some(path) = &self.counter_path {
            std::fs::write(path, next.to_string()).at(path)?;
        }
        *counter = next;
        Ok(index)
    }

    pub fn counter(&self) -> u64 {
        *self.counter.lock().expect("pool counter poisoned")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Live,
    Ended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub speaker: Speaker,
    pub text: String,
    /// Serialized dialogue acts; empty when the user turn was not understood.
    pub acts: Vec<String>,
    pub timestamp: f64,
}

/// Post-dialogue questionnaire: Q1–Q2 yes/no, Q3–Q6 on a 1–6 scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub q1: bool,
    pub q2: bool,
    pub q3: i64,
    pub q4: i64,
    pub q5: i64,
    pub q6: i64,
}

impl Questionnaire {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q3", self.q3), ("q4", self.q4), ("q5", self.q5), ("q6", self.q6)] {
            if !(1..=6).contains(&v) {
                return Err(Error::Questionnaire(format!("{name} must be in 1..=6, got {v}")));
            }
        }
        Ok(())
    }

    fn scores(&self) -> [f64; 6] {
        let pct = |b: bool| if b { 100.0 } else { 0.0 };
        [pct(self.q1), pct(self.q2), self.q3 as f64, self.q4 as f64, self.q5 as f64, self.q6 as f64]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChatSession {
    pub id: String,
    pub policy_index: usize,
    pub policy_label: String,
    #[serde(skip)]
    pub state: DialogueState,
    pub goal: Option<UserGoal>,
    pub task_card: Option<String>,
    pub transcript: Vec<TranscriptEntry>,
    pub started_at: f64,
    pub ended_at: Option<f64>,
    pub status: SessionStatus,
    pub questionnaire: Option<Questionnaire>,
    #[serde(skip)]
    rng: Option<ChaCha8Rng>,
}

impl ChatSession {
    /// User turns so far.
    pub fn turns(&self) -> usize {
        self.transcript.iter().filter(|e| e.speaker == Speaker::User).count()
    }
}

/// One stored questionnaire submission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub session_id: String,
    pub policy_index: usize,
    pub policy_label: String,
    pub turns: usize,
    pub started_at: f64,
    pub ended_at: f64,
    pub transcript: PathBuf,
    pub answers: Questionnaire,
}

/// Per-label questionnaire summary; Q1–Q2 are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireSummary {
    pub label: String,
    pub n: usize,
    pub average_length: f64,
    pub mean: [f64; 6],
    pub std: [f64; 6],
}

/// Mean and standard deviation of every question, per policy label.
pub fn aggregate(records: &[ResultRecord]) -> Vec<QuestionnaireSummary> {
    let mut groups: BTreeMap<&str, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.policy_label).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(label, rs)| {
            let mut mean = [0.0; 6];
            let mut std = [0.0; 6];
            for q in 0..6 {
                let xs: Vec<f64> = rs.iter().map(|r| r.answers.scores()[q]).collect();
                (mean[q], std[q]) = mean_std(&xs);
            }
            QuestionnaireSummary {
                label: label.to_string(),
                n: rs.len(),
                average_length: rs.iter().map(|r| r.turns as f64).sum::<f64>() / rs.len() as f64,
                mean,
                std,
            }
        })
        .collect()
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).at(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.at(path)?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatConfig {
    /// Where the pool counter, results log and transcripts live; nothing is
    /// persisted when absent.
    pub state_dir: Option<PathBuf>,
    /// Patience limit: the session ends after this many user turns.
    pub max_turns: usize,
    pub task_cards: bool,
    pub goals: GoalConfig,
    pub realization: RealizationConfig,
    pub seed: u64,
}

impl Default for ChatConfig {
    fn default() -> Self {
        Self {
            state_dir: None,
            max_turns: 30,
            task_cards: true,
            goals: GoalConfig::default(),
            realization: RealizationConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub task_card: Option<String>,
    pub policy_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnResponse {
    pub utterance: String,
    pub acts: Vec<String>,
    pub status: SessionStatus,
}

/// The chat service proper, independent of any transport.
pub struct ChatEngine {
    domain: Domain,
    pool: PolicyPool,
    generator: Generator,
    config: ChatConfig,
    sessions: Mutex<HashMap<String, Arc<Mutex<ChatSession>>>>,
    seeder: Mutex<ChaCha8Rng>,
    results: Mutex<()>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl ChatEngine {
    /// Builds the engine; template validation happens here, never mid-dialogue.
    pub fn new(domain: Domain, pool: PolicyPool, config: ChatConfig) -> Result<Self> {
        if config.max_turns == 0 {
            return Err(Error::Config("max_turns must be positive".into()));
        }
        if let Some(dir) = &config.state_dir {
            std::fs::create_dir_all(dir.join(TRANSCRIPT_DIR)).at(dir)?;
        }
        let generator = Generator::new(&domain.ontology)?;
        let seed = if config.seed == 0 { rand::rng().random() } else { config.seed };
        Ok(Self {
            domain,
            pool,
            generator,
            config,
            sessions: Mutex::new(HashMap::new()),
            seeder: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            results: Mutex::new(()),
        })
    }

    pub fn pool(&self) -> &PolicyPool {
        &self.pool
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn results_path(&self) -> Option<PathBuf> {
        self.config.state_dir.as_ref().map(|d| d.join(RESULTS_FILE))
    }

    pub fn create_session(&self) -> Result<SessionCreated> {
        let policy_index = self.pool.assign()?;
        let mut rng = {
            let mut seeder = self.seeder.lock().expect("seeder poisoned");
            ChaCha8Rng::seed_from_u64(seeder.random())
        };
        let id = format!("{:016x}", rng.random::<u64>());
        let goal = if self.config.task_cards {
            Some(sample_goal(&self.domain.ontology, &self.domain.db, &self.config.goals, &mut rng)?)
        } else {
            None
        };
        let task_card = goal.as_ref().map(task_card);
        let session = ChatSession {
            id: id.clone(),
            policy_index,
            policy_label: self.pool.entries[policy_index].label.clone(),
            state: self.domain.tracker.init_state(),
            goal,
            task_card: task_card.clone(),
            transcript: Vec::new(),
            started_at: now(),
            ended_at: None,
            status: SessionStatus::Live,
            questionnaire: None,
            rng: Some(rng),
        };
        self.sessions
            .lock()
            .expect("session table poisoned")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(SessionCreated {
            session_id: id,
            task_card,
            policy_index,
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<ChatSession>>> {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    /// Snapshot of a session.
    pub fn get_session(&self, id: &str) -> Result<ChatSession> {
        Ok(self.session(id)?.lock().expect("session poisoned").clone())
    }

    /// Parses the user's text, selects a response greedily and renders it.
    /// Never updates any policy.
    pub fn post_turn(&self, id: &str, text: &str) -> Result<TurnResponse> {
        let handle = self.session(id)?;
        let mut s = handle.lock().expect("session poisoned");
        if s.status == SessionStatus::Ended {
            return Err(Error::SessionEnded(id.to_string()));
        }
        let ontology = &self.domain.ontology;
        let hyps = parse_utterance(text, ontology);
        s.transcript.push(TranscriptEntry {
            speaker: Speaker::User,
            text: text.to_string(),
            acts: hyps.iter().flatten().map(|h| h.act.to_string()).collect(),
            timestamp: now(),
        });
        let state = self.domain.tracker.update_with_user_input(&s.state, hyps.as_deref());
        let ensemble = &self.pool.entries[s.policy_index].ensemble;
        let rng = s.rng.as_mut().expect("live session has an rng");
        let (acts, _) = select_response(ensemble, &self.domain, &state, &self.config.realization, Exploration::Greedy, rng)?;
        let utterance = self.generator.generate(&acts)?;
        s.state = self.domain.tracker.update_with_system_acts(&state, &acts);
        let serialized: Vec<String> = acts.iter().map(|a| a.to_string()).collect();
        s.transcript.push(TranscriptEntry {
            speaker: Speaker::System,
            text: utterance.clone(),
            acts: serialized.clone(),
            timestamp: now(),
        });
        // Same hang-up rule as the simulated user: a goodbye from either side.
        let goodbye = state.last_user_acts.contains(&UserActType::Bye)
            || acts.iter().any(|a| a.kind == SystemActType::ReturnGoodbye);
        if goodbye || s.turns() >= self.config.max_turns {
            s.status = SessionStatus::Ended;
            s.ended_at = Some(now());
        }
        Ok(TurnResponse {
            utterance,
            acts: serialized,
            status: s.status,
        })
    }

    /// The user hangs up. Idempotent.
    pub fn end_session(&self, id: &str) -> Result<ChatSession> {
        let handle = self.session(id)?;
        let mut s = handle.lock().expect("session poisoned");
        if s.status == SessionStatus::Live {
            s.status = SessionStatus::Ended;
            s.ended_at = Some(now());
        }
        Ok(s.clone())
    }

    /// Validates and stores the questionnaire of an ended session.
    pub fn submit_questionnaire(&self, id: &str, answers: Questionnaire) -> Result<ResultRecord> {
        let handle = self.session(id)?;
        let mut s = handle.lock().expect("session poisoned");
        if s.status != SessionStatus::Ended {
            return Err(Error::SessionLive(id.to_string()));
        }
        if s.questionnaire.is_some() {
            return Err(Error::AlreadySubmitted(id.to_string()));
        }
        answers.validate()?;
        let transcript = PathBuf::from(TRANSCRIPT_DIR).join(format!("{}.json", s.id));
        let record = ResultRecord {
            session_id: s.id.clone(),
            policy_index: s.policy_index,
            policy_label: s.policy_label.clone(),
            turns: s.turns(),
            started_at: s.started_at,
            ended_at: s.ended_at.unwrap_or_else(now),
            transcript: transcript.clone(),
            answers: answers.clone(),
        };
        if let Some(dir) = &self.config.state_dir {
            let _guard = self.results.lock().expect("results log poisoned");
            let path = dir.join(&transcript);
            std::fs::write(&path, serde_json::to_vec_pretty(&*s)?).at(&path)?;
            let log = dir.join(RESULTS_FILE);
            let mut file = OpenOptions::new().create(true).append(true).open(&log).at(&log)?;
            writeln!(file, "{}", serde_json::to_string(&record)?).at(&log)?;
        }
        s.questionnaire = Some(answers);
        Ok(record)
    }
}

/// Task description shown to the user, e.g. "You are looking for a
/// moderately priced French restaurant in the north. Ask for its phone number."
pub fn task_card(goal: &UserGoal) -> String {
    let get = |slot: &str| goal.constraint(slot).filter(|v| *v != DONTCARE);
    let mut text = String::from("You are looking for a ");
    if let Some(p) = get("pricerange") {
        text.push_str(if p == "moderate" { "moderately priced " } else { p });
        if p != "moderate" {
            text.push(' ');
        }
    }
    if let Some(f) = get("food") {
        let mut c = f.chars();
        if let Some(first) = c.next() {
            text.extend(first.to_uppercase());
            text.push_str(c.as_str());
            text.push(' ');
        }
    }
    text.push_str("restaurant");
    if let Some(a) = get("area") {
        text.push_str(&format!(" in the {a}"));
    }
    for (slot, value) in &goal.constraints {
        if !matches!(slot.as_str(), "pricerange" | "food" | "area") && value != DONTCARE {
            text.push_str(&format!(" with {slot} {value}"));
        }
    }
    text.push('.');
    let asks: Vec<&str> = goal
        .requests
        .iter()
        .filter(|r| r.as_str() != crate::ontology::NAME_SLOT)
        .map(|r| match r.as_str() {
            "phone" => "phone number",
            other => other,
        })
        .collect();
    if !asks.is_empty() {
        text.push_str(&format!(" Ask for its {}.", asks.join(" and ")));
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::Variant;

    fn engine(pool_size: usize, state_dir: Option<&Path>) -> ChatEngine {
        let domain = Domain::restaurant(50, 3).unwrap();
        let entries = (0..pool_size)
            .map(|i| PoolEntry {
                label: format!("p{i}"),
                ensemble: Arc::new(AgentEnsemble::fresh(Variant::MultiDim, Variant::MultiDim.default_scenario(), &domain)),
            })
            .collect();
        let pool = PolicyPool::new(entries, state_dir).unwrap();
        let config = ChatConfig {
            state_dir: state_dir.map(Path::to_path_buf),
            seed: 5,
            ..Default::default()
        };
        ChatEngine::new(domain, pool, config).unwrap()
    }

    fn answers(q3: i64) -> Questionnaire {
        Questionnaire { q1: true, q2: false, q3, q4: 5, q5: 5, q6: 5 }
    }

    #[test]
    fn empty_pool_rejected() {
        assert!(PolicyPool::new(vec![], None).is_err());
    }

    #[test]
    fn round_robin_cycles() {
        let e = engine(3, None);
        let idx: Vec<usize> = (0..7).map(|_| e.create_session().unwrap().policy_index).collect();
        assert_eq!(idx, [0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn counter_survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        let e = engine(4, Some(dir.path()));
        for _ in 0..3 {
            e.create_session().unwrap();
        }
        drop(e);
        let e = engine(4, Some(dir.path()));
        assert_eq!(e.create_session().unwrap().policy_index, 3);
    }

    #[test]
    fn turns_on_ended_session_fail() {
        let e = engine(1, None);
        let id = e.create_session().unwrap().session_id;
        e.post_turn(&id, "cheap food").unwrap();
        e.end_session(&id).unwrap();
        assert!(matches!(e.post_turn(&id, "hello"), Err(Error::SessionEnded(_))));
        assert!(matches!(e.post_turn("nope", "hello"), Err(Error::UnknownSession(_))));
    }

    #[test]
    fn questionnaire_only_after_end_and_in_range() {
        let dir = tempfile::tempdir().unwrap();
        let e = engine(1, Some(dir.path()));
        let id = e.create_session().unwrap().session_id;
        assert!(e.submit_questionnaire(&id, answers(5)).is_err());
        e.end_session(&id).unwrap();
        assert!(e.submit_questionnaire(&id, answers(7)).is_err());
        assert!(e.submit_questionnaire(&id, answers(0)).is_err());
        e.submit_questionnaire(&id, answers(5)).unwrap();
        assert!(e.submit_questionnaire(&id, answers(5)).is_err());
        let records = read_results(e.results_path().unwrap()).unwrap();
        assert_eq!(records.len(), 1);
        assert!(dir.path().join(&records[0].transcript).exists());
    }

    #[test]
    fn aggregation_per_label() {
        let rec = |label: &str, q1: bool, q3: i64| ResultRecord {
            session_id: "x".into(),
            policy_index: 0,
            policy_label: label.into(),
            turns: 4,
            started_at: 0.0,
            ended_at: 1.0,
            transcript: PathBuf::new(),
            answers: Questionnaire { q1, ..answers(q3) },
        };
        let s = aggregate(&[rec("a", true, 2), rec("a", false, 4), rec("b", true, 6)]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].n, 2);
        assert_eq!(s[0].mean[0], 50.0);
        assert_eq!(s[0].mean[2], 3.0);
        assert!((s[0].std[2] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(s[1].mean[2], 6.0);
    }

    #[test]
    fn patience_limit_ends_session() {
        let domain = Domain::restaurant(50, 3).unwrap();
        let pool = PolicyPool::new(
            vec![PoolEntry {
                label: "p".into(),
                ensemble: Arc::new(AgentEnsemble::fresh(Variant::OneDim, Variant::OneDim.default_scenario(), &domain)),
            }],
            None,
        )
        .unwrap();
        let e = ChatEngine::new(domain, pool, ChatConfig { max_turns: 2, ..Default::default() }).unwrap();
        let id = e.create_session().unwrap().session_id;
        assert_eq!(e.post_turn(&id, "indian").unwrap().status, SessionStatus::Live);
        assert_eq!(e.post_turn(&id, "north").unwrap().status, SessionStatus::Ended);
    }

    #[test]
    fn task_card_reads_naturally() {
        let goal = UserGoal {
            constraints: vec![("food".into(), "french".into()), ("pricerange".into(), "moderate".into())],
            requests: vec!["name".into(), "phone".into()],
            satisfiable: true,
        };
        assert_eq!(
            task_card(&goal),
            "You are looking for a moderately priced French restaurant. Ask for its phone number."
        );
    }
}
