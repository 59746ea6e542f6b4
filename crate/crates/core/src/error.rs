use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ontology: {0}")]
    Ontology(String),
    #[error("informable slot `{0}` has an empty value list")]
    EmptySlot(String),
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("database is empty")]
    EmptyDatabase,
    #[error("no satisfiable goal found after {0} attempts")]
    Unsatisfiable(usize),
    #[error("cannot parse dialogue act `{text}`: {reason}")]
    ActParse { text: String, reason: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("feature length mismatch: expected {expected}, got {got}")]
    FeatureLength { expected: usize, got: usize },
    #[error("action mask allows no action")]
    EmptyMask,
    #[error("non-finite value during policy update")]
    NonFinite,
    #[error("incompatible policy: {0}")]
    Incompatible(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` has ended")]
    SessionEnded(String),
    #[error("session `{0}` already has a questionnaire")]
    AlreadySubmitted(String),
    #[error("session `{0}` is still live")]
    SessionLive(String),
    #[error("invalid questionnaire: {0}")]
    Questionnaire(String),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::File {
            path: path.into(),
            source,
        })
    }
}
