//! Text chat with human users: rule-based parsing, template generation and
//! round-robin sessions over frozen ensembles.

pub mod engine;
#[cfg(feature = "server")]
pub mod http;
pub mod nlg;
pub mod nlu;

pub use engine::{ChatConfig, ChatEngine, ChatSession, PolicyPool, PoolEntry, Questionnaire, SessionStatus};
