//! Multi-dimensional statistical dialogue management: ontology and database,
//! dialogue acts, belief tracking, an agenda-based user simulator, linear
//! Monte Carlo agents, and the training/evaluation harness.

pub mod actions;
pub mod chat;
pub mod acts;
pub mod domain;
pub mod error;
pub mod harness;
pub mod ontology;
pub mod reward;
pub mod rl;
pub mod selection;
pub mod simulator;
pub mod tracker;

pub use error::{Error, Result};
