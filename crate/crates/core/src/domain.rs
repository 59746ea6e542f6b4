use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ontology::{Database, Ontology};
use crate::tracker::{FeatureMap, Tracker};

/// Where the ontology and database come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainConfig {
    /// Ontology document; the bundled restaurant domain when absent.
    pub ontology: Option<std::path::PathBuf>,
    /// Venue CSV; a generated database when absent.
    pub database: Option<std::path::PathBuf>,
    pub n_venues: usize,
    pub db_seed: u64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            ontology: None,
            database: None,
            n_venues: 100,
            db_seed: 7,
        }
    }
}

/// Ontology, database, tracker and feature layouts for one domain.
#[derive(Clone, Debug)]
pub struct Domain {
    pub ontology: Arc<Ontology>,
    pub db: Arc<Database>,
    pub tracker: Tracker,
    pub features: FeatureMap,
    pub evaluation_features: FeatureMap,
}

impl Domain {
    pub fn new(ontology: Ontology, db: Database) -> Self {
        let ontology = Arc::new(ontology);
        let features = FeatureMap::new(&ontology);
        Self {
            tracker: Tracker::new(ontology.clone()),
            evaluation_features: features.with_candidate_bits(),
            features,
            db: Arc::new(db),
            ontology,
        }
    }

    /// The restaurant domain with a generated database.
    pub fn restaurant(n_venues: usize, seed: u64) -> Result<Self> {
        let ontology = Ontology::restaurant();
        let db = Database::generate(&ontology, n_venues, seed)?;
        Ok(Self::new(ontology, db))
    }

    pub fn from_config(config: &DomainConfig, base: &Path) -> Result<Self> {
        let ontology = match &config.ontology {
            Some(p) => Ontology::load(base.join(p))?,
            None => Ontology::restaurant(),
        };
        let db = match &config.database {
            Some(p) => Database::read_csv(&ontology, base.join(p))?,
            None => Database::generate(&ontology, config.n_venues, config.db_seed)?,
        };
        Ok(Self::new(ontology, db))
    }
}
