//! Restaurant-search domain: slots, a synthetic venue database and user goals.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

/// Value a user gives for an informable slot they have no preference on.
pub const DONTCARE: &str = "dontcare";

/// Slot naming the venue itself. Always requestable, never informable.
pub const NAME_SLOT: &str = "name";

const DEFAULT_DOCUMENT: &str = include_str!("../assets/restaurant.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InformableSlot {
    pub name: String,
    pub values: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub synonyms: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct OntologyDocument {
    #[serde(default)]
    informable: Vec<InformableSlot>,
    #[serde(default)]
    requestable: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ontology {
    informable: Vec<InformableSlot>,
    requestable: Vec<String>,
}

impl Ontology {
    /// The bundled restaurant domain.
    pub fn restaurant() -> Self {
        Self::from_toml(DEFAULT_DOCUMENT).expect("bundled ontology is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: OntologyDocument = toml::from_str(text)?;
        Self::new(doc.informable, doc.requestable)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).at(path)?;
        Self::from_toml(&text)
    }

    /// Validates and builds an ontology. Informable slots are prepended to the
    /// requestable list.
    pub fn new(informable: Vec<InformableSlot>, extra_requestable: Vec<String>) -> Result<Self> {
        if informable.is_empty() {
            return Err(Error::Ontology("no informable slots".into()));
        }
        let mut seen = BTreeSet::new();
        for slot in &informable {
            check_token(&slot.name)?;
            if slot.name == NAME_SLOT {
                return Err(Error::Ontology("`name` cannot be informable".into()));
            }
            if !seen.insert(slot.name.as_str()) {
                return Err(Error::Ontology(format!("duplicate slot `{}`", slot.name)));
            }
            if slot.values.is_empty() {
                return Err(Error::EmptySlot(slot.name.clone()));
            }
            let mut values = BTreeSet::new();
            for value in &slot.values {
                check_token(value)?;
                if value == DONTCARE {
                    return Err(Error::Ontology(format!(
                        "`{DONTCARE}` is reserved (slot `{}`)",
                        slot.name
                    )));
                }
                if !values.insert(value.as_str()) {
                    return Err(Error::Ontology(format!(
                        "duplicate value `{value}` for slot `{}`",
                        slot.name
                    )));
                }
            }
            for canonical in slot.synonyms.keys() {
                if !values.contains(canonical.as_str()) {
                    return Err(Error::Ontology(format!(
                        "synonym target `{canonical}` is not a value of `{}`",
                        slot.name
                    )));
                }
            }
        }
        let mut requestable: Vec<String> = informable.iter().map(|s| s.name.clone()).collect();
        for slot in extra_requestable {
            check_token(&slot)?;
            if !requestable.contains(&slot) {
                requestable.push(slot);
            }
        }
        if !requestable.iter().any(|s| s == NAME_SLOT) {
            requestable.push(NAME_SLOT.to_string());
        }
        Ok(Self {
            informable,
            requestable,
        })
    }

    pub fn informable(&self) -> &[InformableSlot] {
        &self.informable
    }

    pub fn informable_names(&self) -> impl Iterator<Item = &str> {
        self.informable.iter().map(|s| s.name.as_str())
    }

    pub fn requestable(&self) -> &[String] {
        &self.requestable
    }

    pub fn slot_index(&self, slot: &str) -> Option<usize> {
        self.informable.iter().position(|s| s.name == slot)
    }

    pub fn is_informable(&self, slot: &str) -> bool {
        self.slot_index(slot).is_some()
    }

    pub fn is_requestable(&self, slot: &str) -> bool {
        self.requestable.iter().any(|s| s == slot)
    }

    /// Requestable slots that carry venue information rather than constraints.
    pub fn info_slots(&self) -> impl Iterator<Item = &str> {
        self.requestable
            .iter()
            .map(String::as_str)
            .filter(|s| !self.is_informable(s) && *s != NAME_SLOT)
    }

    pub fn values(&self, slot: &str) -> Result<&[String]> {
        self.slot_index(slot)
            .map(|i| self.informable[i].values.as_slice())
            .ok_or_else(|| Error::UnknownSlot(slot.to_string()))
    }

    /// True for ontology values and for `dontcare`.
    pub fn accepts(&self, slot: &str, value: &str) -> bool {
        value == DONTCARE
            || self
                .values(slot)
                .map(|vs| vs.iter().any(|v| v == value))
                .unwrap_or(false)
    }

    /// Number of distinct full constraint profiles.
    pub fn combination_count(&self) -> usize {
        self.informable.iter().map(|s| s.values.len()).product()
    }
}

fn check_token(s: &str) -> Result<()> {
    if s.trim().is_empty() || s.contains([',', '(', ')', '=', '\n']) {
        return Err(Error::Ontology(format!("invalid name or value `{s}`")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Venue {
    pub name: String,
    /// Every slot except the name: informable values and info slots.
    pub slots: BTreeMap<String, String>,
}

impl Venue {
    pub fn get(&self, slot: &str) -> Option<&str> {
        if slot == NAME_SLOT {
            Some(&self.name)
        } else {
            self.slots.get(slot).map(String::as_str)
        }
    }

    pub fn matches(&self, constraints: &[(String, String)]) -> bool {
        constraints
            .iter()
            .all(|(slot, value)| value == DONTCARE || self.get(slot) == Some(value.as_str()))
    }
}

const NAME_HEADS: &[&str] = &[
    "Rice", "Golden", "Royal", "Little", "Old", "Blue", "Red", "Green", "Silver", "Grand",
    "Lucky", "Happy", "Copper", "Jade", "Saffron", "Olive", "Maple", "Cedar", "Amber", "Ivory",
];
const NAME_TAILS: &[&str] = &[
    "Boat", "Garden", "Kitchen", "House", "Lantern", "Table", "Spoon", "Palace", "Corner",
    "Bistro", "Terrace", "Oven", "Courtyard", "Pavilion", "Harbour",
];
const STREETS: &[&str] = &[
    "Mill Road", "King Street", "Regent Street", "Hills Road", "Bridge Street", "Castle Hill",
    "Market Square", "Trumpington Street", "Newmarket Road", "Chesterton Road",
];

/// The venue database, in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct Database {
    informable: Vec<String>,
    venues: Vec<Venue>,
}

#[derive(Deserialize)]
struct VenueRow {
    name: String,
    #[serde(flatten)]
    slots: BTreeMap<String, String>,
}

impl Database {
    /// Builds a database after checking every venue against the ontology.
    pub fn new(ontology: &Ontology, venues: Vec<Venue>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for venue in &venues {
            check_token(&venue.name)?;
            if !names.insert(venue.name.as_str()) {
                return Err(Error::Ontology(format!("duplicate venue `{}`", venue.name)));
            }
            for slot in ontology.informable() {
                let value = venue.slots.get(&slot.name).ok_or_else(|| {
                    Error::Ontology(format!("venue `{}` lacks slot `{}`", venue.name, slot.name))
                })?;
                if !slot.values.contains(value) {
                    return Err(Error::Ontology(format!(
                        "venue `{}` has out-of-ontology value `{value}` for `{}`",
                        venue.name, slot.name
                    )));
                }
            }
        }
        Ok(Self {
            informable: ontology.informable_names().map(String::from).collect(),
            venues,
        })
    }

    /// Deterministic synthetic database with `n_venues` uniquely named venues.
    pub fn generate(ontology: &Ontology, n_venues: usize, seed: u64) -> Result<Self> {
        if n_venues == 0 {
            return Err(Error::Contract("n_venues must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names: Vec<String> = NAME_HEADS
            .iter()
            .flat_map(|h| NAME_TAILS.iter().map(move |t| format!("{h} {t}")))
            .collect();
        names.shuffle(&mut rng);
        let mut venues = Vec::with_capacity(n_venues);
        for i in 0..n_venues {
            let name = names
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("Venue {}", i + 1));
            let mut slots = BTreeMap::new();
            for slot in ontology.informable() {
                let value = slot.values.choose(&mut rng).expect("non-empty").clone();
                slots.insert(slot.name.clone(), value);
            }
            for info in ontology.info_slots() {
                let value = match info {
                    "phone" => format!("01223 {:06}", rng.random_range(0..1_000_000u32)),
                    "address" => format!(
                        "{} {}",
                        rng.random_range(1..200u32),
                        STREETS.choose(&mut rng).expect("non-empty")
                    ),
                    "postcode" => format!(
                        "CB{} {}{}{}",
                        rng.random_range(1..6u32),
                        rng.random_range(1..10u32),
                        (b'A' + rng.random_range(0..26u8)) as char,
                        (b'A' + rng.random_range(0..26u8)) as char
                    ),
                    other => format!("{other} of {name}"),
                };
                slots.insert(info.to_string(), value);
            }
            venues.push(Venue { name, slots });
        }
        Self::new(ontology, venues)
    }

    pub fn venues(&self) -> &[Venue] {
        &self.venues
    }

    pub fn len(&self) -> usize {
        self.venues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.venues.is_empty()
    }

    pub fn venue(&self, name: &str) -> Option<&Venue> {
        self.venues.iter().find(|v| v.name == name)
    }

    /// Venues matching every constraint, in database order. `dontcare`
    /// constraints match everything.
    pub fn query(&self, constraints: &[(String, String)]) -> Result<Vec<&Venue>> {
        for (slot, _) in constraints {
            if !self.informable.contains(slot) {
                return Err(Error::UnknownSlot(slot.clone()));
            }
        }
        Ok(self.venues.iter().filter(|v| v.matches(constraints)).collect())
    }

    pub fn count(&self, constraints: &[(String, String)]) -> Result<usize> {
        self.query(constraints).map(|v| v.len())
    }

    /// Fraction of full constraint profiles (one value per informable slot)
    /// matched by at least one venue.
    pub fn coverage(&self, ontology: &Ontology) -> f64 {
        let profiles: BTreeSet<Vec<&str>> = self
            .venues
            .iter()
            .map(|v| ontology.informable_names().map(|s| v.get(s).unwrap_or("")).collect())
            .collect();
        profiles.len() as f64 / ontology.combination_count() as f64
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).at(path)?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, writer: W) -> Result<()> {
        // csv cannot serialize flattened maps, so rows are written by hand.
        let mut wtr = csv::Writer::from_writer(writer);
        let columns: Vec<&String> = self.venues.first().map(|v| v.slots.keys().collect()).unwrap_or_default();
        wtr.write_record(std::iter::once("name").chain(columns.iter().map(|c| c.as_str())))?;
        for venue in &self.venues {
            let values = columns.iter().map(|c| venue.slots.get(*c).map_or("", String::as_str));
            wtr.write_record(std::iter::once(venue.name.as_str()).chain(values))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv(ontology: &Ontology, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).at(path)?;
        Self::read_csv_from(ontology, file)
    }

    pub fn read_csv_from<R: std::io::Read>(ontology: &Ontology, reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut venues = Vec::new();
        for row in rdr.deserialize() {
            let row: VenueRow = row?;
            venues.push(Venue {
                name: row.name,
                slots: row.slots,
            });
        }
        Self::new(ontology, venues)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGoal {
    /// Informable slot -> required value, in ontology order.
    pub constraints: Vec<(String, String)>,
    /// Requested slots, in ontology order.
    pub requests: Vec<String>,
    pub satisfiable: bool,
}

impl UserGoal {
    pub fn constraint(&self, slot: &str) -> Option<&str> {
        self.constraints
            .iter()
            .find(|(s, _)| s == slot)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalConfig {
    /// Probability that an informable slot is constrained.
    pub constrain_prob: f64,
    /// Probability that each info slot (phone, address, ...) is requested.
    pub request_prob: f64,
    pub require_satisfiable: bool,
    pub max_retries: usize,
}

impl Default for GoalConfig {
    fn default() -> Self {
        Self {
            constrain_prob: 0.8,
            request_prob: 0.5,
            require_satisfiable: true,
            max_retries: 10_000,
        }
    }
}

/// Samples a user goal. At least one slot is constrained and at least one info
/// slot is requested; the venue name is always requested.
pub fn sample_goal<R: Rng + ?Sized>(
    ontology: &Ontology,
    db: &Database,
    config: &GoalConfig,
    rng: &mut R,
) -> Result<UserGoal> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let attempts = if config.require_satisfiable {
        config.max_retries.max(1)
    } else {
        1
    };
    for _ in 0..attempts {
        let slots = ontology.informable();
        let mut chosen: Vec<bool> = slots
            .iter()
            .map(|_| rng.random_bool(config.constrain_prob))
            .collect();
        if !chosen.iter().any(|&c| c) {
            chosen[rng.random_range(0..slots.len())] = true;
        }
        let constraints: Vec<(String, String)> = slots
            .iter()
            .zip(&chosen)
            .filter(|(_, &c)| c)
            .map(|(slot, _)| {
                let value = slot.values.choose(rng).expect("non-empty").clone();
                (slot.name.clone(), value)
            })
            .collect();
        let satisfiable = db.count(&constraints)? > 0;
        if config.require_satisfiable && !satisfiable {
            continue;
        }
        let info: Vec<&str> = ontology.info_slots().collect();
        let mut asked: Vec<bool> = info
            .iter()
            .map(|_| rng.random_bool(config.request_prob))
            .collect();
        if !info.is_empty() && !asked.iter().any(|&a| a) {
            asked[rng.random_range(0..info.len())] = true;
        }
        let requests = ontology
            .requestable()
            .iter()
            .filter(|slot| {
                *slot == NAME_SLOT
                    || info
                        .iter()
                        .position(|i| i == slot)
                        .is_some_and(|idx| asked[idx])
            })
            .cloned()
            .collect();
        return Ok(UserGoal {
            constraints,
            requests,
            satisfiable,
        });
    }
    Err(Error::Unsatisfiable(attempts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_ontology(values: &[usize]) -> Ontology {
        let informable = ["food", "area", "pricerange"]
            .iter()
            .zip(values)
            .map(|(name, &n)| InformableSlot {
                name: name.to_string(),
                values: (0..n).map(|i| format!("{name}{i}")).collect(),
                synonyms: BTreeMap::new(),
            })
            .collect();
        Ontology::new(informable, vec!["phone".into(), "address".into()]).unwrap()
    }

    #[test]
    fn default_domain_has_restaurant_slots() {
        let o = Ontology::restaurant();
        let names: Vec<&str> = o.informable_names().collect();
        assert_eq!(names, ["food", "area", "pricerange"]);
        assert_eq!(o.combination_count(), 105);
        assert_eq!(
            o.requestable(),
            ["food", "area", "pricerange", "name", "phone", "address", "postcode"]
        );
    }

    #[test]
    fn empty_value_list_is_rejected_by_name() {
        let doc = r#"
            requestable = ["name"]
            [[informable]]
            name = "area"
            values = []
        "#;
        match Ontology::from_toml(doc) {
            Err(Error::EmptySlot(slot)) => assert_eq!(slot, "area"),
            other => panic!("expected EmptySlot, got {other:?}"),
        }
    }

    #[test]
    fn malformed_document_is_an_error() {
        assert!(Ontology::from_toml("informable = 3").is_err());
        assert!(Ontology::from_toml("[[informable]]\nname = \"food\"\nvalues = [\"a\", \"a\"]").is_err());
    }

    #[test]
    fn product_count_for_seven_five_three() {
        assert_eq!(small_ontology(&[7, 5, 3]).combination_count(), 105);
    }

    #[test]
    fn generation_is_deterministic() {
        let o = Ontology::restaurant();
        let a = Database::generate(&o, 100, 7).unwrap();
        let b = Database::generate(&o, 100, 7).unwrap();
        assert_eq!(a, b);
        let c = Database::generate(&o, 100, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_venue_is_in_ontology() {
        let o = Ontology::restaurant();
        let db = Database::generate(&o, 1, 3).unwrap();
        assert_eq!(db.len(), 1);
        for slot in o.informable() {
            assert!(slot.values.contains(&db.venues()[0].slots[&slot.name]));
        }
        assert!(Database::generate(&o, 0, 3).is_err());
    }

    #[test]
    fn query_basics() {
        let o = Ontology::restaurant();
        let db = Database::generate(&o, 100, 7).unwrap();
        assert_eq!(db.query(&[]).unwrap().len(), 100);
        let v = &db.venues()[17];
        let profile: Vec<(String, String)> = o
            .informable_names()
            .map(|s| (s.to_string(), v.slots[s].clone()))
            .collect();
        assert!(db.query(&profile).unwrap().iter().any(|m| m.name == v.name));
        assert!(matches!(
            db.query(&[("colour".into(), "red".into())]),
            Err(Error::UnknownSlot(_))
        ));
    }

    #[test]
    fn single_slot_counts_partition_the_database() {
        let o = Ontology::restaurant();
        let db = Database::generate(&o, 100, 11).unwrap();
        for slot in o.informable() {
            let total: usize = slot
                .values
                .iter()
                .map(|v| db.count(&[(slot.name.clone(), v.clone())]).unwrap())
                .sum();
            assert_eq!(total, 100, "slot {}", slot.name);
        }
    }

    #[test]
    fn forced_goal_with_single_values() {
        let o = small_ontology(&[1, 1, 1]);
        let db = Database::generate(&o, 5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let goal = sample_goal(&o, &db, &GoalConfig::default(), &mut rng).unwrap();
            for (slot, value) in &goal.constraints {
                assert_eq!(value, &format!("{slot}0"));
            }
        }
    }

    #[test]
    fn goal_sampling_is_deterministic_and_well_formed() {
        let o = Ontology::restaurant();
        let db = Database::generate(&o, 100, 7).unwrap();
        let a = sample_goal(&o, &db, &GoalConfig::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_goal(&o, &db, &GoalConfig::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(!a.constraints.is_empty());
        assert!(a.requests.contains(&NAME_SLOT.to_string()));
        assert!(a.requests.iter().any(|r| r != NAME_SLOT));
        for (slot, _) in &a.constraints {
            assert!(!a.requests.contains(slot));
        }
    }

    #[test]
    fn empty_database_cannot_yield_goals() {
        let o = Ontology::restaurant();
        let db = Database::new(&o, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            sample_goal(&o, &db, &GoalConfig::default(), &mut rng),
            Err(Error::EmptyDatabase)
        ));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let o = Ontology::restaurant();
        let db = Database::generate(&o, 40, 5).unwrap();
        let mut buf = Vec::new();
        db.write_csv_to(&mut buf).unwrap();
        let back = Database::read_csv_from(&o, buf.as_slice()).unwrap();
        assert_eq!(db, back);
    }
}
