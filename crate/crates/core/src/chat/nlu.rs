//! Rule-based understanding of typed user text.

use crate::acts::{Arg, ScoredHypothesis, UserAct, UserActType};
use crate::ontology::{Ontology, DONTCARE};

/// Confidence for a literal ontology value.
pub const EXACT_CONFIDENCE: f64 = 0.9;
/// Confidence for a synonym of an ontology value.
pub const SYNONYM_CONFIDENCE: f64 = 0.7;

const AFFIRM: &[&str] = &["yes", "yeah", "yep", "yup", "correct", "that's right", "thats right", "sure", "exactly"];
const NEGATE: &[&str] = &["no", "nope", "wrong", "incorrect", "that's not", "thats not"];
const THANK: &[&str] = &["thank", "thanks", "cheers"];
const BYE: &[&str] = &["bye", "goodbye", "see you"];
const HELLO: &[&str] = &["hello", "hi", "hey"];
const REQALTS: &[&str] = &["anything else", "something else", "another one", "alternative", "different one"];
const QUESTION_CUES: &[&str] = &[
    "what", "which", "where", "how", "tell me", "give me", "can i have", "could i have", "may i have", "can i get",
    "i need the", "i'd like the", "i would like the",
];

/// Phrases that ask for a slot's value. Informable slots get cues specific
/// enough not to collide with the way users state preferences.
fn request_phrases(slot: &str) -> Vec<String> {
    match slot {
        "phone" => vec!["phone".into(), "number".into(), "telephone".into()],
        "address" => vec!["address".into(), "where is it".into(), "located".into()],
        "postcode" => vec!["postcode".into(), "post code".into(), "postal code".into(), "zip".into()],
        "name" => vec!["name".into(), "called".into()],
        "food" => vec!["what food".into(), "kind of food".into(), "type of food".into(), "cuisine".into()],
        "area" => vec!["what area".into(), "which area".into(), "part of town".into()],
        "pricerange" => vec!["price range".into(), "how expensive".into(), "how much".into(), "prices".into()],
        other => vec![other.replace('_', " ")],
    }
}

/// Phrases that name a slot in a "no preference" statement such as "any area".
fn dontcare_phrases(slot: &str) -> Vec<String> {
    match slot {
        "food" => vec!["any food".into(), "any kind of food".into(), "any type of food".into(), "any cuisine".into()],
        "area" => vec!["any area".into(), "anywhere".into(), "any part of town".into()],
        "pricerange" => vec!["any price".into(), "any price range".into()],
        other => vec![format!("any {}", other.replace('_', " "))],
    }
}

/// Lowercases, strips punctuation except apostrophes and pads with spaces so
/// phrase search can use word boundaries.
fn normalise(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' { c } else { ' ' })
        .collect();
    format!(" {} ", cleaned.split_whitespace().collect::<Vec<_>>().join(" "))
}

fn has(padded: &str, phrase: &str) -> bool {
    padded.contains(&format!(" {phrase} "))
}

fn has_any(padded: &str, phrases: &[&str]) -> bool {
    phrases.iter().any(|p| has(padded, p))
}

/// Parses one utterance. `None` when no rule fires, which the tracker treats
/// as a processing problem.
pub fn parse_utterance(text: &str, ontology: &Ontology) -> Option<Vec<ScoredHypothesis>> {
    let padded = normalise(text);
    let question = text.contains('?') || has_any(&padded, QUESTION_CUES);
    let mut out: Vec<ScoredHypothesis> = Vec::new();
    let mut push = |act: UserAct, confidence: f64| out.push(ScoredHypothesis::clean(act, confidence));

    let mut informed = Vec::new();
    for slot in ontology.informable() {
        let mut best: Option<(&str, f64)> = None;
        for value in &slot.values {
            let mut conf = has(&padded, value).then_some(EXACT_CONFIDENCE);
            if conf.is_none() && slot.synonyms.get(value).is_some_and(|ss| ss.iter().any(|s| has(&padded, &s.to_lowercase()))) {
                conf = Some(SYNONYM_CONFIDENCE);
            }
            if let Some(c) = conf {
                if best.is_none_or(|(_, b)| c > b) {
                    best = Some((value, c));
                }
            }
        }
        if best.is_none() && dontcare_phrases(&slot.name).iter().any(|p| has(&padded, p)) {
            best = Some((DONTCARE, EXACT_CONFIDENCE));
        }
        if let Some((value, c)) = best {
            informed.push(slot.name.clone());
            push(UserAct::new(UserActType::Inform, vec![Arg::pair(&slot.name, value)]), c);
        }
    }

    if question {
        let slots: Vec<String> = ontology
            .requestable()
            .iter()
            .filter(|s| !informed.contains(s))
            .filter(|s| request_phrases(s).iter().any(|p| has(&padded, p)))
            .cloned()
            .collect();
        if !slots.is_empty() {
            push(UserAct::new(UserActType::Request, slots.into_iter().map(Arg::slot).collect()), EXACT_CONFIDENCE);
        }
    }

    let lexicon = [
        (AFFIRM, UserActType::Affirm),
        (NEGATE, UserActType::Negate),
        (THANK, UserActType::Thank),
        (BYE, UserActType::Bye),
        (HELLO, UserActType::Hello),
        (REQALTS, UserActType::Reqalts),
    ];
    for (phrases, kind) in lexicon {
        if has_any(&padded, phrases) {
            push(UserAct::bare(kind), EXACT_CONFIDENCE);
        }
    }
    (!out.is_empty()).then_some(out)
}
