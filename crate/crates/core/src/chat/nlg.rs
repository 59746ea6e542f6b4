//! Template generation of system utterances.

use std::collections::BTreeMap;

use crate::acts::{SystemAct, SystemActType};
use crate::error::{Error, Result};
use crate::ontology::{Ontology, DONTCARE, NAME_SLOT};

/// Template keys and their text. Placeholders are `{name}`, `{description}`,
/// `{slot}`, `{value}` and `{phrase}`.
const TEMPLATES: &[(&str, &str)] = &[
    ("offer", "How about {name}?"),
    ("offer+impl_confirm", "{name} is a nice {description}"),
    ("answer", "The {slot} of {name} is {value}."),
    ("answer_name", "It is called {name}."),
    ("request", "What {slot} did you have in mind?"),
    ("impl_confirm", "Okay, {phrase}."),
    ("expl_confirm", "You want {phrase}, is that right?"),
    ("auto_negative", "I did not quite catch that, could you please rephrase?"),
    ("accept_thanking", "You're welcome"),
    ("return_goodbye", "Have a nice day"),
];

const PLACEHOLDERS: &[&str] = &["name", "description", "slot", "value", "phrase"];

/// Deterministic template realizer, validated on construction.
#[derive(Clone, Debug)]
pub struct Generator {
    templates: BTreeMap<&'static str, &'static str>,
}

impl Generator {
    /// Checks that every act type has a template and that templates use only
    /// known placeholders.
    pub fn new(ontology: &Ontology) -> Result<Self> {
        let templates: BTreeMap<_, _> = TEMPLATES.iter().copied().collect();
        let required = SystemActType::ALL
            .iter()
            .filter(|t| **t != SystemActType::None)
            .map(|t| t.label())
            .chain(["offer+impl_confirm", "answer_name"]);
        for key in required {
            if !templates.contains_key(key) {
                return Err(Error::Config(format!("missing template `{key}`")));
            }
        }
        for (key, text) in &templates {
            let mut rest = *text;
            while let Some(open) = rest.find('{') {
                let close = rest[open..]
                    .find('}')
                    .ok_or_else(|| Error::Config(format!("unclosed placeholder in template `{key}`")))?;
                let name = &rest[open + 1..open + close];
                if !PLACEHOLDERS.contains(&name) {
                    return Err(Error::Config(format!("unknown placeholder `{name}` in template `{key}`")));
                }
                rest = &rest[open + close + 1..];
            }
        }
        if ontology.informable().is_empty() {
            return Err(Error::Config("ontology has no informable slots".into()));
        }
        Ok(Self { templates })
    }

    fn fill(&self, key: &str, vars: &[(&str, &str)]) -> String {
        let mut out = self.templates[key].to_string();
        for (name, value) in vars {
            out = out.replace(&format!("{{{name}}}"), value);
        }
        out
    }

    /// Renders one system turn. Feedback comes first, then the task act, then
    /// the social act; an offer with an implicit confirmation is fused.
    pub fn generate(&self, acts: &[SystemAct]) -> Result<String> {
        if acts.is_empty() {
            return Err(Error::Contract("cannot generate an utterance for an empty turn".into()));
        }
        let find = |k: SystemActType| acts.iter().find(|a| a.kind == k);
        let fused = find(SystemActType::Offer).zip(find(SystemActType::ImplConfirm));
        let mut parts = Vec::new();
        for kind in [SystemActType::ImplConfirm, SystemActType::ExplConfirm, SystemActType::AutoNegative] {
            if let Some(act) = find(kind).filter(|_| !(fused.is_some() && kind == SystemActType::ImplConfirm)) {
                parts.push(self.render(act));
            }
        }
        for kind in [SystemActType::Offer, SystemActType::Answer, SystemActType::Request] {
            let Some(act) = find(kind) else { continue };
            match fused.filter(|_| kind == SystemActType::Offer) {
                Some((offer, confirm)) => {
                    let (slot, value) = confirm.first_pair().unwrap_or(("", ""));
                    parts.push(self.fill(
                        "offer+impl_confirm",
                        &[("name", &capitalise(&venue_name(offer))), ("description", &description(slot, value))],
                    ));
                }
                None => parts.push(self.render(act)),
            }
        }
        for kind in [SystemActType::AcceptThanking, SystemActType::ReturnGoodbye] {
            if let Some(act) = find(kind) {
                parts.push(self.render(act));
            }
        }
        if parts.is_empty() {
            return Err(Error::Contract("turn contains only none acts".into()));
        }
        Ok(parts.join(" "))
    }

    fn render(&self, act: &SystemAct) -> String {
        match act.kind {
            SystemActType::Offer => self.fill("offer", &[("name", &venue_name(act))]),
            SystemActType::Answer => {
                let name = venue_name(act);
                let answers: Vec<String> = act
                    .args
                    .iter()
                    .filter(|a| a.slot != NAME_SLOT)
                    .filter_map(|a| a.value.as_deref().map(|v| (a.slot.as_str(), v)))
                    .map(|(slot, value)| self.fill("answer", &[("slot", slot_noun(slot)), ("name", &name), ("value", value)]))
                    .collect();
                if answers.is_empty() {
                    self.fill("answer_name", &[("name", &name)])
                } else {
                    answers.join(" ")
                }
            }
            SystemActType::Request => {
                let slot = act.args.first().map_or("", |a| a.slot.as_str());
                self.fill("request", &[("slot", request_noun(slot))])
            }
            SystemActType::ImplConfirm | SystemActType::ExplConfirm => {
                let (slot, value) = act.first_pair().unwrap_or(("", ""));
                self.fill(act.kind.label(), &[("phrase", &phrase(slot, value))])
            }
            SystemActType::AutoNegative | SystemActType::AcceptThanking | SystemActType::ReturnGoodbye => {
                self.fill(act.kind.label(), &[])
            }
            SystemActType::None => String::new(),
        }
    }
}

fn venue_name(act: &SystemAct) -> String {
    format!("the {}", act.value(NAME_SLOT).unwrap_or("place"))
}

fn capitalise(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn slot_noun(slot: &str) -> &str {
    match slot {
        "phone" => "phone number",
        "pricerange" => "price range",
        other => other,
    }
}

fn request_noun(slot: &str) -> &str {
    match slot {
        "food" => "kind of food",
        "area" => "part of town",
        "pricerange" => "price range",
        other => other,
    }
}

fn price_adjective(value: &str) -> String {
    match value {
        "moderate" => "moderately priced".into(),
        other => other.into(),
    }
}

/// Noun phrase used in confirmations: "Indian food", "the north".
fn phrase(slot: &str, value: &str) -> String {
    if value == DONTCARE {
        return format!("any {}", slot_noun(slot));
    }
    match slot {
        "food" => format!("{} food", capitalise(value)),
        "area" => format!("the {value}"),
        "pricerange" => format!("something {}", price_adjective(value)),
        other => format!("{} {value}", slot_noun(other)),
    }
}

/// Tail of "X is a nice ...": "Indian restaurant", "restaurant in the north".
fn description(slot: &str, value: &str) -> String {
    if value == DONTCARE || value.is_empty() {
        return "restaurant".into();
    }
    match slot {
        "food" => format!("{} restaurant", capitalise(value)),
        "area" => format!("restaurant in the {value}"),
        "pricerange" => format!("{} restaurant", price_adjective(value)),
        other => format!("restaurant with {} {value}", slot_noun(other)),
    }
}
