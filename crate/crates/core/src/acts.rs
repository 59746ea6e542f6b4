//! Dialogue acts and their canonical text form.
//!
//! Grammar: `<speaker>.<act_type>[(<arg>{,<arg>})]` where speaker is one of
//! `task`, `autofeedback`, `som` or `user`, and each arg is either `slot` or
//! `slot=value`. Values may contain spaces but not `,()=`.
//!
//! ```text
//! task.request(pricerange)
//! autofeedback.impl_confirm(food=indian)
//! task.offer(name=Rice Boat,food=indian,area=north,pricerange=cheap)
//! user.thank
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Task,
    AutoFeedback,
    Som,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Task, Dimension::AutoFeedback, Dimension::Som];

    pub fn label(self) -> &'static str {
        match self {
            Dimension::Task => "task",
            Dimension::AutoFeedback => "autofeedback",
            Dimension::Som => "som",
        }
    }

    fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.label() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SystemActType {
    Offer,
    Answer,
    Request,
    ImplConfirm,
    ExplConfirm,
    AutoNegative,
    AcceptThanking,
    ReturnGoodbye,
    None,
}

impl SystemActType {
    pub const ALL: [SystemActType; 9] = [
        SystemActType::Offer,
        SystemActType::Answer,
        SystemActType::Request,
        SystemActType::ImplConfirm,
        SystemActType::ExplConfirm,
        SystemActType::AutoNegative,
        SystemActType::AcceptThanking,
        SystemActType::ReturnGoodbye,
        SystemActType::None,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SystemActType::Offer => "offer",
            SystemActType::Answer => "answer",
            SystemActType::Request => "request",
            SystemActType::ImplConfirm => "impl_confirm",
            SystemActType::ExplConfirm => "expl_confirm",
            SystemActType::AutoNegative => "auto_negative",
            SystemActType::AcceptThanking => "accept_thanking",
            SystemActType::ReturnGoodbye => "return_goodbye",
            SystemActType::None => "none",
        }
    }

    /// The dimension an act type belongs to. `none` exists in every dimension
    /// and is reported as Task here; use [`SystemAct::dimension`] for the
    /// dimension a particular act was produced in.
    pub fn home_dimension(self) -> Dimension {
        match self {
            SystemActType::Offer | SystemActType::Answer | SystemActType::Request | SystemActType::None => {
                Dimension::Task
            }
            SystemActType::ImplConfirm | SystemActType::ExplConfirm | SystemActType::AutoNegative => {
                Dimension::AutoFeedback
            }
            SystemActType::AcceptThanking | SystemActType::ReturnGoodbye => Dimension::Som,
        }
    }

    fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.label() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UserActType {
    Inform,
    Request,
    Affirm,
    Negate,
    Thank,
    Bye,
    Hello,
    Reqalts,
    Null,
}

impl UserActType {
    pub const ALL: [UserActType; 9] = [
        UserActType::Inform,
        UserActType::Request,
        UserActType::Affirm,
        UserActType::Negate,
        UserActType::Thank,
        UserActType::Bye,
        UserActType::Hello,
        UserActType::Reqalts,
        UserActType::Null,
    ];

    pub fn label(self) -> &'static str {
        match self {
            UserActType::Inform => "inform",
            UserActType::Request => "request",
            UserActType::Affirm => "affirm",
            UserActType::Negate => "negate",
            UserActType::Thank => "thank",
            UserActType::Bye => "bye",
            UserActType::Hello => "hello",
            UserActType::Reqalts => "reqalts",
            UserActType::Null => "null",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&t| t == self).expect("listed")
    }

    fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.label() == s)
    }
}

/// A slot name with an optional value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Arg {
    pub slot: String,
    pub value: Option<String>,
}

impl Arg {
    pub fn slot(slot: impl Into<String>) -> Self {
        Self {
            slot: slot.into(),
            value: None,
        }
    }

    pub fn pair(slot: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            slot: slot.into(),
            value: Some(value.into()),
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            Some(v) => write!(f, "{}={}", self.slot, v),
            None => f.write_str(&self.slot),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemAct {
    pub dimension: Dimension,
    pub kind: SystemActType,
    pub args: Vec<Arg>,
}

impl SystemAct {
    /// Builds an act, checking dimension legality and argument arity.
    pub fn new(dimension: Dimension, kind: SystemActType, args: Vec<Arg>) -> Result<Self> {
        let act = Self {
            dimension,
            kind,
            args,
        };
        act.validate()?;
        Ok(act)
    }

    pub fn none(dimension: Dimension) -> Self {
        Self {
            dimension,
            kind: SystemActType::None,
            args: Vec::new(),
        }
    }

    /// Builds an act in the type's home dimension, panicking on invalid args.
    /// For internal construction from already-validated parts.
    pub(crate) fn make(kind: SystemActType, args: Vec<Arg>) -> Self {
        Self::new(kind.home_dimension(), kind, args).expect("well-formed system act")
    }

    pub fn request(slot: &str) -> Self {
        Self::make(SystemActType::Request, vec![Arg::slot(slot)])
    }

    pub fn is_none(&self) -> bool {
        self.kind == SystemActType::None
    }

    pub fn value(&self, slot: &str) -> Option<&str> {
        self.args
            .iter()
            .find(|a| a.slot == slot)
            .and_then(|a| a.value.as_deref())
    }

    /// First slot-value pair, if any.
    pub fn first_pair(&self) -> Option<(&str, &str)> {
        self.args
            .iter()
            .find_map(|a| a.value.as_deref().map(|v| (a.slot.as_str(), v)))
    }

    fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::ActParse {
                text: self.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.kind != SystemActType::None && self.kind.home_dimension() != self.dimension {
            return fail("act type is not legal in this dimension");
        }
        match self.kind {
            SystemActType::Request => {
                if self.args.len() != 1 || self.args[0].value.is_some() {
                    return fail("request carries exactly one slot name");
                }
            }
            SystemActType::ImplConfirm | SystemActType::ExplConfirm => {
                if self.args.is_empty() || self.args.iter().any(|a| a.value.is_none()) {
                    return fail("confirmation carries slot=value pairs");
                }
            }
            SystemActType::Offer | SystemActType::Answer => {
                if self.args.iter().any(|a| a.value.is_none()) {
                    return fail("offer/answer carry slot=value pairs");
                }
            }
            _ => {
                if !self.args.is_empty() {
                    return fail("act takes no arguments");
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UserAct {
    pub kind: UserActType,
    pub args: Vec<Arg>,
}

impl UserAct {
    pub fn new(kind: UserActType, args: Vec<Arg>) -> Self {
        Self { kind, args }
    }

    pub fn bare(kind: UserActType) -> Self {
        Self::new(kind, Vec::new())
    }

    pub fn inform(slot: impl Into<String>, value: impl Into<String>) -> Self {
        Self::new(UserActType::Inform, vec![Arg::pair(slot, value)])
    }

    pub fn request(slot: impl Into<String>) -> Self {
        Self::new(UserActType::Request, vec![Arg::slot(slot)])
    }

    pub fn slot(&self) -> Option<&str> {
        self.args.first().map(|a| a.slot.as_str())
    }

    pub fn first_pair(&self) -> Option<(&str, &str)> {
        self.args
            .iter()
            .find_map(|a| a.value.as_deref().map(|v| (a.slot.as_str(), v)))
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Arg]) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for SystemAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.dimension.label(), self.kind.label())?;
        write_args(f, &self.args)
    }
}

impl fmt::Display for UserAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "user.{}", self.kind.label())?;
        write_args(f, &self.args)
    }
}

/// Either side of the conversation, for parsing mixed logs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DialogueAct {
    System(SystemAct),
    User(UserAct),
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DialogueAct::System(a) => a.fmt(f),
            DialogueAct::User(a) => a.fmt(f),
        }
    }
}

fn parse_parts(text: &str) -> Result<(&str, &str, Vec<Arg>)> {
    let err = |reason: &str| Error::ActParse {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let text_trim = text.trim();
    let (head, args_text) = match text_trim.find('(') {
        Some(open) => {
            let rest = text_trim[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| err("missing closing parenthesis"))?;
            (&text_trim[..open], Some(rest))
        }
        None => (text_trim, None),
    };
    let (speaker, kind) = head.split_once('.').ok_or_else(|| err("expected `speaker.act`"))?;
    let mut args = Vec::new();
    if let Some(args_text) = args_text {
        if args_text.contains(['(', ')']) {
            return Err(err("nested parentheses"));
        }
        for raw in args_text.split(',') {
            let arg = match raw.split_once('=') {
                Some((slot, value)) => {
                    if value.contains('=') {
                        return Err(err("`=` inside value"));
                    }
                    Arg::pair(slot.trim(), value.trim())
                }
                None => Arg::slot(raw.trim()),
            };
            if arg.slot.is_empty() || arg.value.as_deref() == Some("") {
                return Err(err("empty slot or value"));
            }
            args.push(arg);
        }
    }
    Ok((speaker.trim(), kind.trim(), args))
}

impl FromStr for DialogueAct {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (speaker, kind, args) = parse_parts(text)?;
        let unknown = |what: &str| Error::ActParse {
            text: text.to_string(),
            reason: format!("unknown {what}"),
        };
        if speaker == "user" {
            let kind = UserActType::from_label(kind).ok_or_else(|| unknown("user act type"))?;
            return Ok(DialogueAct::User(UserAct::new(kind, args)));
        }
        let dimension = Dimension::from_label(speaker).ok_or_else(|| unknown("speaker"))?;
        let kind = SystemActType::from_label(kind).ok_or_else(|| unknown("system act type"))?;
        SystemAct::new(dimension, kind, args).map(DialogueAct::System)
    }
}

impl FromStr for SystemAct {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        match text.parse()? {
            DialogueAct::System(a) => Ok(a),
            DialogueAct::User(_) => Err(Error::ActParse {
                text: text.to_string(),
                reason: "expected a system act".into(),
            }),
        }
    }
}

impl FromStr for UserAct {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        match text.parse()? {
            DialogueAct::User(a) => Ok(a),
            DialogueAct::System(_) => Err(Error::ActParse {
                text: text.to_string(),
                reason: "expected a user act".into(),
            }),
        }
    }
}

macro_rules! serde_via_text {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_text!(SystemAct);
serde_via_text!(UserAct);

impl Serialize for UserActType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for UserActType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        UserActType::from_label(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown user act type `{text}`")))
    }
}

/// A user act as recognised by the understanding layer, with its score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredHypothesis {
    pub act: UserAct,
    pub confidence: f64,
    /// Set by the error model for logging; never read by the tracker or the
    /// policies.
    #[serde(default)]
    pub corrupted: bool,
}

impl ScoredHypothesis {
    pub fn clean(act: UserAct, confidence: f64) -> Self {
        Self {
            act,
            confidence,
            corrupted: false,
        }
    }
}
