//! Engagement label scheme.
//!
//! Ten categories are used for experiments. Four finer-grained categories may
//! appear in raw annotation data and are folded into the experiment scheme by
//! [`Label::collapsed`]. `EMPTY` only ever appears in aligned evaluation pairs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Attribution,
    Counter,
    Deny,
    Entertain,
    Monogloss,
    Proclaim,
    Citation,
    Endophoric,
    Justifying,
    Sources,
    Attribute,
    Endorse,
    Concur,
    Pronounce,
    Empty,
}

impl Label {
    /// The experiment scheme, in report row order.
    pub const EXPERIMENT: [Label; 10] = [
        Label::Attribution,
        Label::Counter,
        Label::Deny,
        Label::Entertain,
        Label::Monogloss,
        Label::Proclaim,
        Label::Citation,
        Label::Endophoric,
        Label::Justifying,
        Label::Sources,
    ];

    pub const RAW: [Label; 4] = [
        Label::Attribute,
        Label::Endorse,
        Label::Concur,
        Label::Pronounce,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Attribution => "ATTRIBUTION",
            Label::Counter => "COUNTER",
            Label::Deny => "DENY",
            Label::Entertain => "ENTERTAIN",
            Label::Monogloss => "MONOGLOSS",
            Label::Proclaim => "PROCLAIM",
            Label::Citation => "CITATION",
            Label::Endophoric => "ENDOPHORIC",
            Label::Justifying => "JUSTIFYING",
            Label::Sources => "SOURCES",
            Label::Attribute => "ATTRIBUTE",
            Label::Endorse => "ENDORSE",
            Label::Concur => "CONCUR",
            Label::Pronounce => "PRONOUNCE",
            Label::Empty => "EMPTY",
        }
    }

    /// Map raw categories onto the experiment scheme.
    pub fn collapsed(self) -> Label {
        match self {
            Label::Concur | Label::Pronounce => Label::Proclaim,
            Label::Endorse | Label::Attribute => Label::Attribution,
            other => other,
        }
    }

    pub fn is_raw(self) -> bool {
        Label::RAW.contains(&self)
    }

    /// Position within [`Label::EXPERIMENT`], if this is an experiment label.
    pub fn experiment_index(self) -> Option<usize> {
        Label::EXPERIMENT.iter().position(|&l| l == self)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label {:?}", self.0)
    }
}

impl std::error::Error for UnknownLabel {}

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let label = match s.trim().to_ascii_uppercase().as_str() {
            "ATTRIBUTION" | "CONTRIBUTION" => Label::Attribution,
            "COUNTER" => Label::Counter,
            "DENY" => Label::Deny,
            "ENTERTAIN" => Label::Entertain,
            "MONOGLOSS" => Label::Monogloss,
            "PROCLAIM" => Label::Proclaim,
            "CITATION" => Label::Citation,
            "ENDOPHORIC" => Label::Endophoric,
            "JUSTIFYING" => Label::Justifying,
            "SOURCES" => Label::Sources,
            "ATTRIBUTE" => Label::Attribute,
            "ENDORSE" => Label::Endorse,
            "CONCUR" => Label::Concur,
            "PRONOUNCE" => Label::Pronounce,
            "EMPTY" => Label::Empty,
            _ => return Err(UnknownLabel(s.to_string())),
        };
        Ok(label)
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
