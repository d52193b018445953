//! Agent-level knobs shared by planning, validation and the harness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::memory::Ladder;

/// Retrieval window size. `Inf` bypasses retrieval and passes every
/// undiscarded record, still relevance-sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopK {
    Finite(usize),
    Inf,
}

impl TopK {
    pub fn limit(self, n: usize) -> usize {
        match self {
            TopK::Finite(k) => k.min(n),
            TopK::Inf => n,
        }
    }
}

impl Default for TopK {
    fn default() -> Self {
        TopK::Finite(3)
    }
}

impl fmt::Display for TopK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopK::Finite(k) => write!(f, "{k}"),
            TopK::Inf => f.write_str("Inf"),
        }
    }
}

impl FromStr for TopK {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("inf") {
            return Ok(TopK::Inf);
        }
        match s.parse::<usize>() {
            Ok(0) => Err("K must be at least 1 or Inf".into()),
            Ok(k) => Ok(TopK::Finite(k)),
            Err(_) => Err(format!("invalid K `{s}`")),
        }
    }
}

impl Serialize for TopK {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TopK::Finite(k) => s.serialize_u64(*k as u64),
            TopK::Inf => s.serialize_str("Inf"),
        }
    }
}

impl<'de> Deserialize<'de> for TopK {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(n) => TopK::from_str(&n.to_string()).map_err(serde::de::Error::custom),
            Repr::Text(t) => TopK::from_str(&t).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablations {
    pub no_cot: bool,
    pub no_proximity: bool,
    pub no_other_info: bool,
    pub no_relevance: bool,
    pub no_validation: bool,
    pub full_observation: bool,
}

impl Ablations {
    pub const NAMES: [&'static str; 6] =
        ["no_cot", "no_proximity", "no_other_info", "no_relevance", "no_validation", "full_observation"];

    /// Turns on the flag called `name`.
    pub fn set(&mut self, name: &str) -> Result<(), String> {
        let flag = match name {
            "no_cot" => &mut self.no_cot,
            "no_proximity" => &mut self.no_proximity,
            "no_other_info" => &mut self.no_other_info,
            "no_relevance" => &mut self.no_relevance,
            "no_validation" => &mut self.no_validation,
            "full_observation" => &mut self.full_observation,
            other => return Err(format!("unknown ablation `{other}`")),
        };
        *flag = true;
        Ok(())
    }

    pub fn only(name: &str) -> Result<Self, String> {
        let mut a = Self::default();
        a.set(name)?;
        Ok(a)
    }

    pub fn active(&self) -> Vec<&'static str> {
        let flags = [
            self.no_cot,
            self.no_proximity,
            self.no_other_info,
            self.no_relevance,
            self.no_validation,
            self.full_observation,
        ];
        Self::NAMES.iter().zip(flags).filter(|(_, on)| *on).map(|(n, _)| *n).collect()
    }

    pub fn label(&self) -> String {
        let active = self.active();
        if active.is_empty() {
            "default".into()
        } else {
            active.join("+")
        }
    }
}

/// What every agent in an episode shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub k: TopK,
    pub ladder: Ladder,
    pub ablations: Ablations,
    /// Ask the reasoner to paraphrase rule-based messages.
    pub refine_messages: bool,
    /// Record rendered prompts in the transcript.
    pub log_prompts: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            k: TopK::default(),
            ladder: Ladder::R4,
            ablations: Ablations::default(),
            refine_messages: false,
            log_prompts: false,
        }
    }
}
