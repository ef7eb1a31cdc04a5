use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a frame's solve starts. "Previous" variants fall back to zeros on
/// frame 0, where nothing precedes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartPoint {
    Zeros,
    /// The previous frame's budgeted estimate.
    PreviousEstimate,
    /// The previous frame's converged reference (oracle access).
    PreviousReference,
    /// This frame's own converged reference (oracle access).
    CurrentReference,
}

impl StartPoint {
    pub fn needs_oracle(self) -> bool {
        matches!(self, StartPoint::PreviousReference | StartPoint::CurrentReference)
    }
}

/// Chooses each frame's starting state.
pub trait WarmStart: Send + Sync {
    fn name(&self) -> &str;

    fn start_point(&self, t: usize) -> StartPoint;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WarmStartPolicy {
    /// Every frame from zeros.
    #[serde(rename = "cold")]
    ColdStart,
    /// Every frame from the previous frame's reference.
    #[serde(rename = "ref-chain")]
    ReferenceChain,
    /// Frame 0 from its reference, then carry the estimate.
    #[serde(rename = "stream-ref")]
    StreamFromReference,
    /// Frame 0 from zeros, then carry the estimate.
    #[serde(rename = "stream-zero")]
    StreamFromZero,
}

impl WarmStartPolicy {
    pub const ALL: [WarmStartPolicy; 4] = [
        WarmStartPolicy::ColdStart,
        WarmStartPolicy::ReferenceChain,
        WarmStartPolicy::StreamFromReference,
        WarmStartPolicy::StreamFromZero,
    ];

    pub fn label(self) -> &'static str {
        match self {
            WarmStartPolicy::ColdStart => "cold",
            WarmStartPolicy::ReferenceChain => "ref-chain",
            WarmStartPolicy::StreamFromReference => "stream-ref",
            WarmStartPolicy::StreamFromZero => "stream-zero",
        }
    }
}

impl WarmStart for WarmStartPolicy {
    fn name(&self) -> &str {
        self.label()
    }

    fn start_point(&self, t: usize) -> StartPoint {
        match (self, t) {
            (WarmStartPolicy::ColdStart, _) => StartPoint::Zeros,
            (WarmStartPolicy::ReferenceChain, _) => StartPoint::PreviousReference,
            (WarmStartPolicy::StreamFromReference, 0) => StartPoint::CurrentReference,
            (WarmStartPolicy::StreamFromZero, 0) => StartPoint::Zeros,
            (_, _) => StartPoint::PreviousEstimate,
        }
    }
}

impl fmt::Display for WarmStartPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for WarmStartPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WarmStartPolicy::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "policy",
                name: s.into(),
            })
    }
}

/// Name-keyed collection of warm-start strategies.
pub struct PolicyRegistry {
    policies: BTreeMap<String, Box<dyn WarmStart>>,
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        PolicyRegistry {
            policies: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = PolicyRegistry::empty();
        for p in WarmStartPolicy::ALL {
            reg.register(Box::new(p));
        }
        reg
    }

    pub fn register(&mut self, policy: Box<dyn WarmStart>) {
        self.policies.insert(policy.name().to_owned(), policy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn WarmStart> {
        self.policies
            .get(name)
            .map(|p| p.as_ref())
            .ok_or_else(|| Error::UnknownName {
                kind: "policy",
                name: name.into(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.policies.keys().map(String::as_str)
    }
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        PolicyRegistry::builtin()
    }
}
