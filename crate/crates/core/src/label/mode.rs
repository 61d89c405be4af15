use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Ordinal engagement level on one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EngagementMode {
    Passive = 0,
    Active = 1,
    Constructive = 2,
}

impl EngagementMode {
    pub const ALL: [EngagementMode; 3] = [EngagementMode::Passive, EngagementMode::Active, EngagementMode::Constructive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EngagementMode::Passive => "Passive",
            EngagementMode::Active => "Active",
            EngagementMode::Constructive => "Constructive",
        }
    }

    pub fn abbrev(self) -> char {
        self.as_str().chars().next().unwrap_or('?')
    }
}

impl fmt::Display for EngagementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseModeError(pub String);

impl fmt::Display for ParseModeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}` is not an engagement mode (Passive, Active, Constructive)", self.0)
    }
}

impl std::error::Error for ParseModeError {}

impl FromStr for EngagementMode {
    type Err = ParseModeError;

    /// Case-insensitive; accepts the single-letter abbreviations too.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "passive" | "p" => Ok(EngagementMode::Passive),
            "active" | "a" => Ok(EngagementMode::Active),
            "constructive" | "c" => Ok(EngagementMode::Constructive),
            _ => Err(ParseModeError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    HelpSeeking,
    ResponseUse,
}

impl Axis {
    pub const ALL: [Axis; 2] = [Axis::HelpSeeking, Axis::ResponseUse];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::HelpSeeking => "help_seeking",
            Axis::ResponseUse => "response_use",
        }
    }
}

/// A (help-seeking, response-use) pair; one of nine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReliancePattern {
    pub help_seeking: EngagementMode,
    pub response_use: EngagementMode,
}

impl ReliancePattern {
    pub const COUNT: usize = 9;

    pub fn new(help_seeking: EngagementMode, response_use: EngagementMode) -> Self {
        Self { help_seeking, response_use }
    }

    /// Row-major index: `3 * help_seeking + response_use`.
    pub fn index(self) -> usize {
        3 * self.help_seeking.index() + self.response_use.index()
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Some(Self::new(EngagementMode::from_index(i / 3)?, EngagementMode::from_index(i % 3)?))
    }

    pub fn all() -> impl Iterator<Item = ReliancePattern> {
        (0..Self::COUNT).filter_map(Self::from_index)
    }

    /// e.g. `Passive_Active`.
    pub fn name(self) -> String {
        format!("{}_{}", self.help_seeking, self.response_use)
    }

    /// e.g. `P_A`.
    pub fn short_name(self) -> String {
        format!("{}_{}", self.help_seeking.abbrev(), self.response_use.abbrev())
    }

    pub fn get(self, axis: Axis) -> EngagementMode {
        match axis {
            Axis::HelpSeeking => self.help_seeking,
            Axis::ResponseUse => self.response_use,
        }
    }
}

impl fmt::Display for ReliancePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
