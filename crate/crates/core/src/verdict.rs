use serde::{Deserialize, Serialize};

/// Tri-state outcome of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Holds,
    Fails,
    Inconclusive,
}

impl Outcome {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Holds => 0,
            Outcome::Fails => 1,
            Outcome::Inconclusive => 4,
        }
    }
}

/// Result of a check: holds, fails with a structured witness `W`, or is
/// inconclusive for a stated reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Verdict<W> {
    Holds,
    Fails { witness: W },
    Inconclusive { reason: String },
}

impl<W> Verdict<W> {
    pub fn fails(witness: W) -> Self {
        Verdict::Fails { witness }
    }

    pub fn inconclusive(reason: impl Into<String>) -> Self {
        Verdict::Inconclusive {
            reason: reason.into(),
        }
    }

    pub fn outcome(&self) -> Outcome {
        match self {
            Verdict::Holds => Outcome::Holds,
            Verdict::Fails { .. } => Outcome::Fails,
            Verdict::Inconclusive { .. } => Outcome::Inconclusive,
        }
    }

    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn is_fails(&self) -> bool {
        matches!(self, Verdict::Fails { .. })
    }

    pub fn witness(&self) -> Option<&W> {
        match self {
            Verdict::Fails { witness } => Some(witness),
            _ => None,
        }
    }

    pub fn map_witness<V>(self, f: impl FnOnce(W) -> V) -> Verdict<V> {
        match self {
            Verdict::Holds => Verdict::Holds,
            Verdict::Fails { witness } => Verdict::Fails {
                witness: f(witness),
            },
            Verdict::Inconclusive { reason } => Verdict::Inconclusive { reason },
        }
    }
}
