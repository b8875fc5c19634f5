use std::fmt;

use thiserror::Error;

/// Why an exact computation is refused.
///
/// Each variant corresponds to a family of hard cells in the complexity
/// landscape of expected effects over fully factorized weight distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hardness {
    /// Sum ranking with numbers encoded in binary: already the pairwise
    /// precedence probability counts knapsack solutions.
    SumBinary,
    /// Top-k effects for any ranking other than Max descending (or its
    /// Min ascending mirror): the positive-CNF top-k construction applies.
    TopkRanking,
    /// Top-k effects where k is part of the input rather than a small fixed
    /// parameter.
    TopkGivenK,
    /// Maximum displacement or Hamming distance, hard for every ranking.
    DisplacementOrHamming,
}

impl Hardness {
    pub fn reason(&self) -> &'static str {
        match self {
            Hardness::SumBinary => {
                "FP^#P-hard: precedence under Sum with binary-encoded numbers counts knapsack solutions"
            }
            Hardness::TopkRanking => {
                "FP^#P-hard even for fixed k: top-k membership encodes positive CNF model counting"
            }
            Hardness::TopkGivenK => {
                "FP^#P-hard when k is part of the input (beyond the fixed-parameter regime)"
            }
            Hardness::DisplacementOrHamming => {
                "FP^#P-hard for all rankings: displacement differences encode positive CNF model counting"
            }
        }
    }
}

impl fmt::Display for Hardness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.reason())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exact computation intractable for cell [{cell}]: {hardness}; use Monte-Carlo sampling (mode approx or auto) instead")]
    ExactIntractable { cell: String, hardness: Hardness },

    #[error("resource cap `{cap}` exceeded: {detail}")]
    ResourceCap { cap: &'static str, detail: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
