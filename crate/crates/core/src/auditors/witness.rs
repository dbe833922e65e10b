use serde::{Deserialize, Serialize};

use crate::mechanisms::SymbolString;

/// Which side of the threshold belongs to the set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Above,
    Below,
}

/// Explicit description of the outcome set, when one exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    /// Defined only through the auditor's score.
    Score,
    /// Scalar outputs in `(lo, hi]`.
    Interval {
        #[serde(with = "crate::serde_ext")]
        lo: f64,
        #[serde(with = "crate::serde_ext")]
        hi: f64,
    },
    /// A single scalar output (density-based witness).
    Point { at: f64 },
    /// A list of SVT outputs.
    Symbols { outputs: Vec<SymbolString> },
    /// Bit vectors agreeing with `values` on `positions`; other bits are free.
    BitPattern {
        positions: Vec<usize>,
        values: Vec<bool>,
    },
}

/// An outcome set given by a likelihood-ratio threshold `t` with tie
/// probability `q`: an output with score s is in the set with probability 1 if
/// s is strictly beyond `t`, `q` if s equals `t`, 0 otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessSet {
    #[serde(with = "crate::serde_ext")]
    pub threshold: f64,
    pub tie_probability: f64,
    pub orientation: Orientation,
    pub region: Region,
}

impl WitnessSet {
    pub fn threshold(threshold: f64, tie_probability: f64, orientation: Orientation) -> Self {
        Self {
            threshold,
            tie_probability: tie_probability.clamp(0.0, 1.0),
            orientation,
            region: Region::Score,
        }
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    /// Membership probability of an output with the given score.
    pub fn membership(&self, score: f64) -> f64 {
        let beyond = match self.orientation {
            Orientation::Above => score > self.threshold,
            Orientation::Below => score < self.threshold,
        };
        if beyond {
            1.0
        } else if score == self.threshold {
            self.tie_probability
        } else {
            0.0
        }
    }
}
