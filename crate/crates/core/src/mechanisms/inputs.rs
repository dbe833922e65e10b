use serde::{Deserialize, Serialize};

use super::spec::{Family, MechanismSpec};
use crate::error::{invalid, Error, Result};

/// Input patterns for adjacent query vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    OneAbove,
    OneBelow,
    OneBelowRestAbove,
    HalfHalf,
    AllAbove,
    XShape,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [
        Pattern::OneAbove,
        Pattern::OneBelow,
        Pattern::OneBelowRestAbove,
        Pattern::HalfHalf,
        Pattern::AllAbove,
        Pattern::XShape,
    ];

    /// Display name as used in the literature.
    pub fn title(self) -> &'static str {
        match self {
            Pattern::OneAbove => "One Above",
            Pattern::OneBelow => "One Below",
            Pattern::OneBelowRestAbove => "One Below Rest Above",
            Pattern::HalfHalf => "Half Half",
            Pattern::AllAbove => "All Above & All Below",
            Pattern::XShape => "X shape",
        }
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.title())
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '&')
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "oneabove" => Pattern::OneAbove,
            "onebelow" => Pattern::OneBelow,
            "onebelowrestabove" => Pattern::OneBelowRestAbove,
            "halfhalf" => Pattern::HalfHalf,
            "allabove&allbelow" | "allabove" | "allaboveallbelow" => Pattern::AllAbove,
            "xshape" | "x" => Pattern::XShape,
            _ => {
                return Err(Error::Unknown {
                    kind: "input pattern",
                    name: s.to_string(),
                })
            }
        })
    }
}

/// Query answers on two adjacent datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacentPair {
    pub q_a: Vec<f64>,
    pub q_a_prime: Vec<f64>,
    pub pattern: Option<Pattern>,
}

impl AdjacentPair {
    pub fn new(q_a: Vec<f64>, q_a_prime: Vec<f64>) -> Result<Self> {
        if q_a.len() != q_a_prime.len() || q_a.is_empty() {
            return Err(invalid(
                "adjacent query vectors must be non-empty and of equal length",
            ));
        }
        Ok(Self {
            q_a,
            q_a_prime,
            pattern: None,
        })
    }

    /// The pair with both sides equal to `q_a` (no distinguishability).
    pub fn identical(q_a: Vec<f64>) -> Self {
        Self {
            q_a_prime: q_a.clone(),
            q_a,
            pattern: None,
        }
    }

    pub fn len(&self) -> usize {
        self.q_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_a.is_empty()
    }

    /// Largest per-coordinate difference.
    pub fn linf(&self) -> f64 {
        self.q_a
            .iter()
            .zip(&self.q_a_prime)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn swapped(&self) -> Self {
        Self {
            q_a: self.q_a_prime.clone(),
            q_a_prime: self.q_a.clone(),
            pattern: self.pattern,
        }
    }
}

/// Builds the pair for `pattern` in `dimension` coordinates with per-coordinate
/// difference at most `sensitivity`.
pub fn generate_inputs(
    pattern: Pattern,
    dimension: usize,
    sensitivity: f64,
) -> Result<AdjacentPair> {
    if dimension == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let d = sensitivity;
    let mut a = vec![d; dimension];
    let b: Vec<f64> = match pattern {
        Pattern::OneAbove => {
            let mut b = a.clone();
            b[0] = 2.0 * d;
            b
        }
        Pattern::OneBelow => {
            let mut b = a.clone();
            b[0] = 0.0;
            b
        }
        Pattern::OneBelowRestAbove => (0..dimension)
            .map(|i| if i == 0 { 0.0 } else { 2.0 * d })
            .collect(),
        Pattern::HalfHalf => {
            let low = dimension.div_ceil(2);
            (0..dimension)
                .map(|i| if i < low { 0.0 } else { 2.0 * d })
                .collect()
        }
        Pattern::AllAbove => vec![2.0 * d; dimension],
        Pattern::XShape => {
            let ones = dimension / 2;
            a = (0..dimension)
                .map(|i| if i < ones { d } else { 0.0 })
                .collect();
            (0..dimension)
                .map(|i| if i < ones { 0.0 } else { d })
                .collect()
        }
    };
    Ok(AdjacentPair {
        q_a: a,
        q_a_prime: b,
        pattern: Some(pattern),
    })
}

/// The pair each family is audited on by default.
///
/// Scalar noise mechanisms and adapted SVT use One Above (the neighbour sits one
/// sensitivity higher); benchmark SVT, RAPPOR and the DPSGD step use One Below
/// (threshold crossing, item swap and canary removal respectively).
pub fn canonical_pair(spec: &MechanismSpec) -> AdjacentPair {
    let pattern = match spec.family {
        Family::Laplace | Family::AdaptedLaplace | Family::Gaussian | Family::AdaptedSvt => {
            Pattern::OneAbove
        }
        Family::Svt | Family::RapporOneTime | Family::DpsgdOneStep => Pattern::OneBelow,
    };
    pair_for(spec, pattern).expect("dimension is positive")
}

/// The pair for `pattern`, sized and scaled to fit `spec`.
///
/// RAPPOR items and the DPSGD canary flag are unit-valued whatever the
/// sensitivity.
pub fn pair_for(spec: &MechanismSpec, pattern: Pattern) -> Result<AdjacentPair> {
    let scale = match spec.family {
        Family::RapporOneTime | Family::DpsgdOneStep => 1.0,
        _ => spec.sensitivity,
    };
    generate_inputs(pattern, spec.input_len(), scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let p = generate_inputs(Pattern::OneAbove, 5, 1.0).unwrap();
        assert_eq!(p.q_a, vec![1.0; 5]);
        assert_eq!(p.q_a_prime, vec![2.0, 1.0, 1.0, 1.0, 1.0]);
        let p = generate_inputs(Pattern::HalfHalf, 5, 1.0).unwrap();
        assert_eq!(p.q_a_prime, vec![0.0, 0.0, 0.0, 2.0, 2.0]);
        let p = generate_inputs(Pattern::OneBelow, 1, 1.0).unwrap();
        assert_eq!((p.q_a, p.q_a_prime), (vec![1.0], vec![0.0]));
        let p = generate_inputs(Pattern::XShape, 5, 1.0).unwrap();
        assert_eq!(p.q_a, vec![1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.q_a_prime, vec![0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn names_parse_verbatim() {
        for p in Pattern::ALL {
            assert_eq!(p.title().parse::<Pattern>().unwrap(), p);
        }
        assert!("Two Above".parse::<Pattern>().is_err());
        assert!(generate_inputs(Pattern::OneAbove, 0, 1.0).is_err());
    }

    #[test]
    fn difference_bounded_by_sensitivity() {
        for p in Pattern::ALL {
            for d in 1..8 {
                let pair = generate_inputs(p, d, 0.5).unwrap();
                assert!(pair.linf() <= 0.5 + 1e-12);
            }
        }
    }
}
