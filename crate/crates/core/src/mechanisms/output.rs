use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One SVT answer symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Top,
    Bottom,
}

/// A packed SVT output of at most 64 symbols: bit `i` of `tops` is set when the
/// `i`-th symbol is a top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolString {
    pub len: u8,
    pub tops: u64,
}

impl SymbolString {
    pub fn from_symbols(symbols: &[Symbol]) -> Self {
        let mut tops = 0u64;
        for (i, s) in symbols.iter().enumerate() {
            if *s == Symbol::Top {
                tops |= 1 << i;
            }
        }
        Self {
            len: symbols.len() as u8,
            tops,
        }
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        (0..self.len as usize).map(|i| self.get(i)).collect()
    }

    pub fn get(&self, i: usize) -> Symbol {
        if self.tops >> i & 1 == 1 {
            Symbol::Top
        } else {
            Symbol::Bottom
        }
    }

    pub fn count_tops(&self) -> u32 {
        self.tops.count_ones()
    }
}

impl std::fmt::Display for SymbolString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in self.symbols() {
            f.write_str(if s == Symbol::Top { "T" } else { "F" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for SymbolString {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .map(|c| match c {
                'T' | '⊤' => Ok(Symbol::Top),
                'F' | '⊥' => Ok(Symbol::Bottom),
                _ => Err(invalid(format!("bad symbol `{c}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if symbols.len() > 64 {
            return Err(invalid("symbol strings hold at most 64 symbols"));
        }
        Ok(Self::from_symbols(&symbols))
    }
}

/// One mechanism output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutputSample {
    Real(f64),
    Bits(Vec<bool>),
    Symbols(Vec<Symbol>),
}

/// The shape of a mechanism's outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputKind {
    Real,
    Bits { k: usize },
    Symbols { n: usize },
}

/// A batch of outputs in a compact column layout.
#[derive(Clone, Debug, PartialEq)]
pub enum SampleBatch {
    Real(Vec<f64>),
    /// `words` 64-bit words per output, bit `j` of the output at word `j / 64`.
    Bits {
        k: usize,
        words: usize,
        data: Vec<u64>,
    },
    Symbols(Vec<SymbolString>),
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        match self {
            SampleBatch::Real(v) => v.len(),
            SampleBatch::Bits { words, data, .. } => data.len() / (*words).max(1),
            SampleBatch::Symbols(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> OutputKind {
        match self {
            SampleBatch::Real(_) => OutputKind::Real,
            SampleBatch::Bits { k, .. } => OutputKind::Bits { k: *k },
            SampleBatch::Symbols(v) => OutputKind::Symbols {
                n: v.iter().map(|s| s.len as usize).max().unwrap_or(0),
            },
        }
    }

    /// Packed words of the `i`-th bit-vector output.
    pub fn bit_words(&self, i: usize) -> &[u64] {
        match self {
            SampleBatch::Bits { words, data, .. } => &data[i * words..(i + 1) * words],
            _ => &[],
        }
    }

    pub fn get(&self, i: usize) -> OutputSample {
        match self {
            SampleBatch::Real(v) => OutputSample::Real(v[i]),
            SampleBatch::Bits { k, .. } => {
                let w = self.bit_words(i);
                OutputSample::Bits((0..*k).map(|j| w[j / 64] >> (j % 64) & 1 == 1).collect())
            }
            SampleBatch::Symbols(v) => OutputSample::Symbols(v[i].symbols()),
        }
    }

    /// Text form of the `i`-th output, used by the sample cache.
    pub fn render(&self, i: usize) -> String {
        match self {
            SampleBatch::Real(v) => format!("{:?}", v[i]),
            SampleBatch::Bits { k, .. } => {
                let w = self.bit_words(i);
                (0..*k)
                    .map(|j| {
                        if w[j / 64] >> (j % 64) & 1 == 1 {
                            '1'
                        } else {
                            '0'
                        }
                    })
                    .collect()
            }
            SampleBatch::Symbols(v) => v[i].to_string(),
        }
    }

    /// Parses rendered rows back into a batch of the given kind.
    pub fn parse(kind: OutputKind, rows: &[String]) -> Result<Self> {
        match kind {
            OutputKind::Real => rows
                .iter()
                .map(|r| {
                    r.parse::<f64>()
                        .map_err(|e| invalid(format!("bad real `{r}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(SampleBatch::Real),
            OutputKind::Bits { k } => {
                let words = k.div_ceil(64);
                let mut data = vec![0u64; words * rows.len()];
                for (i, r) in rows.iter().enumerate() {
                    if r.len() != k {
                        return Err(invalid(format!("expected {k} bits, got `{r}`")));
                    }
                    for (j, c) in r.chars().enumerate() {
                        match c {
                            '1' => data[i * words + j / 64] |= 1 << (j % 64),
                            '0' => {}
                            _ => return Err(invalid(format!("bad bit `{c}`"))),
                        }
                    }
                }
                Ok(SampleBatch::Bits { k, words, data })
            }
            OutputKind::Symbols { .. } => rows
                .iter()
                .map(|r| r.parse::<SymbolString>())
                .collect::<Result<Vec<_>>>()
                .map(SampleBatch::Symbols),
        }
    }
}
