//! Building the empirical pmf from raw samples or count tables.
//!
//! Counts stay integers until the final division by the sample size, so the
//! empirical pmf is reproducible across platforms.

use std::collections::BTreeMap;
use std::io::BufRead;

use crate::seq::{DiscreteSeq, ProbSeq};
use crate::{Error, Result};

/// Wire formats accepted by [`read_counts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// CSV with the exact header `value,count`.
    Counts,
    /// One nonnegative integer per line, no header.
    Samples,
}

/// Everything downstream works on dense arrays indexed by value, so cap
/// the largest representable value at something generous but finite.
pub const MAX_VALUE: u64 = 10_000_000;

/// A tally of observed values: distinct nonnegative integers with positive
/// counts, plus the total count `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pairs: Vec<(u64, u64)>,
    n: u64,
}

impl CountTable {
    /// Builds a table from (value, count) pairs. Zero counts are dropped;
    /// duplicate values are rejected; the total must be positive.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (value, count) in pairs {
            if value > MAX_VALUE {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("value {value} exceeds the supported maximum {MAX_VALUE}"),
                });
            }
            if map.insert(value, count).is_some() {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("duplicate value {value}"),
                });
            }
        }
        let pairs: Vec<(u64, u64)> = map.into_iter().filter(|&(_, c)| c > 0).collect();
        let n = pairs.iter().map(|&(_, c)| c).sum();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(CountTable { pairs, n })
    }

    pub fn from_samples(samples: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut map: BTreeMap<u64, u64> = BTreeMap::new();
        for s in samples {
            if s > MAX_VALUE {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("sample {s} exceeds the supported maximum {MAX_VALUE}"),
                });
            }
            *map.entry(s).or_insert(0) += 1;
        }
        if map.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = map.values().sum();
        Ok(CountTable {
            pairs: map.into_iter().collect(),
            n,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn pairs(&self) -> &[(u64, u64)] {
        &self.pairs
    }

    /// Largest observed value.
    pub fn max_value(&self) -> u64 {
        self.pairs.last().map(|&(v, _)| v).unwrap_or(0)
    }

    /// The empirical pmf: `p̃(v) = count(v) / n`.
    pub fn empirical_pmf(&self) -> ProbSeq {
        let mut values = vec![0.0; self.max_value() as usize + 1];
        for &(v, c) in &self.pairs {
            values[v as usize] = c as f64 / self.n as f64;
        }
        ProbSeq::new(DiscreteSeq::new(values)).expect("counts/n is a pmf")
    }
}

/// Parses a count table from a reader. Errors carry 1-based line numbers.
pub fn read_counts<R: BufRead>(reader: R, format: InputFormat) -> Result<CountTable> {
    let parse_u64 = |field: &str, line: usize, what: &str| -> Result<u64> {
        field.trim().parse::<u64>().map_err(|_| Error::Parse {
            line,
            msg: format!("{what} must be a nonnegative integer, got {:?}", field.trim()),
        })
    };

    let mut pairs = Vec::new();
    let mut samples = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match format {
            InputFormat::Counts => {
                if !saw_header {
                    if trimmed != "value,count" {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("expected header \"value,count\", got {trimmed:?}"),
                        });
                    }
                    saw_header = true;
                    continue;
                }
                let mut fields = trimmed.split(',');
                let (Some(v), Some(c), None) = (fields.next(), fields.next(), fields.next())
                else {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected two comma-separated fields, got {trimmed:?}"),
                    });
                };
                let value = parse_u64(v, lineno, "value")?;
                let count = parse_u64(c, lineno, "count")?;
                if pairs.iter().any(|&(pv, _)| pv == value) {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("duplicate value {value}"),
                    });
                }
                pairs.push((value, count));
            }
            InputFormat::Samples => {
                samples.push(parse_u64(trimmed, lineno, "sample")?);
            }
        }
    }
    match format {
        InputFormat::Counts => {
            if !saw_header {
                return Err(Error::EmptyInput);
            }
            CountTable::from_pairs(pairs)
        }
        InputFormat::Samples => CountTable::from_samples(samples),
    }
}
