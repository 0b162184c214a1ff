//! Stratified experiments: treatment indicators and measured binary outcomes.
//!
//! Subjects are held in a canonical order: strata in order of first
//! appearance in the input, subjects within a stratum in input row order.
//! Every outcome vector in the crate is aligned to that order.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::rational::Rational;

/// A binary outcome vector aligned to an experiment's canonical ordering.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeVector(Vec<bool>);

impl OutcomeVector {
    pub fn new(values: Vec<bool>) -> Self {
        OutcomeVector(values)
    }

    /// Builds from 0/1 integers, rejecting anything else.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::InvalidParameter(format!(
                    "outcome at position {i} is {b}, expected 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(OutcomeVector)
    }

    pub fn zeros(len: usize) -> Self {
        OutcomeVector(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&v| v).count()
    }
}

impl From<Vec<bool>> for OutcomeVector {
    fn from(v: Vec<bool>) -> Self {
        OutcomeVector(v)
    }
}

/// One subject as seen through the canonical ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectRecord<'a> {
    pub stratum_id: &'a str,
    pub subject_index: usize,
    pub treated: bool,
    pub measured_outcome: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    label: String,
    treated: Vec<bool>,
    source_rows: Vec<usize>,
    offset: usize,
    treated_count: usize,
}

impl Stratum {
    pub fn label(&self) -> &str {
        &self.label
    }

    /// n_i
    pub fn size(&self) -> usize {
        self.treated.len()
    }

    /// m_i
    pub fn treated_count(&self) -> usize {
        self.treated_count
    }

    pub fn control_count(&self) -> usize {
        self.size() - self.treated_count
    }

    pub fn treated(&self) -> &[bool] {
        &self.treated
    }

    /// Position of the stratum's first subject in the canonical ordering.
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.size()
    }

    /// 1-based line numbers of the subjects in the source file (header is line 1).
    /// Synthetic experiments number rows in canonical order.
    pub fn source_rows(&self) -> &[usize] {
        &self.source_rows
    }
}

/// The measured 2x2 table of one stratum, counted by (arm, measured outcome).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct StratumTable {
    pub control_negative: u64,
    pub control_positive: u64,
    pub treated_negative: u64,
    pub treated_positive: u64,
}

impl StratumTable {
    pub fn new(
        control_negative: u64,
        control_positive: u64,
        treated_negative: u64,
        treated_positive: u64,
    ) -> Self {
        StratumTable {
            control_negative,
            control_positive,
            treated_negative,
            treated_positive,
        }
    }

    pub fn size(&self) -> u64 {
        self.control_negative + self.control_positive + self.treated_negative + self.treated_positive
    }

    pub fn treated(&self) -> u64 {
        self.treated_negative + self.treated_positive
    }

    pub fn control(&self) -> u64 {
        self.control_negative + self.control_positive
    }

    /// Counts in component order (00, 01, 10, 11).
    pub fn as_array(&self) -> [u64; 4] {
        [
            self.control_negative,
            self.control_positive,
            self.treated_negative,
            self.treated_positive,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifiedExperiment {
    strata: Vec<Stratum>,
    measured: OutcomeVector,
}

impl StratifiedExperiment {
    /// Builds an experiment from `(label, treated, measured)` triples, one per
    /// stratum, in the given order.
    pub fn from_strata<S: Into<String>>(strata: Vec<(S, Vec<bool>, Vec<bool>)>) -> Result<Self> {
        if strata.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut built = Vec::with_capacity(strata.len());
        let mut measured = Vec::new();
        let mut offset = 0;
        for (label, treated, outcome) in strata {
            if treated.len() != outcome.len() {
                return Err(Error::LengthMismatch {
                    expected: treated.len(),
                    found: outcome.len(),
                });
            }
            let rows = (offset..offset + treated.len()).map(|i| i + 2).collect();
            let stratum = Stratum::checked(label.into(), treated, rows, offset)?;
            offset += stratum.size();
            measured.extend(outcome);
            built.push(stratum);
        }
        Ok(StratifiedExperiment {
            strata: built,
            measured: OutcomeVector(measured),
        })
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn num_strata(&self) -> usize {
        self.strata.len()
    }

    /// N
    pub fn num_subjects(&self) -> usize {
        self.measured.len()
    }

    pub fn total_treated(&self) -> usize {
        self.strata.iter().map(Stratum::treated_count).sum()
    }

    pub fn measured(&self) -> &OutcomeVector {
        &self.measured
    }

    /// Treatment indicators in canonical order.
    pub fn treatment(&self) -> Vec<bool> {
        self.strata
            .iter()
            .flat_map(|s| s.treated.iter().copied())
            .collect()
    }

    /// Same design with `outcomes` taking the place of the measured outcomes.
    pub fn with_outcomes(&self, outcomes: OutcomeVector) -> Result<Self> {
        self.check_len(&outcomes)?;
        Ok(StratifiedExperiment {
            strata: self.strata.clone(),
            measured: outcomes,
        })
    }

    pub fn check_len(&self, y: &OutcomeVector) -> Result<()> {
        if y.len() != self.num_subjects() {
            return Err(Error::LengthMismatch {
                expected: self.num_subjects(),
                found: y.len(),
            });
        }
        Ok(())
    }

    pub fn subjects(&self) -> impl Iterator<Item = SubjectRecord<'_>> + '_ {
        self.strata.iter().flat_map(move |s| {
            s.treated
                .iter()
                .enumerate()
                .map(move |(j, &treated)| SubjectRecord {
                    stratum_id: &s.label,
                    subject_index: j,
                    treated,
                    measured_outcome: self.measured.get(s.offset + j),
                })
        })
    }
}

impl Stratum {
    fn checked(label: String, treated: Vec<bool>, source_rows: Vec<usize>, offset: usize) -> Result<Self> {
        let treated_count = treated.iter().filter(|&&z| z).count();
        if treated_count == 0 || treated_count == treated.len() {
            return Err(Error::DegenerateStratum {
                stratum: label,
                treated: treated_count,
                size: treated.len(),
            });
        }
        Ok(Stratum {
            label,
            treated,
            source_rows,
            offset,
            treated_count,
        })
    }
}

fn parse_bit(field: &str, what: &str, row: usize) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::MalformedRow {
            row,
            message: format!("{what} must be 0 or 1, found `{other}`"),
        }),
    }
}

/// Reads `stratum,treated,outcome` CSV. Blank lines are skipped; row numbers
/// in errors are 1-based file line numbers.
pub fn load_experiment<R: BufRead>(reader: R) -> Result<StratifiedExperiment> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => return Err(Error::EmptyInput),
            Some((i, line)) => {
                let line = line.map_err(|e| Error::MalformedRow {
                    row: i + 1,
                    message: e.to_string(),
                })?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
        }
    };
    let header = header.trim_start_matches('\u{feff}').trim();
    if header != "stratum,treated,outcome" {
        return Err(Error::BadHeader(header.to_string()));
    }

    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<(Vec<bool>, Vec<bool>, Vec<usize>)> = Vec::new();
    for (i, line) in lines {
        let row = i + 1;
        let line = line.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let label = fields[0].trim();
        if label.is_empty() {
            return Err(Error::MalformedRow {
                row,
                message: "empty stratum label".into(),
            });
        }
        let treated = parse_bit(fields[1], "treated", row)?;
        let outcome = parse_bit(fields[2], "outcome", row)?;
        let slot = *index.entry(label.to_string()).or_insert_with(|| {
            order.push(label.to_string());
            groups.push((Vec::new(), Vec::new(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].0.push(treated);
        groups[slot].1.push(outcome);
        groups[slot].2.push(row);
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut strata = Vec::with_capacity(groups.len());
    let mut measured = Vec::new();
    let mut offset = 0;
    for (label, (treated, outcome, rows)) in order.into_iter().zip(groups) {
        let stratum = Stratum::checked(label, treated, rows, offset)?;
        offset += stratum.size();
        measured.extend(outcome);
        strata.push(stratum);
    }
    Ok(StratifiedExperiment {
        strata,
        measured: OutcomeVector(measured),
    })
}

pub fn load_experiment_path(path: impl AsRef<Path>) -> Result<StratifiedExperiment> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| {
        Error::InvalidParameter(format!("cannot open {}: {e}", path.as_ref().display()))
    })?;
    load_experiment(std::io::BufReader::new(file))
}

/// Measured 2x2 tables, one per stratum.
pub fn stratum_tables(exp: &StratifiedExperiment) -> Vec<StratumTable> {
    tables_for(exp, exp.measured())
}

/// 2x2 tables of `y` against the design's treatment indicators.
pub(crate) fn tables_for(exp: &StratifiedExperiment, y: &OutcomeVector) -> Vec<StratumTable> {
    exp.strata()
        .iter()
        .map(|s| {
            let mut t = StratumTable::default();
            for (j, &z) in s.treated().iter().enumerate() {
                let cell = match (z, y.get(s.offset() + j)) {
                    (false, false) => &mut t.control_negative,
                    (false, true) => &mut t.control_positive,
                    (true, false) => &mut t.treated_negative,
                    (true, true) => &mut t.treated_positive,
                };
                *cell += 1;
            }
            t
        })
        .collect()
}

fn check_pair(a: &OutcomeVector, b: &OutcomeVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Hamming distance between two outcome vectors.
pub fn alteration_count(y_star: &OutcomeVector, y: &OutcomeVector) -> Result<usize> {
    check_pair(y_star, y)?;
    Ok(y_star
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .filter(|(a, b)| a != b)
        .count())
}

/// Proportion of positions where the two vectors agree, as an exact rational.
pub fn accuracy(y_star: &OutcomeVector, y: &OutcomeVector) -> Result<Rational> {
    let altered = alteration_count(y_star, y)?;
    let n = y_star.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(Rational::new(BigInt::from(n - altered), BigInt::from(n)))
}
