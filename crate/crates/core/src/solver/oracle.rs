//! Exhaustive enumeration of true-outcome vectors.

use std::collections::HashMap;

use num_bigint::BigInt;

use crate::audit::WarningAccuracy;
use crate::error::{Error, Result};
use crate::experiment::{tables_for, OutcomeVector, StratifiedExperiment, StratumTable};
use crate::inference::{Decision, DecisionRule, NullSpec, TestDecision};
use crate::rational::Rational;

/// Largest N the oracle accepts by default.
pub const ORACLE_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub measured: TestDecision,
    pub warning_accuracy: WarningAccuracy,
    /// Every optimal witness in lexicographic order (empty when the decision
    /// cannot be overturned).
    pub witnesses: Vec<OutcomeVector>,
}

/// Warning accuracy by enumerating all 2^N outcome vectors, with the
/// lexicographically lowest optimal witness.
pub fn brute_force_wa(exp: &StratifiedExperiment, spec: &NullSpec) -> Result<(WarningAccuracy, Option<OutcomeVector>)> {
    let res = enumerate(exp, spec, ORACLE_CAP, false)?;
    Ok((res.warning_accuracy, res.witnesses.into_iter().next()))
}

/// Like [`brute_force_wa`], returning all optimal witnesses.
pub fn brute_force_all(exp: &StratifiedExperiment, spec: &NullSpec, cap: usize) -> Result<OracleResult> {
    enumerate(exp, spec, cap, true)
}

fn enumerate(exp: &StratifiedExperiment, spec: &NullSpec, cap: usize, all: bool) -> Result<OracleResult> {
    let n = exp.num_subjects();
    if n > cap || n >= 63 {
        return Err(Error::OracleCapExceeded { n, cap });
    }
    let rule = DecisionRule::new(spec)?;
    rule.check(exp)?;
    let measured = rule.decide(exp, exp.measured())?;
    let target = measured.decision.opposite();
    let star: u64 = (0..n).fold(0, |acc, i| (acc << 1) | exp.measured().get(i) as u64);

    let mut memo: HashMap<Vec<StratumTable>, Decision> = HashMap::new();
    let mut best_d = u32::MAX;
    let mut found: Vec<u64> = Vec::new();
    let mut y = OutcomeVector::zeros(n);
    for mask in 0..(1u64 << n) {
        let d = (mask ^ star).count_ones();
        if d > best_d || (d == best_d && !all) {
            continue;
        }
        for i in 0..n {
            y.set(i, (mask >> (n - 1 - i)) & 1 == 1);
        }
        let tables = tables_for(exp, &y);
        let decision = match memo.get(&tables) {
            Some(&dec) => dec,
            None => {
                let dec = rule.decide_tables(&tables)?.decision;
                memo.insert(tables, dec);
                dec
            }
        };
        if decision != target {
            continue;
        }
        if d < best_d {
            best_d = d;
            found.clear();
        }
        found.push(mask);
    }
    let to_vector = |mask: u64| OutcomeVector::new((0..n).map(|i| (mask >> (n - 1 - i)) & 1 == 1).collect());
    let warning_accuracy = if found.is_empty() {
        WarningAccuracy::NotOverturnable
    } else {
        WarningAccuracy::Value(Rational::new(
            BigInt::from(n as u64 - best_d as u64),
            BigInt::from(n as u64),
        ))
    };
    Ok(OracleResult {
        measured,
        warning_accuracy,
        witnesses: found.into_iter().map(to_vector).collect(),
    })
}
