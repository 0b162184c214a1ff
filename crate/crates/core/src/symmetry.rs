//! Symmetry diagnostics and the deduplicated stratum-table index.
//!
//! Subjects sharing a stratum, arm and measured outcome are interchangeable
//! (within-strata symmetry), and strata with identical measured tables are
//! interchangeable (between-strata symmetry). The first is exploited by
//! aggregating per-stratum counts, the second by counting how many strata
//! of a class receive each possible table of true outcomes.

use std::collections::HashMap;

use statrs::function::factorial::ln_factorial;

use crate::experiment::{stratum_tables, StratifiedExperiment, StratumTable};

/// Numbers of true positives among the subjects of one stratum, split by
/// arm and measured outcome. Field names mirror [`StratumTable`]: for
/// example `treated_positive` counts treated subjects measured positive
/// whose true outcome is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DeltaTable {
    pub control_negative: u64,
    pub control_positive: u64,
    pub treated_negative: u64,
    pub treated_positive: u64,
}

impl DeltaTable {
    pub fn new(
        control_negative: u64,
        control_positive: u64,
        treated_negative: u64,
        treated_positive: u64,
    ) -> Self {
        DeltaTable {
            control_negative,
            control_positive,
            treated_negative,
            treated_positive,
        }
    }

    pub fn as_array(&self) -> [u64; 4] {
        [
            self.control_negative,
            self.control_positive,
            self.treated_negative,
            self.treated_positive,
        ]
    }

    /// True positives in the treated arm.
    pub fn treated(&self) -> u64 {
        self.treated_negative + self.treated_positive
    }

    /// True positives in the control arm.
    pub fn control(&self) -> u64 {
        self.control_negative + self.control_positive
    }

    pub fn fits(&self, class: &StratumTable) -> bool {
        self.as_array()
            .iter()
            .zip(class.as_array())
            .all(|(d, l)| *d <= l)
    }
}

/// All tables that fit under `class`, in lexicographic order.
pub fn enumerate_delta_tables(class: &StratumTable) -> Vec<DeltaTable> {
    let [a, b, c, d] = class.as_array();
    let mut out = Vec::with_capacity(((a + 1) * (b + 1) * (c + 1) * (d + 1)) as usize);
    for w in 0..=a {
        for x in 0..=b {
            for y in 0..=c {
                for z in 0..=d {
                    out.push(DeltaTable::new(w, x, y, z));
                }
            }
        }
    }
    out
}

/// Number of delta tables of a class: the product of (count + 1).
pub fn delta_count(class: &StratumTable) -> u128 {
    class.as_array().iter().map(|&v| v as u128 + 1).product()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniqueTableIndex {
    unique_tables: Vec<StratumTable>,
    multiplicities: Vec<usize>,
    stratum_to_class: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl UniqueTableIndex {
    pub fn build(exp: &StratifiedExperiment) -> Self {
        Self::from_tables(&stratum_tables(exp))
    }

    /// Classes in order of first appearance.
    pub fn from_tables(tables: &[StratumTable]) -> Self {
        let mut seen: HashMap<StratumTable, usize> = HashMap::new();
        let mut unique_tables = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut stratum_to_class = Vec::with_capacity(tables.len());
        for (i, t) in tables.iter().enumerate() {
            let s = *seen.entry(*t).or_insert_with(|| {
                unique_tables.push(*t);
                members.push(Vec::new());
                unique_tables.len() - 1
            });
            members[s].push(i);
            stratum_to_class.push(s);
        }
        UniqueTableIndex {
            multiplicities: members.iter().map(Vec::len).collect(),
            unique_tables,
            stratum_to_class,
            members,
        }
    }

    pub fn unique_tables(&self) -> &[StratumTable] {
        &self.unique_tables
    }

    /// P_s per class.
    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn stratum_to_class(&self) -> &[usize] {
        &self.stratum_to_class
    }

    /// Strata of class `s` in input order.
    pub fn members(&self, s: usize) -> &[usize] {
        &self.members[s]
    }

    pub fn num_classes(&self) -> usize {
        self.unique_tables.len()
    }

    /// Total number of d variables.
    pub fn delta_variable_count(&self) -> u128 {
        self.unique_tables.iter().map(delta_count).sum()
    }
}

/// (log |G_within|, log |G_between|).
pub fn log_group_sizes(exp: &StratifiedExperiment) -> (f64, f64) {
    let tables = stratum_tables(exp);
    let within = tables
        .iter()
        .flat_map(|t| t.as_array())
        .map(ln_factorial)
        .sum();
    let index = UniqueTableIndex::from_tables(&tables);
    let between = index
        .multiplicities()
        .iter()
        .map(|&p| ln_factorial(p as u64))
        .sum();
    (within, between)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignType {
    /// Within-strata symmetry dominates; aggregate per stratum.
    TypeI,
    /// Between-strata symmetry dominates; count tables per class.
    TypeII,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignDiagnosis {
    pub design_type: DesignType,
    pub stratum_variables: u128,
    pub delta_variables: u128,
    pub log_within: f64,
    pub log_between: f64,
    /// True when comparing group sizes would pick the other type.
    pub criteria_disagree: bool,
}

pub fn diagnose_design(exp: &StratifiedExperiment) -> DesignDiagnosis {
    let index = UniqueTableIndex::build(exp);
    let stratum_variables = 4 * exp.num_strata() as u128;
    let delta_variables = index.delta_variable_count();
    let design_type = if stratum_variables <= delta_variables {
        DesignType::TypeI
    } else {
        DesignType::TypeII
    };
    let (log_within, log_between) = log_group_sizes(exp);
    let by_groups = if log_within >= log_between {
        DesignType::TypeI
    } else {
        DesignType::TypeII
    };
    DesignDiagnosis {
        design_type,
        stratum_variables,
        delta_variables,
        log_within,
        log_between,
        criteria_disagree: by_groups != design_type,
    }
}

/// Type I when the per-stratum formulation has no more variables than the
/// per-class one.
pub fn classify_design(exp: &StratifiedExperiment) -> DesignType {
    diagnose_design(exp).design_type
}
