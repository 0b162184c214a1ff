//! Exact sensitivity auditing of stratified randomized experiments with
//! binary outcomes that may be misclassified.
//!
//! The crate computes warning accuracy (the largest accuracy of the measured
//! outcomes under which the test decision could still be overturned),
//! minimal alteration numbers, sensitive sets, sensitivity weights and
//! Monte-Carlo design accuracy. Warning accuracy is obtained by building an
//! integer program with one quadratic constraint and solving it exactly with
//! a dedicated branch and bound.

pub mod audit;
pub mod error;
pub mod experiment;
pub mod formulation;
pub mod inference;
pub mod rational;
pub mod solver;
pub mod symmetry;

pub use audit::{
    design_accuracy, design_accuracy_with, expected_misclassification_table, sensitive_set, sensitivity_weights,
    warning_accuracy, warning_accuracy_with_log, AnalysisReport, DesignAccuracyResult, FormulationUsed, SensitivityWeights,
    WarningAccuracy,
};
pub use error::{Error, Result};
pub use experiment::{
    accuracy, alteration_count, load_experiment, load_experiment_path, stratum_tables,
    OutcomeVector, Stratum, StratifiedExperiment, StratumTable, SubjectRecord,
};
pub use formulation::{
    build_p1, build_p2, build_p3, build_p4, constraint_value, FlipDirection, IqclpProblem,
    QuadSense, VarMeta,
};
pub use inference::{
    chisq_quantile, chisq_upper_tail, decide, exact_randomization_pvalue, mh_decision, mh_moments, mh_statistic,
    neyman_decision, neyman_statistic, neyman_varhat, Decision, DecisionMethod, DecisionRule, NullKind,
    NullSpec, Sidedness, TestDecision,
};
pub use rational::Rational;
pub use solver::{brute_force_wa, solve, SolveResult, SolveStatus, SolverBudget};
pub use symmetry::{
    classify_design, enumerate_delta_tables, log_group_sizes, DeltaTable, DesignType,
    UniqueTableIndex,
};
