//! JSON report layout. Every report carries `schema_version`; rationals are
//! written as `{"num", "den", "decimal"}` with integer strings so nothing is
//! lost, and the only fields that vary between identical runs are named
//! `wall_time_seconds`.

use serde::Serialize;
use warnacc_core::audit::{SolverSummary, SubjectRef};
use warnacc_core::rational::to_decimal_string;
use warnacc_core::{
    AnalysisReport, Decision, DecisionMethod, DesignAccuracyResult, DesignType, FormulationUsed, NullKind,
    NullSpec, Rational, SensitivityWeights, Sidedness, SolveStatus, TestDecision, WarningAccuracy,
};

pub const SCHEMA_VERSION: u32 = 1;
const DECIMAL_PLACES: usize = 10;

#[derive(Serialize)]
pub struct RationalJson {
    pub num: String,
    pub den: String,
    pub decimal: String,
}

impl From<&Rational> for RationalJson {
    fn from(r: &Rational) -> Self {
        RationalJson {
            num: r.numer().to_string(),
            den: r.denom().to_string(),
            decimal: to_decimal_string(r, DECIMAL_PLACES),
        }
    }
}

#[derive(Serialize)]
pub struct InputJson {
    pub subjects: usize,
    pub strata: usize,
}

#[derive(Serialize)]
pub struct NullSpecJson {
    pub null: &'static str,
    pub method: &'static str,
    pub sided: &'static str,
    pub alpha: RationalJson,
}

impl From<&NullSpec> for NullSpecJson {
    fn from(s: &NullSpec) -> Self {
        NullSpecJson {
            null: match s.null_kind {
                NullKind::Sharp => "sharp",
                NullKind::Weak => "weak",
            },
            method: match s.method {
                DecisionMethod::ChiSquare => "chisq",
                DecisionMethod::ExactEnumeration => "exact",
            },
            sided: match s.sidedness {
                Sidedness::OneSidedUpper => "one",
                Sidedness::TwoSided => "two",
            },
            alpha: (&s.alpha).into(),
        }
    }
}

#[derive(Serialize)]
pub struct DecisionJson {
    pub decision: &'static str,
    pub statistic: RationalJson,
    pub threshold: RationalJson,
    pub degenerate: bool,
}

pub fn decision_name(d: Decision) -> &'static str {
    match d {
        Decision::Reject => "reject",
        Decision::Accept => "accept",
    }
}

impl From<&TestDecision> for DecisionJson {
    fn from(t: &TestDecision) -> Self {
        DecisionJson {
            decision: decision_name(t.decision),
            statistic: (&t.statistic).into(),
            threshold: (&t.threshold).into(),
            degenerate: t.degenerate,
        }
    }
}

#[derive(Serialize)]
pub struct AccuracyJson {
    /// value, lower_bound, not_overturnable or unknown
    pub status: &'static str,
    pub value: Option<RationalJson>,
}

impl From<&WarningAccuracy> for AccuracyJson {
    fn from(w: &WarningAccuracy) -> Self {
        let (status, value) = match w {
            WarningAccuracy::Value(v) => ("value", Some(v.into())),
            WarningAccuracy::LowerBound(v) => ("lower_bound", Some(v.into())),
            WarningAccuracy::NotOverturnable => ("not_overturnable", None),
            WarningAccuracy::Unknown => ("unknown", None),
        };
        AccuracyJson { status, value }
    }
}

#[derive(Serialize)]
pub struct SubjectJson {
    pub stratum: String,
    /// 1-based line of the subject in the input file.
    pub row: Option<usize>,
}

impl From<&SubjectRef> for SubjectJson {
    fn from(s: &SubjectRef) -> Self {
        SubjectJson {
            stratum: s.label.clone(),
            row: s.row,
        }
    }
}

#[derive(Serialize)]
pub struct WeightsJson {
    pub treated_fp: RationalJson,
    pub treated_fn: RationalJson,
    pub control_fp: RationalJson,
    pub control_fn: RationalJson,
}

impl From<&SensitivityWeights> for WeightsJson {
    fn from(w: &SensitivityWeights) -> Self {
        WeightsJson {
            treated_fp: (&w.treated_fp).into(),
            treated_fn: (&w.treated_fn).into(),
            control_fp: (&w.control_fp).into(),
            control_fn: (&w.control_fn).into(),
        }
    }
}

#[derive(Serialize)]
pub struct SolverJson {
    pub status: &'static str,
    pub nodes_explored: u64,
    pub lower_bound_only: bool,
    pub wall_time_seconds: f64,
}

impl From<&SolverSummary> for SolverJson {
    fn from(s: &SolverSummary) -> Self {
        SolverJson {
            status: match s.status {
                None => "enumerated",
                Some(SolveStatus::Optimal) => "optimal",
                Some(SolveStatus::Infeasible) => "infeasible",
                Some(SolveStatus::BudgetExceeded) => "budget_exceeded",
            },
            nodes_explored: s.nodes_explored,
            lower_bound_only: s.lower_bound_only,
            wall_time_seconds: s.wall_time.as_secs_f64(),
        }
    }
}

#[derive(Serialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub input: InputJson,
    pub null_spec: NullSpecJson,
    pub measured_decision: DecisionJson,
    pub p_value: Option<RationalJson>,
    pub warning_accuracy: AccuracyJson,
    pub minimal_alteration_number: Option<u64>,
    pub sensitive_set: Vec<SubjectJson>,
    /// Weights of the canonical optimal witness.
    pub sensitivity_weights: Option<WeightsJson>,
    pub formulation: &'static str,
    pub design_type: Option<&'static str>,
    pub solver: SolverJson,
}

pub fn formulation_name(f: FormulationUsed) -> &'static str {
    match f {
        FormulationUsed::P1 => "P1",
        FormulationUsed::P2 => "P2",
        FormulationUsed::P3 => "P3",
        FormulationUsed::P4 => "P4",
        FormulationUsed::BruteForce => "brute_force",
    }
}

impl AnalyzeReport {
    pub fn new(input: InputJson, r: &AnalysisReport) -> Self {
        AnalyzeReport {
            schema_version: SCHEMA_VERSION,
            command: "analyze",
            input,
            null_spec: (&r.null_spec).into(),
            measured_decision: (&r.measured_decision).into(),
            p_value: r.p_value.as_ref().map(Into::into),
            warning_accuracy: (&r.warning_accuracy).into(),
            minimal_alteration_number: r.minimal_alteration_number,
            sensitive_set: r.sensitive_set.iter().map(Into::into).collect(),
            sensitivity_weights: r.weights.as_ref().map(Into::into),
            formulation: formulation_name(r.formulation_used),
            design_type: r.design_type.map(|d| match d {
                DesignType::TypeI => "type_i",
                DesignType::TypeII => "type_ii",
            }),
            solver: (&r.solver).into(),
        }
    }
}

#[derive(Serialize)]
pub struct PvalueReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub input: InputJson,
    pub null_spec: NullSpecJson,
    pub decision: DecisionJson,
    /// Exact randomization p-value; null for chi-square decisions.
    pub p_value: Option<RationalJson>,
    /// Floating-point p-value: the exact one rounded, or the chi-square
    /// upper tail of the statistic.
    pub p_value_approx: f64,
}

#[derive(Serialize)]
pub struct WitnessJson {
    pub sensitive_set: Vec<SubjectJson>,
    pub sensitivity_weights: Option<WeightsJson>,
}

#[derive(Serialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub input: InputJson,
    pub null_spec: NullSpecJson,
    pub measured_decision: DecisionJson,
    pub warning_accuracy: AccuracyJson,
    pub minimal_alteration_number: Option<u64>,
    /// Every optimal witness, lexicographically ordered.
    pub witnesses: Vec<WitnessJson>,
}

#[derive(Serialize)]
pub struct DesignReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub input: InputJson,
    pub null_spec: NullSpecJson,
    pub p0: f64,
    pub p1: f64,
    pub replications: usize,
    pub seed: u64,
    pub estimate: f64,
    pub estimate_exact: RationalJson,
    pub monte_carlo_stderr: f64,
    /// Inner optimum of each counted replication, in replication order.
    pub values: Vec<RationalJson>,
    /// Replications left out after running out of budget.
    pub excluded: Vec<usize>,
}

impl DesignReport {
    pub fn new(input: InputJson, spec: &NullSpec, p0: f64, p1: f64, r: &DesignAccuracyResult) -> Self {
        DesignReport {
            schema_version: SCHEMA_VERSION,
            command: "design",
            input,
            null_spec: spec.into(),
            p0,
            p1,
            replications: r.replications,
            seed: r.seed,
            estimate: r.estimate,
            estimate_exact: (&r.estimate_exact).into(),
            monte_carlo_stderr: r.monte_carlo_stderr,
            values: r.values.iter().map(Into::into).collect(),
            excluded: r.excluded.clone(),
        }
    }
}
