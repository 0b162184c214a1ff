//! Warning accuracy, sensitive sets, sensitivity weights and design accuracy.

use num_bigint::BigInt;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::{accuracy, OutcomeVector, StratifiedExperiment};
use crate::formulation::{
    build_p1_with, build_p2_with, build_p3_with, build_p4_with, decode_witness, FlipDirection, IqclpProblem,
};
use crate::inference::{DecisionMethod, DecisionRule, NullKind, NullSpec, TestDecision};
use crate::rational::{to_f64, Rational};
use crate::solver::{brute_force_wa, solve, solve_with_log, SolveStatus, SolverBudget, ORACLE_CAP};
use crate::symmetry::{classify_design, DesignType, UniqueTableIndex};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarningAccuracy {
    Value(Rational),
    /// The solver budget ran out; the best overturning point found so far.
    LowerBound(Rational),
    /// No true-outcome vector changes the decision.
    NotOverturnable,
    /// The solver budget ran out before any overturning point was found.
    Unknown,
}

impl WarningAccuracy {
    /// The proven value, if any.
    pub fn value(&self) -> Option<&Rational> {
        match self {
            WarningAccuracy::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormulationUsed {
    P1,
    P2,
    P3,
    P4,
    BruteForce,
}

/// Shares of the sensitive set in each misclassification cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensitivityWeights {
    pub treated_fp: Rational,
    pub treated_fn: Rational,
    pub control_fp: Rational,
    pub control_fn: Rational,
}

impl SensitivityWeights {
    pub fn as_array(&self) -> [&Rational; 4] {
        [&self.treated_fp, &self.treated_fn, &self.control_fp, &self.control_fn]
    }
}

/// One subject of a sensitive set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectRef {
    pub stratum: usize,
    pub label: String,
    /// Position in canonical order.
    pub index: usize,
    /// 1-based line in the source file, when loaded from one.
    pub row: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverSummary {
    /// None for brute force.
    pub status: Option<SolveStatus>,
    pub nodes_explored: u64,
    pub wall_time: std::time::Duration,
    pub lower_bound_only: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisReport {
    pub null_spec: NullSpec,
    pub measured_decision: TestDecision,
    pub p_value: Option<Rational>,
    pub warning_accuracy: WarningAccuracy,
    pub minimal_alteration_number: Option<u64>,
    pub witness: Option<OutcomeVector>,
    pub sensitive_set: Vec<SubjectRef>,
    /// Weights of the canonical optimal witness.
    pub weights: Option<SensitivityWeights>,
    pub solver: SolverSummary,
    pub formulation_used: FormulationUsed,
    pub design_type: Option<DesignType>,
}

/// Subjects whose outcome differs between the witness and the measured
/// outcomes, in canonical order.
pub fn sensitive_set(exp: &StratifiedExperiment, witness: &OutcomeVector) -> Result<Vec<SubjectRef>> {
    exp.check_len(witness)?;
    let mut out = Vec::new();
    for (s, stratum) in exp.strata().iter().enumerate() {
        for (j, i) in stratum.range().enumerate() {
            if witness.get(i) != exp.measured().get(i) {
                out.push(SubjectRef {
                    stratum: s,
                    label: stratum.label().to_string(),
                    index: i,
                    row: stratum.source_rows().get(j).copied(),
                });
            }
        }
    }
    Ok(out)
}

/// A false positive is measured positive but truly negative.
pub fn sensitivity_weights(exp: &StratifiedExperiment, witness: &OutcomeVector) -> Result<SensitivityWeights> {
    exp.check_len(witness)?;
    let z = exp.treatment();
    let mut counts = [0i64; 4];
    for (i, &treated) in z.iter().enumerate() {
        let measured = exp.measured().get(i);
        if witness.get(i) == measured {
            continue;
        }
        let cell = match (treated, measured) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        counts[cell] += 1;
    }
    let total: i64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidParameter(
            "sensitivity weights need a witness that differs from the measured outcomes".into(),
        ));
    }
    let w = |c: i64| Rational::new(BigInt::from(c), BigInt::from(total));
    Ok(SensitivityWeights {
        treated_fp: w(counts[0]),
        treated_fn: w(counts[1]),
        control_fp: w(counts[2]),
        control_fn: w(counts[3]),
    })
}

fn build(
    exp: &StratifiedExperiment,
    rule: &DecisionRule,
    dir: FlipDirection,
) -> (IqclpProblem, FormulationUsed, DesignType) {
    let design = classify_design(exp);
    let chisq = rule.chisq();
    let (problem, used) = match (rule.spec().null_kind, design) {
        (NullKind::Sharp, DesignType::TypeI) => (build_p1_with(exp, chisq, dir), FormulationUsed::P1),
        (NullKind::Weak, DesignType::TypeI) => (build_p3_with(exp, chisq, dir), FormulationUsed::P3),
        (NullKind::Sharp, DesignType::TypeII) => {
            let index = UniqueTableIndex::build(exp);
            (build_p2_with(exp, chisq, dir, &index), FormulationUsed::P2)
        }
        (NullKind::Weak, DesignType::TypeII) => {
            let index = UniqueTableIndex::build(exp);
            (build_p4_with(exp, chisq, dir, &index), FormulationUsed::P4)
        }
    };
    (problem, used, design)
}

pub fn warning_accuracy(exp: &StratifiedExperiment, spec: &NullSpec, budget: SolverBudget) -> Result<AnalysisReport> {
    warning_accuracy_inner(exp, spec, budget, None)
}

/// [`warning_accuracy`] writing the branch-and-bound trace to `log`. Brute
/// force writes nothing.
pub fn warning_accuracy_with_log(
    exp: &StratifiedExperiment,
    spec: &NullSpec,
    budget: SolverBudget,
    log: &mut dyn std::io::Write,
) -> Result<AnalysisReport> {
    warning_accuracy_inner(exp, spec, budget, Some(log))
}

fn warning_accuracy_inner(
    exp: &StratifiedExperiment,
    spec: &NullSpec,
    budget: SolverBudget,
    log: Option<&mut dyn std::io::Write>,
) -> Result<AnalysisReport> {
    let rule = DecisionRule::new(spec)?;
    rule.check(exp)?;
    let measured = rule.decide(exp, exp.measured())?;
    let n = exp.num_subjects() as u64;

    let (wa, witness, solver, used, design_type) = match spec.method {
        DecisionMethod::ExactEnumeration => {
            let start = std::time::Instant::now();
            if exp.num_subjects() > ORACLE_CAP {
                return Err(Error::OracleCapExceeded {
                    n: exp.num_subjects(),
                    cap: ORACLE_CAP,
                });
            }
            let (wa, witness) = brute_force_wa(exp, spec)?;
            let summary = SolverSummary {
                status: None,
                nodes_explored: 1u64 << exp.num_subjects(),
                wall_time: start.elapsed(),
                lower_bound_only: false,
            };
            (wa, witness, summary, FormulationUsed::BruteForce, None)
        }
        DecisionMethod::ChiSquare => {
            let dir = FlipDirection {
                original_decision: measured.decision,
            };
            let (problem, used, design) = build(exp, &rule, dir);
            let res = match log {
                Some(w) => solve_with_log(&problem, budget, w)?,
                None => solve(&problem, budget)?,
            };
            let summary = SolverSummary {
                status: Some(res.status),
                nodes_explored: res.nodes_explored,
                wall_time: res.wall_time,
                lower_bound_only: res.lower_bound_only,
            };
            let (wa, witness) = match (res.status, res.objective, res.assignment) {
                (SolveStatus::Optimal, Some(obj), Some(x)) => {
                    let witness = decode_witness(exp, &problem, &x)?;
                    (WarningAccuracy::Value(obj), Some(witness))
                }
                (SolveStatus::Infeasible, _, _) => (WarningAccuracy::NotOverturnable, None),
                (_, Some(obj), _) => (WarningAccuracy::LowerBound(obj), None),
                _ => (WarningAccuracy::Unknown, None),
            };
            (wa, witness, summary, used, Some(design))
        }
    };

    let (man, set, weights) = match (&wa, &witness) {
        (WarningAccuracy::Value(v), Some(w)) => {
            // every reported witness must change the decision and attain the value
            let check = rule.decide(exp, w)?;
            if check.decision != measured.decision.opposite() {
                return Err(Error::WitnessCheck("witness does not change the decision".into()));
            }
            if accuracy(exp.measured(), w)? != *v {
                return Err(Error::WitnessCheck("witness accuracy differs from the optimum".into()));
            }
            let set = sensitive_set(exp, w)?;
            let weights = if set.is_empty() {
                None
            } else {
                Some(sensitivity_weights(exp, w)?)
            };
            (Some(set.len() as u64), set, weights)
        }
        _ => (None, Vec::new(), None),
    };
    debug_assert!(man.is_none_or(|m| m <= n));

    Ok(AnalysisReport {
        null_spec: spec.clone(),
        p_value: measured.p_value.clone(),
        measured_decision: measured,
        warning_accuracy: wa,
        minimal_alteration_number: man,
        witness,
        sensitive_set: set,
        weights,
        solver,
        formulation_used: used,
        design_type,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignAccuracyResult {
    pub estimate: f64,
    /// Mean of `values` as an exact rational.
    pub estimate_exact: Rational,
    pub replications: usize,
    /// Inner optimum per replication; zero when the draw cannot be overturned.
    pub values: Vec<Rational>,
    /// Replications left out because the solver budget ran out.
    pub excluded: Vec<usize>,
    pub seed: u64,
    pub monte_carlo_stderr: f64,
}

/// Outcome draw of one replication: stream `replication` of a ChaCha20
/// generator keyed by `seed`, one Bernoulli per subject in canonical order.
pub fn draw_outcomes(design: &StratifiedExperiment, p0: f64, p1: f64, seed: u64, replication: u64) -> OutcomeVector {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    design
        .treatment()
        .iter()
        .map(|&z| rng.gen_bool(if z { p1 } else { p0 }))
        .collect::<Vec<_>>()
        .into()
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")))
    }
}

pub fn design_accuracy(
    design: &StratifiedExperiment,
    p0: f64,
    p1: f64,
    spec: &NullSpec,
    replications: usize,
    seed: u64,
    budget: SolverBudget,
) -> Result<DesignAccuracyResult> {
    design_accuracy_with(design, p0, p1, spec, replications, seed, budget, false)
}

/// [`design_accuracy`], optionally leaving out replications whose solve ran
/// out of budget instead of failing.
#[allow(clippy::too_many_arguments)]
pub fn design_accuracy_with(
    design: &StratifiedExperiment,
    p0: f64,
    p1: f64,
    spec: &NullSpec,
    replications: usize,
    seed: u64,
    budget: SolverBudget,
    exclude_over_budget: bool,
) -> Result<DesignAccuracyResult> {
    check_probability("p0", p0)?;
    check_probability("p1", p1)?;
    if replications == 0 {
        return Err(Error::InvalidParameter("replications must be at least 1".into()));
    }
    let rule = DecisionRule::new(spec)?;
    rule.check(design)?;
    let outcomes: Vec<Result<Option<Rational>>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let y = draw_outcomes(design, p0, p1, seed, r as u64);
            let exp = design.with_outcomes(y)?;
            let report = warning_accuracy(&exp, spec, budget)?;
            Ok(match report.warning_accuracy {
                WarningAccuracy::Value(v) => Some(v),
                WarningAccuracy::NotOverturnable => Some(Rational::zero()),
                WarningAccuracy::LowerBound(_) | WarningAccuracy::Unknown => None,
            })
        })
        .collect();
    let mut values = Vec::with_capacity(replications);
    let mut excluded = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            Some(v) => values.push(v),
            None if exclude_over_budget => excluded.push(r),
            None => return Err(Error::ReplicationBudgetExceeded { replication: r }),
        }
    }
    if values.is_empty() {
        return Err(Error::ReplicationBudgetExceeded { replication: 0 });
    }
    let k = values.len();
    let sum: Rational = values.iter().sum();
    let estimate_exact = sum / Rational::from_integer(BigInt::from(k));
    let estimate = to_f64(&estimate_exact);
    let floats: Vec<f64> = values.iter().map(to_f64).collect();
    let monte_carlo_stderr = if k > 1 {
        let var = floats.iter().map(|v| (v - estimate).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    } else {
        0.0
    };
    Ok(DesignAccuracyResult {
        estimate,
        estimate_exact,
        replications,
        values,
        excluded,
        seed,
        monte_carlo_stderr,
    })
}

/// Expected misclassification counts by arm and error type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisclassificationTable {
    pub treated_fp: f64,
    pub treated_fn: f64,
    pub control_fp: f64,
    pub control_fn: f64,
}

/// `p_*1`/`p_*0` are outcome proportions per arm, `pi_*_fp` the rate at which
/// true negatives are measured positive and `pi_*_fn` the reverse.
#[allow(clippy::too_many_arguments)]
pub fn expected_misclassification_table(
    n_t: u64,
    n_c: u64,
    p_t1: f64,
    p_t0: f64,
    p_c1: f64,
    p_c0: f64,
    pi_t_fp: f64,
    pi_t_fn: f64,
    pi_c_fp: f64,
    pi_c_fn: f64,
) -> Result<MisclassificationTable> {
    for (name, v) in [
        ("p_T1", p_t1),
        ("p_T0", p_t0),
        ("p_C1", p_c1),
        ("p_C0", p_c0),
        ("pi_T_fp", pi_t_fp),
        ("pi_T_fn", pi_t_fn),
        ("pi_C_fp", pi_c_fp),
        ("pi_C_fn", pi_c_fn),
    ] {
        check_probability(name, v)?;
    }
    const SUM_TOLERANCE: f64 = 1e-9;
    if (p_t1 + p_t0 - 1.0).abs() > SUM_TOLERANCE || (p_c1 + p_c0 - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidParameter("outcome proportions of each arm must sum to 1".into()));
    }
    Ok(MisclassificationTable {
        treated_fp: n_t as f64 * p_t0 * pi_t_fp,
        treated_fn: n_t as f64 * p_t1 * pi_t_fn,
        control_fp: n_c as f64 * p_c0 * pi_c_fp,
        control_fn: n_c as f64 * p_c1 * pi_c_fn,
    })
}
