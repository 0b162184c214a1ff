//! Integer programs with a linear objective and one quadratic constraint.
//!
//! Four builders cover the two nulls (sharp, weak) and the two
//! aggregations (per stratum, per class of identical stratum tables). In
//! every case the objective is the accuracy of the measured outcomes
//! against the true-outcome vector encoded by the variables, and the
//! quadratic constraint `g(x) = x'Q1x + q1'x` says that the test decision on
//! that vector differs from the measured decision.

mod dump;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

pub use dump::{read_problem, write_problem};

use crate::error::{Error, Result};
use crate::experiment::{stratum_tables, OutcomeVector, StratifiedExperiment, StratumTable};
use crate::inference::{check_arm_sizes, Decision, DecisionRule, NullSpec};
use crate::rational::{int, Rational};
use crate::symmetry::{enumerate_delta_tables, DeltaTable, UniqueTableIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuadSense {
    /// g(x) <= 0
    LeqZero,
    /// g(x) > 0
    GtZero,
}

impl QuadSense {
    pub fn holds(self, g: &Rational) -> bool {
        match self {
            QuadSense::LeqZero => !g.is_positive(),
            QuadSense::GtZero => g.is_positive(),
        }
    }
}

/// Which way the decision has to move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlipDirection {
    pub original_decision: Decision,
}

impl FlipDirection {
    pub fn sense(self) -> QuadSense {
        match self.original_decision {
            Decision::Reject => QuadSense::LeqZero,
            Decision::Accept => QuadSense::GtZero,
        }
    }
}

/// One stratum's four counts of true positives, by (arm, measured outcome).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    ControlNegative,
    ControlPositive,
    TreatedNegative,
    TreatedPositive,
}

impl Component {
    pub const ALL: [Component; 4] = [
        Component::ControlNegative,
        Component::ControlPositive,
        Component::TreatedNegative,
        Component::TreatedPositive,
    ];

    pub fn treated(self) -> bool {
        matches!(self, Component::TreatedNegative | Component::TreatedPositive)
    }

    pub fn measured_positive(self) -> bool {
        matches!(self, Component::ControlPositive | Component::TreatedPositive)
    }

    pub fn code(self) -> &'static str {
        match self {
            Component::ControlNegative => "00",
            Component::ControlPositive => "01",
            Component::TreatedNegative => "10",
            Component::TreatedPositive => "11",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Component::ALL.into_iter().find(|c| c.code() == code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarMeta {
    /// Count of true positives in one cell of stratum `stratum` (size n_i).
    Stratum {
        stratum: usize,
        component: Component,
        size: u64,
    },
    /// Number of strata of class `class` (stratum size `size`) whose true
    /// outcomes follow the `delta`-th table of the class.
    Class {
        class: usize,
        delta: usize,
        table: DeltaTable,
        size: u64,
    },
    None,
}

impl VarMeta {
    /// Variables sharing a group key belong to the same stratum or class.
    pub fn group(&self) -> Option<(bool, usize)> {
        match self {
            VarMeta::Stratum { stratum, .. } => Some((false, *stratum)),
            VarMeta::Class { class, .. } => Some((true, *class)),
            VarMeta::None => None,
        }
    }

    pub fn size(&self) -> u64 {
        match self {
            VarMeta::Stratum { size, .. } | VarMeta::Class { size, .. } => *size,
            VarMeta::None => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormulationKind {
    P1,
    P2,
    P3,
    P4,
    Custom,
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FormulationKind::P1 => "P1",
            FormulationKind::P2 => "P2",
            FormulationKind::P3 => "P3",
            FormulationKind::P4 => "P4",
            FormulationKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// A symmetric matrix held as an optional rank-one part `a a'` plus sparse
/// residual entries keyed by `(u, v)` with `u <= v`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QuadMatrix {
    pub rank_one: Option<Vec<Rational>>,
    pub residual: BTreeMap<(usize, usize), Rational>,
}

impl QuadMatrix {
    pub fn entry(&self, u: usize, v: usize) -> Rational {
        let key = (u.min(v), u.max(v));
        let mut value = self.residual.get(&key).cloned().unwrap_or_else(|| int(0));
        if let Some(a) = &self.rank_one {
            value += &a[u] * &a[v];
        }
        value
    }

    pub fn add_residual(&mut self, u: usize, v: usize, value: Rational) {
        if value.is_zero() {
            return;
        }
        let key = (u.min(v), u.max(v));
        let slot = self.residual.entry(key).or_insert_with(|| int(0));
        *slot += value;
        if slot.is_zero() {
            self.residual.remove(&key);
        }
    }

    /// x'Qx
    pub fn quad_form(&self, x: &[i64]) -> Rational {
        let mut acc = int(0);
        if let Some(a) = &self.rank_one {
            let lin: Rational = a
                .iter()
                .zip(x)
                .filter(|(_, &xi)| xi != 0)
                .map(|(ai, &xi)| ai * Rational::from_integer(BigInt::from(xi)))
                .sum();
            acc += &lin * &lin;
        }
        for (&(u, v), q) in &self.residual {
            let prod = x[u] as i128 * x[v] as i128;
            if prod == 0 {
                continue;
            }
            let mult = if u == v { prod } else { 2 * prod };
            acc += q * Rational::from_integer(BigInt::from(mult));
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.residual.is_empty()
            && self
                .rank_one
                .as_ref()
                .is_none_or(|a| a.iter().all(Zero::is_zero))
    }
}

/// Sum of the listed variables equals `rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equality {
    pub vars: Vec<usize>,
    pub rhs: i64,
}

/// maximize q'x + c subject to lower <= x <= upper, the equalities, and
/// x'Q1x + q1'x in the stated sense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IqclpProblem {
    pub kind: FormulationKind,
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    pub objective: Vec<Rational>,
    pub objective_constant: Rational,
    pub quad_matrix: QuadMatrix,
    pub quad_linear: Vec<Rational>,
    pub quad_sense: QuadSense,
    pub equalities: Vec<Equality>,
    pub var_meta: Vec<VarMeta>,
    /// When set, points whose variance part `g(x) - (a'x)^2` is zero count
    /// as Accept whatever the sign of g: they satisfy LeqZero and never
    /// satisfy GtZero. Requires the rank-one part.
    pub variance_guard: bool,
}

impl IqclpProblem {
    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |m: String| Err(Error::MalformedProblem(m));
        if self.upper.len() != n
            || self.objective.len() != n
            || self.quad_linear.len() != n
            || self.var_meta.len() != n
        {
            return bad("vector lengths differ from the variable count".into());
        }
        if let Some(a) = &self.quad_matrix.rank_one {
            if a.len() != n {
                return bad("rank-one vector has the wrong length".into());
            }
        } else if self.variance_guard {
            return bad("the variance guard needs a rank-one part".into());
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo > hi {
                return bad(format!("variable {i} has lower bound {lo} above upper bound {hi}"));
            }
        }
        for &(u, v) in self.quad_matrix.residual.keys() {
            if u > v || v >= n {
                return bad(format!("quadratic entry ({u}, {v}) out of range"));
            }
        }
        for (k, eq) in self.equalities.iter().enumerate() {
            if eq.vars.iter().any(|&v| v >= n) {
                return bad(format!("equality {k} references an unknown variable"));
            }
            let mut sorted = eq.vars.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != eq.vars.len() {
                return bad(format!("equality {k} repeats a variable"));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[i64]) -> Rational {
        let lin: Rational = self
            .objective
            .iter()
            .zip(x)
            .filter(|(_, &xi)| xi != 0)
            .map(|(q, &xi)| q * Rational::from_integer(BigInt::from(xi)))
            .sum();
        lin + &self.objective_constant
    }

    /// Checks bounds and equalities.
    pub fn check_point(&self, x: &[i64]) -> Result<()> {
        if x.len() != self.num_vars() {
            return Err(Error::LengthMismatch {
                expected: self.num_vars(),
                found: x.len(),
            });
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi < self.lower[i] || xi > self.upper[i] {
                return Err(Error::InfeasiblePoint(format!(
                    "x[{i}] = {xi} outside [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        for (k, eq) in self.equalities.iter().enumerate() {
            let sum: i64 = eq.vars.iter().map(|&v| x[v]).sum();
            if sum != eq.rhs {
                return Err(Error::InfeasiblePoint(format!(
                    "equality {k} sums to {sum}, expected {}",
                    eq.rhs
                )));
            }
        }
        Ok(())
    }

    /// g(x) without the point checks.
    pub fn constraint_unchecked(&self, x: &[i64]) -> Rational {
        let lin: Rational = self
            .quad_linear
            .iter()
            .zip(x)
            .filter(|(_, &xi)| xi != 0)
            .map(|(q, &xi)| q * Rational::from_integer(BigInt::from(xi)))
            .sum();
        self.quad_matrix.quad_form(x) + lin
    }

    /// (a'x, g(x) - (a'x)^2); the first part is zero without a rank-one part.
    pub fn split_value(&self, x: &[i64]) -> (Rational, Rational) {
        let g = self.constraint_unchecked(x);
        match &self.quad_matrix.rank_one {
            Some(a) => {
                let lin: Rational = a
                    .iter()
                    .zip(x)
                    .filter(|(_, &xi)| xi != 0)
                    .map(|(ai, &xi)| ai * Rational::from_integer(BigInt::from(xi)))
                    .sum();
                let rest = g - &lin * &lin;
                (lin, rest)
            }
            None => (int(0), g),
        }
    }

    /// Whether a point within bounds and equalities satisfies the quadratic
    /// constraint, honoring the variance guard.
    pub fn satisfies(&self, x: &[i64]) -> bool {
        let g = self.constraint_unchecked(x);
        if !self.variance_guard {
            return self.quad_sense.holds(&g);
        }
        let (_, rest) = self.split_value(x);
        match self.quad_sense {
            QuadSense::LeqZero => !g.is_positive() || rest.is_zero(),
            QuadSense::GtZero => g.is_positive() && !rest.is_zero(),
        }
    }

    /// Whether `x` satisfies every constraint.
    pub fn is_feasible(&self, x: &[i64]) -> bool {
        self.check_point(x).is_ok() && self.satisfies(x)
    }
}

/// g(x) = x'Q1x + q1'x for a point within bounds and equalities.
pub fn constraint_value(problem: &IqclpProblem, x: &[i64]) -> Result<Rational> {
    problem.check_point(x)?;
    Ok(problem.constraint_unchecked(x))
}

fn rat(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Rational {
    Rational::new(num.into(), den.into())
}

fn measured_negatives(tables: &[StratumTable]) -> u64 {
    tables
        .iter()
        .map(|t| t.control_negative + t.treated_negative)
        .sum()
}

/// Objective weight of a true positive in each component: agreement is
/// gained on measured positives and lost on measured negatives.
fn component_objective(c: Component, total: u64) -> Rational {
    if c.measured_positive() {
        rat(1, total)
    } else {
        rat(-1, total)
    }
}

fn measured_direction(exp: &StratifiedExperiment, spec: &NullSpec) -> Result<(DecisionRule, FlipDirection)> {
    let rule = DecisionRule::new(spec)?;
    let decision = rule.decide(exp, exp.measured())?.decision;
    Ok((
        rule,
        FlipDirection {
            original_decision: decision,
        },
    ))
}

/// Sharp null, per-stratum counts, chi-square decision at `alpha`.
pub fn build_p1(exp: &StratifiedExperiment, alpha: &Rational) -> Result<IqclpProblem> {
    let (rule, dir) = measured_direction(exp, &NullSpec::sharp_chisq(alpha.clone())?)?;
    Ok(build_p1_with(exp, rule.chisq(), dir))
}

/// Sharp null, per-class table counts.
pub fn build_p2(exp: &StratifiedExperiment, alpha: &Rational, index: &UniqueTableIndex) -> Result<IqclpProblem> {
    let (rule, dir) = measured_direction(exp, &NullSpec::sharp_chisq(alpha.clone())?)?;
    Ok(build_p2_with(exp, rule.chisq(), dir, index))
}

/// Weak null, per-stratum counts.
pub fn build_p3(exp: &StratifiedExperiment, alpha: &Rational) -> Result<IqclpProblem> {
    check_arm_sizes(exp)?;
    let (rule, dir) = measured_direction(exp, &NullSpec::weak_chisq(alpha.clone())?)?;
    Ok(build_p3_with(exp, rule.chisq(), dir))
}

/// Weak null, per-class table counts.
pub fn build_p4(exp: &StratifiedExperiment, alpha: &Rational, index: &UniqueTableIndex) -> Result<IqclpProblem> {
    check_arm_sizes(exp)?;
    let (rule, dir) = measured_direction(exp, &NullSpec::weak_chisq(alpha.clone())?)?;
    Ok(build_p4_with(exp, rule.chisq(), dir, index))
}

fn stratum_skeleton(kind: FormulationKind, tables: &[StratumTable], dir: FlipDirection) -> IqclpProblem {
    let total: u64 = tables.iter().map(StratumTable::size).sum();
    let n = 4 * tables.len();
    let mut p = IqclpProblem {
        kind,
        lower: vec![0; n],
        upper: Vec::with_capacity(n),
        objective: Vec::with_capacity(n),
        objective_constant: rat(measured_negatives(tables), total),
        quad_matrix: QuadMatrix {
            rank_one: Some(Vec::with_capacity(n)),
            residual: BTreeMap::new(),
        },
        quad_linear: Vec::with_capacity(n),
        quad_sense: dir.sense(),
        equalities: Vec::new(),
        var_meta: Vec::with_capacity(n),
        variance_guard: true,
    };
    for (i, t) in tables.iter().enumerate() {
        for (c, bound) in Component::ALL.into_iter().zip(t.as_array()) {
            p.upper.push(bound as i64);
            p.objective.push(component_objective(c, total));
            p.var_meta.push(VarMeta::Stratum {
                stratum: i,
                component: c,
                size: t.size(),
            });
        }
    }
    p
}

pub(crate) fn build_p1_with(exp: &StratifiedExperiment, chisq: &Rational, dir: FlipDirection) -> IqclpProblem {
    let tables = stratum_tables(exp);
    let mut p = stratum_skeleton(FormulationKind::P1, &tables, dir);
    let mut a = Vec::with_capacity(p.num_vars());
    for (i, t) in tables.iter().enumerate() {
        let (n, m) = (t.size(), t.treated());
        // (T - E) = sum_i A_i (1 - m/n) - C_i m/n
        let treated = rat(n - m, n);
        let control = rat(-(m as i64), n);
        // chi2 * Var = chi2 * c * (n K - K^2) with K the stratum's true positives
        let c = rat(m * (n - m), n * n * (n - 1));
        let cross = chisq * &c;
        let lin = -(chisq * &c * int(n as i64));
        for comp in Component::ALL {
            a.push(if comp.treated() { treated.clone() } else { control.clone() });
            p.quad_linear.push(lin.clone());
        }
        for u in 0..4 {
            for v in u..4 {
                p.quad_matrix.add_residual(4 * i + u, 4 * i + v, cross.clone());
            }
        }
    }
    p.quad_matrix.rank_one = Some(a);
    p
}

pub(crate) fn build_p3_with(exp: &StratifiedExperiment, chisq: &Rational, dir: FlipDirection) -> IqclpProblem {
    let tables = stratum_tables(exp);
    let total = exp.num_subjects() as u64;
    let mut p = stratum_skeleton(FormulationKind::P3, &tables, dir);
    let mut a = Vec::with_capacity(p.num_vars());
    for (i, t) in tables.iter().enumerate() {
        let (n, m) = (t.size(), t.treated());
        let c = n - m;
        // T = sum_i (n/N) (A/m - C/c)
        let b_treated = rat(n, total * m);
        let b_control = -rat(n, total * c);
        // VarHat term for the treated arm: (n/N)^2 A (m - A) / (m^2 (m - 1))
        let nn = BigInt::from(n) * BigInt::from(n);
        let nt = BigInt::from(total) * BigInt::from(total);
        let w_treated = rat(nn.clone(), &nt * BigInt::from(m * m * (m - 1)));
        let w_control = rat(nn, &nt * BigInt::from(c * c * (c - 1)));
        let lin_treated = -(chisq * &w_treated * int(m as i64));
        let lin_control = -(chisq * &w_control * int(c as i64));
        for comp in Component::ALL {
            if comp.treated() {
                a.push(b_treated.clone());
                p.quad_linear.push(lin_treated.clone());
            } else {
                a.push(b_control.clone());
                p.quad_linear.push(lin_control.clone());
            }
        }
        for (block, w) in [(0usize, &w_control), (2, &w_treated)] {
            let v = chisq * w;
            for (u, t) in [(0, 0), (0, 1), (1, 1)] {
                p.quad_matrix
                    .add_residual(4 * i + block + u, 4 * i + block + t, v.clone());
            }
        }
    }
    p.quad_matrix.rank_one = Some(a);
    p
}

/// Shared skeleton of the per-class programs. `coeffs(class table, delta)`
/// returns the rank-one entry and the linear constraint term.
fn class_problem(
    kind: FormulationKind,
    exp: &StratifiedExperiment,
    dir: FlipDirection,
    index: &UniqueTableIndex,
    coeffs: impl Fn(&StratumTable, &DeltaTable) -> (Rational, Rational),
) -> IqclpProblem {
    let total = exp.num_subjects() as u64;
    let tables = stratum_tables(exp);
    let mut p = IqclpProblem {
        kind,
        lower: Vec::new(),
        upper: Vec::new(),
        objective: Vec::new(),
        objective_constant: rat(measured_negatives(&tables), total),
        quad_matrix: QuadMatrix {
            rank_one: Some(Vec::new()),
            residual: BTreeMap::new(),
        },
        quad_linear: Vec::new(),
        quad_sense: dir.sense(),
        equalities: Vec::new(),
        var_meta: Vec::new(),
        variance_guard: true,
    };
    let mut a = Vec::new();
    for (s, (class, &mult)) in index
        .unique_tables()
        .iter()
        .zip(index.multiplicities())
        .enumerate()
    {
        let start = p.lower.len();
        for (k, delta) in enumerate_delta_tables(class).into_iter().enumerate() {
            let gain = delta.control_positive + delta.treated_positive;
            let loss = delta.control_negative + delta.treated_negative;
            p.lower.push(0);
            p.upper.push(mult as i64);
            p.objective.push(rat(gain as i64 - loss as i64, total));
            let (ak, lk) = coeffs(class, &delta);
            a.push(ak);
            p.quad_linear.push(lk);
            p.var_meta.push(VarMeta::Class {
                class: s,
                delta: k,
                table: delta,
                size: class.size(),
            });
        }
        p.equalities.push(Equality {
            vars: (start..p.lower.len()).collect(),
            rhs: mult as i64,
        });
    }
    p.quad_matrix.rank_one = Some(a);
    p
}

pub(crate) fn build_p2_with(
    exp: &StratifiedExperiment,
    chisq: &Rational,
    dir: FlipDirection,
    index: &UniqueTableIndex,
) -> IqclpProblem {
    class_problem(FormulationKind::P2, exp, dir, index, |class, d| {
        let (n, m) = (class.size(), class.treated());
        let k = d.treated() + d.control();
        let a = int(d.treated() as i64) - rat(m * k, n);
        let var = rat(m * (n - m) * k * (n - k), n * n * (n - 1));
        (a, -(chisq * var))
    })
}

pub(crate) fn build_p4_with(
    exp: &StratifiedExperiment,
    chisq: &Rational,
    dir: FlipDirection,
    index: &UniqueTableIndex,
) -> IqclpProblem {
    let total = exp.num_subjects() as u64;
    class_problem(FormulationKind::P4, exp, dir, index, |class, d| {
        let (n, m) = (class.size(), class.treated());
        let c = n - m;
        let (ta, ca) = (d.treated(), d.control());
        let a = rat(n * ta, total * m) - rat(n * ca, total * c);
        let w = rat(n, total);
        let var = &w
            * &w
            * (rat(ta * (m - ta), m * m * (m - 1)) + rat(ca * (c - ca), c * c * (c - 1)));
        (a, -(chisq * var))
    })
}

/// Positions of subjects in `stratum` with the given arm and measured
/// outcome, in canonical order.
fn cell_positions(exp: &StratifiedExperiment, stratum: usize, treated: bool, positive: bool) -> Vec<usize> {
    let s = &exp.strata()[stratum];
    s.treated()
        .iter()
        .enumerate()
        .filter(|(j, &z)| z == treated && exp.measured().get(s.offset() + j) == positive)
        .map(|(j, _)| s.offset() + j)
        .collect()
}

/// Applies per-stratum true-positive counts to the measured outcomes.
/// Within each cell the alterations go to the lowest-index subjects.
fn apply_counts(exp: &StratifiedExperiment, y: &mut OutcomeVector, stratum: usize, counts: [u64; 4]) {
    for (comp, target) in Component::ALL.into_iter().zip(counts) {
        let cell = cell_positions(exp, stratum, comp.treated(), comp.measured_positive());
        let target = target as usize;
        if comp.measured_positive() {
            // measured positive, `target` of them truly positive
            for &pos in cell.iter().take(cell.len() - target) {
                y.set(pos, false);
            }
        } else {
            for &pos in cell.iter().take(target) {
                y.set(pos, true);
            }
        }
    }
}

/// Turns a feasible point of a program built from `exp` into a true-outcome
/// vector. Class tables are handed to the class's strata in input order.
pub fn decode_witness(exp: &StratifiedExperiment, problem: &IqclpProblem, x: &[i64]) -> Result<OutcomeVector> {
    problem.check_point(x)?;
    let mut y = exp.measured().clone();
    let mut per_stratum: Vec<[u64; 4]> = vec![[0; 4]; exp.num_strata()];
    let mut class_slots: BTreeMap<usize, Vec<(usize, DeltaTable, i64)>> = BTreeMap::new();
    for (v, meta) in problem.var_meta.iter().enumerate() {
        match meta {
            VarMeta::Stratum {
                stratum, component, ..
            } => {
                if *stratum >= exp.num_strata() {
                    return Err(Error::MalformedProblem(format!("variable {v} names an unknown stratum")));
                }
                per_stratum[*stratum][*component as usize] = x[v] as u64;
            }
            VarMeta::Class {
                class, delta, table, ..
            } => class_slots.entry(*class).or_default().push((*delta, *table, x[v])),
            VarMeta::None => {
                return Err(Error::MalformedProblem(
                    "cannot decode a variable without metadata".into(),
                ))
            }
        }
    }
    if !class_slots.is_empty() {
        let index = UniqueTableIndex::build(exp);
        for (class, mut slots) in class_slots {
            if class >= index.num_classes() {
                return Err(Error::MalformedProblem(format!("unknown class {class}")));
            }
            slots.sort_by_key(|s| s.0);
            let mut members = index.members(class).iter();
            for (_, table, count) in slots {
                for _ in 0..count {
                    let i = *members.next().ok_or_else(|| {
                        Error::MalformedProblem(format!("class {class} receives too many tables"))
                    })?;
                    per_stratum[i] = table.as_array();
                }
            }
        }
    }
    for (i, counts) in per_stratum.into_iter().enumerate() {
        apply_counts(exp, &mut y, i, counts);
    }
    Ok(y)
}
