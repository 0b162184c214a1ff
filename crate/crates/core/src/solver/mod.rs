//! Exact solver for the single-constraint integer programs and the
//! brute-force oracle.

mod generic;
mod oracle;
mod search;
mod structure;

use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::formulation::IqclpProblem;
use crate::rational::Rational;

pub use oracle::{brute_force_all, brute_force_wa, OracleResult, ORACLE_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Optimum, or the incumbent's value when the budget ran out.
    pub objective: Option<Rational>,
    pub assignment: Option<Vec<i64>>,
    pub nodes_explored: u64,
    pub wall_time: Duration,
    /// Set when `objective` is only a lower bound on the optimum.
    pub lower_bound_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverBudget {
    pub max_nodes: u64,
    pub max_time: Duration,
}

impl SolverBudget {
    pub fn new(max_nodes: u64, max_time: Duration) -> Result<Self> {
        if max_nodes == 0 || max_time.is_zero() {
            return Err(Error::InvalidParameter("solver budget must be positive".into()));
        }
        Ok(SolverBudget { max_nodes, max_time })
    }

    pub fn unlimited() -> Self {
        SolverBudget {
            max_nodes: u64::MAX,
            max_time: Duration::from_secs(u64::MAX / 4),
        }
    }
}

impl Default for SolverBudget {
    /// 10^9 nodes or ten minutes.
    fn default() -> Self {
        SolverBudget {
            max_nodes: 1_000_000_000,
            max_time: Duration::from_secs(600),
        }
    }
}

pub fn solve(problem: &IqclpProblem, budget: SolverBudget) -> Result<SolveResult> {
    solve_inner(problem, budget, None)
}

/// [`solve`] writing one line per search node to `log`.
pub fn solve_with_log(problem: &IqclpProblem, budget: SolverBudget, log: &mut dyn Write) -> Result<SolveResult> {
    solve_inner(problem, budget, Some(log))
}

fn solve_inner(problem: &IqclpProblem, budget: SolverBudget, log: Option<&mut dyn Write>) -> Result<SolveResult> {
    problem.validate()?;
    if budget.max_nodes == 0 || budget.max_time.is_zero() {
        return Err(Error::InvalidParameter("solver budget must be positive".into()));
    }
    let start = Instant::now();
    let limits = search::Limits {
        max_nodes: budget.max_nodes,
        deadline: start.checked_add(budget.max_time),
    };
    let mut log = log;
    let (best, nodes, complete) = match structure::analyze(problem) {
        Some(st) => {
            let out = search::search(&st, &limits, &mut log);
            let best = out.best.map(|(cost, picks)| (st.objective_of_cost(cost), st.decode(problem, &picks)));
            (best, out.nodes, out.complete)
        }
        None => {
            let out = generic::search(problem, &limits, &mut log);
            (out.best, out.nodes, out.complete)
        }
    };
    if let Some((objective, x)) = &best {
        if !problem.is_feasible(x) {
            return Err(Error::WitnessCheck("solver point violates the constraints".into()));
        }
        if problem.objective_value(x) != *objective {
            return Err(Error::WitnessCheck("solver objective does not match its point".into()));
        }
    }
    let status = match (&best, complete) {
        (_, false) => SolveStatus::BudgetExceeded,
        (Some(_), true) => SolveStatus::Optimal,
        (None, true) => SolveStatus::Infeasible,
    };
    let (objective, assignment) = match best {
        Some((o, x)) => (Some(o), Some(x)),
        None => (None, None),
    };
    Ok(SolveResult {
        status,
        lower_bound_only: status == SolveStatus::BudgetExceeded && objective.is_some(),
        objective,
        assignment,
        nodes_explored: nodes,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::StratifiedExperiment;
    use crate::formulation::{
        build_p1, build_p2, build_p3, build_p4, Equality, FormulationKind, QuadMatrix, QuadSense, VarMeta,
    };
    use crate::rational::{int, ratio};
    use crate::symmetry::UniqueTableIndex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn unlimited() -> search::Limits {
        search::Limits {
            max_nodes: u64::MAX,
            deadline: None,
        }
    }

    fn random_exp(rng: &mut ChaCha8Rng, min_arm: usize) -> StratifiedExperiment {
        let strata = rng.gen_range(1..=2);
        let p: f64 = rng.gen_range(0.1..0.9);
        let data: Vec<_> = (0..strata)
            .map(|i| {
                let n = rng.gen_range(2 * min_arm..=2 * min_arm + 2);
                let m = rng.gen_range(min_arm..=n - min_arm);
                let z: Vec<bool> = (0..n).map(|j| j < m).collect();
                let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
                (format!("s{i}"), z, y)
            })
            .collect();
        StratifiedExperiment::from_strata(data).unwrap()
    }

    #[test]
    fn budget_must_be_positive() {
        assert!(SolverBudget::new(0, Duration::from_secs(1)).is_err());
        assert!(SolverBudget::new(1, Duration::ZERO).is_err());
        assert!(SolverBudget::new(1, Duration::from_secs(1)).is_ok());
    }

    #[test]
    fn structured_and_generic_search_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for round in 0..60 {
            let weak = round % 2 == 1;
            let exp = random_exp(&mut rng, if weak { 2 } else { 1 });
            let alpha = ratio(1, 10);
            let index = UniqueTableIndex::build(&exp);
            let problems = if weak {
                [build_p3(&exp, &alpha).unwrap(), build_p4(&exp, &alpha, &index).unwrap()]
            } else {
                [build_p1(&exp, &alpha).unwrap(), build_p2(&exp, &alpha, &index).unwrap()]
            };
            for p in &problems {
                let st = structure::analyze(p).expect("builders decompose");
                let fast = search::search(&st, &unlimited(), &mut None);
                let slow = generic::search(p, &unlimited(), &mut None);
                assert!(fast.complete && slow.complete);
                let fast_obj = fast.best.map(|(c, _)| st.objective_of_cost(c));
                assert_eq!(fast_obj, slow.best.map(|(o, _)| o), "{:?}", p.kind);
            }
        }
    }

    /// Maximize the objective over a box with one coupled quadratic
    /// constraint; no group structure, so the generic search runs.
    fn coupled(sense: QuadSense) -> IqclpProblem {
        let mut residual = BTreeMap::new();
        residual.insert((0, 0), int(1));
        residual.insert((0, 1), ratio(1, 2));
        residual.insert((1, 1), int(1));
        residual.insert((1, 2), ratio(-1, 3));
        residual.insert((2, 2), int(2));
        IqclpProblem {
            kind: FormulationKind::Custom,
            lower: vec![-2, 0, -1],
            upper: vec![3, 4, 2],
            objective: vec![int(1), ratio(1, 2), int(-1)],
            objective_constant: int(0),
            quad_matrix: QuadMatrix {
                rank_one: None,
                residual,
            },
            quad_linear: vec![int(-1), int(0), int(1)],
            quad_sense: sense,
            equalities: vec![],
            var_meta: vec![VarMeta::None; 3],
            variance_guard: false,
        }
    }

    fn enumerate_best(p: &IqclpProblem) -> Option<Rational> {
        let mut best: Option<Rational> = None;
        for a in p.lower[0]..=p.upper[0] {
            for b in p.lower[1]..=p.upper[1] {
                for c in p.lower[2]..=p.upper[2] {
                    let x = [a, b, c];
                    if p.is_feasible(&x) {
                        let v = p.objective_value(&x);
                        if best.as_ref().is_none_or(|b| v > *b) {
                            best = Some(v);
                        }
                    }
                }
            }
        }
        best
    }

    #[test]
    fn generic_search_matches_enumeration() {
        for sense in [QuadSense::LeqZero, QuadSense::GtZero] {
            let mut p = coupled(sense);
            for shift in [-30, -8, 0, 5, 20] {
                p.objective_constant = int(0);
                p.quad_linear[1] = int(shift);
                let want = enumerate_best(&p);
                let got = solve(&p, SolverBudget::default()).unwrap();
                assert_eq!(got.objective, want, "{sense:?} shift {shift}");
                let status = if want.is_some() {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::Infeasible
                };
                assert_eq!(got.status, status);
            }
        }
    }

    #[test]
    fn equality_constraints_are_respected() {
        let mut p = coupled(QuadSense::LeqZero);
        p.quad_linear[1] = int(-20);
        p.equalities.push(Equality {
            vars: vec![0, 1],
            rhs: 2,
        });
        let got = solve(&p, SolverBudget::default()).unwrap();
        let x = got.assignment.unwrap();
        assert_eq!(x[0] + x[1], 2);
        assert_eq!(got.objective, enumerate_best(&p));
    }

    #[test]
    fn node_limit_reports_budget_exceeded() {
        let p = coupled(QuadSense::LeqZero);
        let res = solve(&p, SolverBudget::new(2, Duration::from_secs(10)).unwrap()).unwrap();
        assert_eq!(res.status, SolveStatus::BudgetExceeded);
        assert_eq!(res.lower_bound_only, res.objective.is_some());
    }

    #[test]
    fn log_gets_one_line_per_event() {
        let p = coupled(QuadSense::LeqZero);
        let mut buf = Vec::new();
        let logged = solve_with_log(&p, SolverBudget::default(), &mut buf).unwrap();
        let plain = solve(&p, SolverBudget::default()).unwrap();
        assert_eq!(logged.objective, plain.objective);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().count() as u64 >= plain.nodes_explored);
        assert!(text.contains("depth 0"));
    }

    #[test]
    fn malformed_problem_is_rejected() {
        let mut p = coupled(QuadSense::LeqZero);
        p.upper[0] = -5;
        assert!(solve(&p, SolverBudget::default()).is_err());
    }
}
