mod common;

use std::collections::BTreeSet;

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warnacc_core::audit::draw_outcomes;
use warnacc_core::rational::{int, ratio};
use warnacc_core::{
    brute_force_wa, build_p1, build_p2, build_p3, build_p4, chisq_quantile, constraint_value, design_accuracy,
    mh_moments, sensitivity_weights, solve, warning_accuracy, IqclpProblem, NullSpec, QuadSense, Rational,
    SolverBudget, StratifiedExperiment, UniqueTableIndex, WarningAccuracy,
};

fn alpha_for(rng: &mut ChaCha8Rng) -> Rational {
    if rng.gen_bool(0.5) {
        ratio(1, 20)
    } else {
        ratio(1, 10)
    }
}

/// Replaces the outcomes with draws that favour the treated arm.
fn with_effect(rng: &mut ChaCha8Rng, exp: StratifiedExperiment) -> StratifiedExperiment {
    let seed = rng.gen();
    let y = draw_outcomes(&exp, 0.15, 0.85, seed, 0);
    exp.with_outcomes(y).unwrap()
}

#[test]
fn sharp_expansion_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pairs = 0;
    while pairs < 1200 {
        let exp = common::random_experiment(&mut rng, 1..=4, 2..=7, 1, 20);
        let alpha = alpha_for(&mut rng);
        let chisq = chisq_quantile(&alpha).unwrap();
        let p1 = build_p1(&exp, &alpha).unwrap();
        let index = UniqueTableIndex::build(&exp);
        let p2 = build_p2(&exp, &alpha, &index).unwrap();
        for _ in 0..6 {
            let y = common::random_outcomes(&mut rng, exp.num_subjects());
            let want = common::direct_mh_gap(&exp, &y, &chisq);
            let x1 = common::encode_stratum_vars(&exp, &p1, &y);
            let x2 = common::encode_class_vars(&exp, &p2, &index, &y);
            assert_eq!(constraint_value(&p1, &x1).unwrap(), want);
            assert_eq!(constraint_value(&p2, &x2).unwrap(), want);
            pairs += 2;
        }
    }
}

#[test]
fn weak_expansion_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut pairs = 0;
    while pairs < 1200 {
        let exp = common::random_experiment(&mut rng, 1..=4, 4..=8, 2, 24);
        let alpha = alpha_for(&mut rng);
        let chisq = chisq_quantile(&alpha).unwrap();
        let p3 = build_p3(&exp, &alpha).unwrap();
        let index = UniqueTableIndex::build(&exp);
        let p4 = build_p4(&exp, &alpha, &index).unwrap();
        for _ in 0..6 {
            let y = common::random_outcomes(&mut rng, exp.num_subjects());
            let want = common::direct_neyman_gap(&exp, &y, &chisq);
            let x3 = common::encode_stratum_vars(&exp, &p3, &y);
            let x4 = common::encode_class_vars(&exp, &p4, &index, &y);
            assert_eq!(constraint_value(&p3, &x3).unwrap(), want);
            assert_eq!(constraint_value(&p4, &x4).unwrap(), want);
            pairs += 2;
        }
    }
}

#[test]
fn objective_is_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let exp = common::random_experiment(&mut rng, 1..=4, 2..=6, 1, 16);
        let alpha = ratio(1, 20);
        let p1 = build_p1(&exp, &alpha).unwrap();
        let index = UniqueTableIndex::build(&exp);
        let p2 = build_p2(&exp, &alpha, &index).unwrap();
        let y = common::random_outcomes(&mut rng, exp.num_subjects());
        let acc = warnacc_core::accuracy(exp.measured(), &y).unwrap();
        assert_eq!(p1.objective_value(&common::encode_stratum_vars(&exp, &p1, &y)), acc);
        assert_eq!(p2.objective_value(&common::encode_class_vars(&exp, &p2, &index, &y)), acc);
    }
}

#[test]
fn moments_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut checked = 0;
    while checked < 300 {
        let exp = common::random_experiment(&mut rng, 1..=4, 2..=8, 1, 24);
        let space: u64 = exp
            .strata()
            .iter()
            .map(|s| binomial(s.size() as u64, s.treated_count() as u64))
            .product();
        if space > 10_000 {
            continue;
        }
        let (e, v) = mh_moments(&exp, exp.measured()).unwrap();
        assert_eq!((e, v), common::enumerated_moments(&exp, exp.measured()));
        checked += 1;
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn random_point(rng: &mut ChaCha8Rng, p: &IqclpProblem) -> Vec<Rational> {
    p.lower
        .iter()
        .zip(&p.upper)
        .map(|(&lo, &hi)| {
            let den = rng.gen_range(1..=7);
            ratio(rng.gen_range(lo * den..=hi * den), den)
        })
        .collect()
}

#[test]
fn constraint_is_convex_on_reject_side() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut checks = 0;
    while checks < 500 {
        let exp = common::random_experiment(&mut rng, 1..=3, 4..=7, 2, 16);
        let exp = with_effect(&mut rng, exp);
        let alpha = alpha_for(&mut rng);
        let index = UniqueTableIndex::build(&exp);
        let problems = [
            build_p1(&exp, &alpha).unwrap(),
            build_p2(&exp, &alpha, &index).unwrap(),
            build_p3(&exp, &alpha).unwrap(),
            build_p4(&exp, &alpha, &index).unwrap(),
        ];
        for p in problems.iter().filter(|p| p.quad_sense == QuadSense::LeqZero) {
            let x = random_point(&mut rng, p);
            let y = random_point(&mut rng, p);
            let lambda = ratio(rng.gen_range(0..=16), 16);
            let mid: Vec<Rational> = x
                .iter()
                .zip(&y)
                .map(|(a, b)| &lambda * a + (int(1) - &lambda) * b)
                .collect();
            let lhs = common::g_at(p, &mid);
            let rhs = &lambda * common::g_at(p, &x) + (int(1) - &lambda) * common::g_at(p, &y);
            assert!(lhs <= rhs, "{:?}", p.kind);
            checks += 1;
        }
    }
}

#[test]
fn warning_accuracy_invariant_under_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..60 {
        let exp = common::random_experiment(&mut rng, 2..=4, 2..=6, 1, 14);
        let exp = if rng.gen_bool(0.5) { with_effect(&mut rng, exp) } else { exp };
        let spec = NullSpec::sharp_chisq(ratio(1, 20)).unwrap();
        let base = warning_accuracy(&exp, &spec, SolverBudget::default()).unwrap();

        let mut strata: Vec<(String, Vec<bool>, Vec<bool>)> = exp
            .strata()
            .iter()
            .map(|s| {
                let mut subjects: Vec<(bool, bool)> = s
                    .range()
                    .zip(s.treated())
                    .map(|(i, &z)| (z, exp.measured().get(i)))
                    .collect();
                for j in (1..subjects.len()).rev() {
                    subjects.swap(j, rng.gen_range(0..=j));
                }
                let (z, y) = subjects.into_iter().unzip();
                (s.label().to_string(), z, y)
            })
            .collect();
        for j in (1..strata.len()).rev() {
            strata.swap(j, rng.gen_range(0..=j));
        }
        let shuffled = StratifiedExperiment::from_strata(strata).unwrap();
        let again = warning_accuracy(&shuffled, &spec, SolverBudget::default()).unwrap();
        assert_eq!(base.warning_accuracy, again.warning_accuracy);
        assert_eq!(base.minimal_alteration_number, again.minimal_alteration_number);
    }
}

#[test]
fn report_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..80 {
        let exp = common::random_experiment(&mut rng, 1..=4, 2..=6, 1, 14);
        let exp = if rng.gen_bool(0.5) { with_effect(&mut rng, exp) } else { exp };
        let spec = NullSpec::sharp_chisq(alpha_for(&mut rng)).unwrap();
        let report = warning_accuracy(&exp, &spec, SolverBudget::default()).unwrap();
        let n = exp.num_subjects();
        match &report.warning_accuracy {
            WarningAccuracy::Value(wa) => {
                let man = report.minimal_alteration_number.unwrap() as usize;
                assert_eq!(report.sensitive_set.len(), man);
                assert_eq!(Rational::from_integer((n - man).into()) / Rational::from_integer(n.into()), *wa);
                let w = report.weights.as_ref().unwrap();
                assert!(w.as_array().iter().all(|v| !v.is_negative()));
                assert_eq!(w.as_array().into_iter().cloned().sum::<Rational>(), int(1));
            }
            WarningAccuracy::NotOverturnable => {
                assert!(report.sensitive_set.is_empty());
                assert!(report.weights.is_none());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn per_stratum_and_per_class_programs_agree_beyond_oracle_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..20 {
        let count = rng.gen_range(4..=8);
        let data: Vec<_> = (0..count)
            .map(|i| {
                let n = rng.gen_range(4..=6);
                let z: Vec<bool> = (0..n).map(|j| j < n / 2).collect();
                let y: Vec<bool> = z.iter().map(|&t| rng.gen_bool(if t { 0.6 } else { 0.3 })).collect();
                (format!("s{i}"), z, y)
            })
            .collect();
        let exp = StratifiedExperiment::from_strata(data).unwrap();
        let alpha = ratio(1, 20);
        let index = UniqueTableIndex::build(&exp);
        let a = solve(&build_p1(&exp, &alpha).unwrap(), SolverBudget::default()).unwrap();
        let b = solve(&build_p2(&exp, &alpha, &index).unwrap(), SolverBudget::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective, b.objective);
        let c = solve(&build_p3(&exp, &alpha).unwrap(), SolverBudget::default()).unwrap();
        let d = solve(&build_p4(&exp, &alpha, &index).unwrap(), SolverBudget::default()).unwrap();
        assert_eq!(c.status, d.status);
        assert_eq!(c.objective, d.objective);
    }
}

#[test]
fn solves_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..30 {
        let exp = common::random_experiment(&mut rng, 2..=5, 3..=8, 1, 30);
        let alpha = ratio(1, 20);
        let p = build_p1(&exp, &alpha).unwrap();
        let a = solve(&p, SolverBudget::default()).unwrap();
        let b = solve(&p, SolverBudget::default()).unwrap();
        assert_eq!((a.status, a.objective, a.assignment, a.nodes_explored), (b.status, b.objective, b.assignment, b.nodes_explored));
    }
}

/// Whether every optimal witness has the same sensitivity weights. This is
/// a diagnostic: counterexamples are printed, not treated as failures.
#[test]
fn optimal_witnesses_weights_diagnostic() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut shared, mut differing) = (0, 0);
    for _ in 0..150 {
        let exp = common::random_experiment(&mut rng, 1..=4, 2..=6, 1, 12);
        let spec = NullSpec::sharp_chisq(ratio(1, 20)).unwrap();
        let res = warnacc_core::solver::brute_force_all(&exp, &spec, 12).unwrap();
        if res.witnesses.is_empty() {
            continue;
        }
        let weights: BTreeSet<String> = res
            .witnesses
            .iter()
            .map(|w| format!("{:?}", sensitivity_weights(&exp, w).unwrap()))
            .collect();
        if weights.len() == 1 {
            shared += 1;
        } else {
            differing += 1;
            if differing <= 3 {
                println!("weights differ across {} optima on {:?}: {:?}", res.witnesses.len(), exp, weights);
            }
        }
    }
    println!("optima sharing weights: {shared}, differing: {differing}");
    assert!(shared + differing > 0);
}

#[test]
fn design_accuracy_matches_exhaustive_expectation() {
    let design = StratifiedExperiment::from_strata(vec![
        ("a", vec![true, true, false, false], vec![false; 4]),
        ("b", vec![true, true, true, false, false, false], vec![false; 6]),
    ])
    .unwrap();
    let spec = NullSpec::sharp_chisq(ratio(1, 10)).unwrap();
    let (p0, p1) = (0.2, 0.7);
    let exact = common::exact_design_accuracy(&design, p0, p1, &spec);
    let res = design_accuracy(&design, p0, p1, &spec, 4000, 3, SolverBudget::default()).unwrap();
    assert!(
        (res.estimate - exact).abs() <= 3.0 * res.monte_carlo_stderr,
        "estimate {} exact {} se {}",
        res.estimate,
        exact,
        res.monte_carlo_stderr
    );
}

#[test]
fn brute_force_agrees_with_itself_on_relabelled_outcomes() {
    // swapping every outcome leaves the sharp-null decision unchanged
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let exp = common::random_experiment(&mut rng, 1..=3, 2..=6, 1, 12);
        let flipped: Vec<bool> = exp.measured().as_slice().iter().map(|b| !b).collect();
        let other = exp.with_outcomes(flipped.into()).unwrap();
        let spec = NullSpec::sharp_chisq(ratio(1, 20)).unwrap();
        assert_eq!(brute_force_wa(&exp, &spec).unwrap().0, brute_force_wa(&other, &spec).unwrap().0);
    }
}
