#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use warnacc_core::{
    brute_force_wa, DeltaTable, IqclpProblem, NullSpec, OutcomeVector, Rational, StratifiedExperiment,
    UniqueTableIndex, VarMeta, WarningAccuracy,
};

/// Random stratified design with outcomes. Strata sizes in `sizes`, treated
/// counts in `1..n` (or `min_arm..=n - min_arm`), total size at most `max_n`.
pub fn random_experiment(
    rng: &mut ChaCha8Rng,
    strata: std::ops::RangeInclusive<usize>,
    sizes: std::ops::RangeInclusive<usize>,
    min_arm: usize,
    max_n: usize,
) -> StratifiedExperiment {
    loop {
        let count = rng.gen_range(strata.clone());
        let ns: Vec<usize> = (0..count).map(|_| rng.gen_range(sizes.clone())).collect();
        if ns.iter().sum::<usize>() > max_n || ns.iter().any(|&n| n < 2 * min_arm) {
            continue;
        }
        let prevalence: f64 = rng.gen_range(0.1..0.9);
        let mut data = Vec::new();
        for (i, &n) in ns.iter().enumerate() {
            let m = rng.gen_range(min_arm..=n - min_arm);
            let mut z: Vec<bool> = (0..n).map(|j| j < m).collect();
            // shuffle treatment positions
            for j in (1..n).rev() {
                z.swap(j, rng.gen_range(0..=j));
            }
            let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(prevalence)).collect();
            data.push((format!("s{i}"), z, y));
        }
        return StratifiedExperiment::from_strata(data).unwrap();
    }
}

/// Stratum treatment flags and outcomes under `y`, taken straight from the
/// experiment layout.
pub fn strata_with(exp: &StratifiedExperiment, y: &OutcomeVector) -> Vec<(Vec<bool>, Vec<bool>)> {
    exp.strata()
        .iter()
        .map(|s| {
            let ys = s.range().map(|i| y.get(i)).collect();
            (s.treated().to_vec(), ys)
        })
        .collect()
}

fn r(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// (T - E)^2 - chisq * Var for the Mantel-Haenszel count, written out from
/// the hypergeometric moments of each stratum.
pub fn direct_mh_gap(exp: &StratifiedExperiment, y: &OutcomeVector, chisq: &Rational) -> Rational {
    let mut t = Rational::zero();
    let mut e = Rational::zero();
    let mut var = Rational::zero();
    for (z, ys) in strata_with(exp, y) {
        let n = z.len() as i64;
        let m = z.iter().filter(|&&b| b).count() as i64;
        let k = ys.iter().filter(|&&b| b).count() as i64;
        let a = z.iter().zip(&ys).filter(|(&zz, &yy)| zz && yy).count() as i64;
        t += r(a, 1);
        e += r(m * k, n);
        var += r(m * k * (n - m) * (n - k), n * n * (n - 1));
    }
    let d = t - e;
    &d * &d - chisq * var
}

/// T^2 - chisq * VarHat for the stratified difference in means with the
/// plug-in variance built from per-arm sample variances.
pub fn direct_neyman_gap(exp: &StratifiedExperiment, y: &OutcomeVector, chisq: &Rational) -> Rational {
    let total = exp.num_subjects() as i64;
    let mut t = Rational::zero();
    let mut var = Rational::zero();
    for (z, ys) in strata_with(exp, y) {
        let n = z.len() as i64;
        let w = r(n, total);
        let mut arm_mean = [Rational::zero(), Rational::zero()];
        let mut arm_var = [Rational::zero(), Rational::zero()];
        for arm in [false, true] {
            let vals: Vec<Rational> = z
                .iter()
                .zip(&ys)
                .filter(|(&zz, _)| zz == arm)
                .map(|(_, &yy)| r(yy as i64, 1))
                .collect();
            let size = vals.len() as i64;
            let mean = vals.iter().sum::<Rational>() / r(size, 1);
            let ss: Rational = vals.iter().map(|v| (v - &mean) * (v - &mean)).sum();
            arm_var[arm as usize] = ss / r(size - 1, 1) / r(size, 1);
            arm_mean[arm as usize] = mean;
        }
        t += &w * (&arm_mean[1] - &arm_mean[0]);
        var += &w * &w * (&arm_var[0] + &arm_var[1]);
    }
    &t * &t - chisq * var
}

/// Point of a per-stratum program (P1/P3) that encodes the true outcomes `y`.
pub fn encode_stratum_vars(exp: &StratifiedExperiment, problem: &IqclpProblem, y: &OutcomeVector) -> Vec<i64> {
    problem
        .var_meta
        .iter()
        .map(|meta| match meta {
            VarMeta::Stratum {
                stratum, component, ..
            } => {
                let s = &exp.strata()[*stratum];
                s.range()
                    .zip(s.treated())
                    .filter(|&(i, &z)| {
                        z == component.treated() && exp.measured().get(i) == component.measured_positive() && y.get(i)
                    })
                    .count() as i64
            }
            other => panic!("unexpected variable {other:?}"),
        })
        .collect()
}

/// Point of a per-class program (P2/P4) that encodes the true outcomes `y`.
pub fn encode_class_vars(
    exp: &StratifiedExperiment,
    problem: &IqclpProblem,
    index: &UniqueTableIndex,
    y: &OutcomeVector,
) -> Vec<i64> {
    let mut tables = Vec::new();
    for (s, stratum) in exp.strata().iter().enumerate() {
        let mut d = DeltaTable::default();
        for (i, &z) in stratum.range().zip(stratum.treated()) {
            if !y.get(i) {
                continue;
            }
            match (z, exp.measured().get(i)) {
                (false, false) => d.control_negative += 1,
                (false, true) => d.control_positive += 1,
                (true, false) => d.treated_negative += 1,
                (true, true) => d.treated_positive += 1,
            }
        }
        tables.push((index.stratum_to_class()[s], d));
    }
    problem
        .var_meta
        .iter()
        .map(|meta| match meta {
            VarMeta::Class { class, table, .. } => {
                tables.iter().filter(|(c, d)| c == class && d == table).count() as i64
            }
            other => panic!("unexpected variable {other:?}"),
        })
        .collect()
}

pub fn random_outcomes(rng: &mut ChaCha8Rng, n: usize) -> OutcomeVector {
    let p: f64 = rng.gen_range(0.05..0.95);
    OutcomeVector::new((0..n).map(|_| rng.gen_bool(p)).collect())
}

/// Every way of choosing `m` treated subjects out of `n`.
pub fn assignments(n: usize, m: usize) -> Vec<Vec<bool>> {
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == m)
        .map(|mask| (0..n).map(|j| mask >> j & 1 == 1).collect())
        .collect()
}

/// Mean and variance of the treated-positive count over all assignments
/// that keep each stratum's treated count, with outcomes fixed at `y`.
pub fn enumerated_moments(exp: &StratifiedExperiment, y: &OutcomeVector) -> (Rational, Rational) {
    let per_stratum: Vec<Vec<i64>> = strata_with(exp, y)
        .into_iter()
        .map(|(z, ys)| {
            let m = z.iter().filter(|&&b| b).count();
            assignments(z.len(), m)
                .into_iter()
                .map(|zz| zz.iter().zip(&ys).filter(|(&a, &b)| a && b).count() as i64)
                .collect()
        })
        .collect();
    let mut totals = vec![0i64];
    for counts in &per_stratum {
        totals = totals.iter().flat_map(|t| counts.iter().map(move |c| t + c)).collect();
    }
    let count = r(totals.len() as i64, 1);
    let mean: Rational = totals.iter().map(|&t| r(t, 1)).sum::<Rational>() / &count;
    let var: Rational = totals
        .iter()
        .map(|&t| (r(t, 1) - &mean) * (r(t, 1) - &mean))
        .sum::<Rational>()
        / &count;
    (mean, var)
}

/// g(x) at a rational point, from the full symmetric matrix.
pub fn g_at(problem: &IqclpProblem, x: &[Rational]) -> Rational {
    let n = x.len();
    let mut acc = Rational::zero();
    for u in 0..n {
        acc += &problem.quad_linear[u] * &x[u];
        for v in 0..n {
            acc += problem.quad_matrix.entry(u, v) * &x[u] * &x[v];
        }
    }
    acc
}

/// Expected inner optimum of design accuracy over all 2^N Bernoulli draws,
/// with each draw's warning accuracy from the brute-force oracle.
pub fn exact_design_accuracy(design: &StratifiedExperiment, p0: f64, p1: f64, spec: &NullSpec) -> f64 {
    let n = design.num_subjects();
    let z = design.treatment();
    let mut expectation = 0.0;
    for mask in 0u32..1 << n {
        let y: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let prob: f64 = y
            .iter()
            .zip(&z)
            .map(|(&yy, &zz)| {
                let p = if zz { p1 } else { p0 };
                if yy {
                    p
                } else {
                    1.0 - p
                }
            })
            .product();
        let exp = design.with_outcomes(OutcomeVector::new(y)).unwrap();
        let (wa, _) = brute_force_wa(&exp, spec).unwrap();
        let value = match wa {
            WarningAccuracy::Value(v) => warnacc_core::rational::to_f64(&v),
            WarningAccuracy::NotOverturnable => 0.0,
            other => panic!("oracle returned {other:?}"),
        };
        expectation += prob * value;
    }
    expectation
}
