//! Randomization tests for stratified experiments.
//!
//! Sharp null: Mantel-Haenszel statistic with exact finite-population
//! moments, or the exact randomization p-value. Weak null: difference in
//! means with the conservative plug-in variance. All decisions are made in
//! exact rational arithmetic against a chi-square critical value that is
//! rationalized once.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::experiment::{tables_for, OutcomeVector, StratifiedExperiment, StratumTable};
use crate::rational::{int, Rational};

/// Default cap on the number of assignments an exact p-value may range over.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// Denominator used to rationalize the chi-square critical value.
const QUANTILE_DENOMINATOR: i64 = 1_000_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NullKind {
    Sharp,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecisionMethod {
    ChiSquare,
    ExactEnumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sidedness {
    OneSidedUpper,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decision {
    Reject,
    Accept,
}

impl Decision {
    pub fn opposite(self) -> Decision {
        match self {
            Decision::Reject => Decision::Accept,
            Decision::Accept => Decision::Reject,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NullSpec {
    pub null_kind: NullKind,
    pub alpha: Rational,
    pub method: DecisionMethod,
    /// Only consulted by exact enumeration.
    pub sidedness: Sidedness,
    pub enumeration_cap: u64,
}

impl NullSpec {
    pub fn new(
        null_kind: NullKind,
        alpha: Rational,
        method: DecisionMethod,
        sidedness: Sidedness,
    ) -> Result<Self> {
        check_alpha(&alpha)?;
        if null_kind == NullKind::Weak && method == DecisionMethod::ExactEnumeration {
            return Err(Error::InvalidParameter(
                "exact enumeration is defined for the sharp null only".into(),
            ));
        }
        Ok(NullSpec {
            null_kind,
            alpha,
            method,
            sidedness,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        })
    }

    /// Sharp null, chi-square decision.
    pub fn sharp_chisq(alpha: Rational) -> Result<Self> {
        Self::new(NullKind::Sharp, alpha, DecisionMethod::ChiSquare, Sidedness::TwoSided)
    }

    /// Weak null, chi-square decision.
    pub fn weak_chisq(alpha: Rational) -> Result<Self> {
        Self::new(NullKind::Weak, alpha, DecisionMethod::ChiSquare, Sidedness::TwoSided)
    }

    /// Sharp null, exact randomization p-value.
    pub fn sharp_exact(alpha: Rational, sidedness: Sidedness) -> Result<Self> {
        Self::new(NullKind::Sharp, alpha, DecisionMethod::ExactEnumeration, sidedness)
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.enumeration_cap = cap;
        self
    }
}

/// Outcome of one test. For chi-square decisions `statistic` is the squared
/// standardized statistic (zero when degenerate) and `threshold` the
/// rationalized critical value; for exact decisions they are the observed
/// Mantel-Haenszel count and alpha, and `p_value` is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestDecision {
    pub statistic: Rational,
    pub threshold: Rational,
    pub decision: Decision,
    pub degenerate: bool,
    pub p_value: Option<Rational>,
}

fn check_alpha(alpha: &Rational) -> Result<()> {
    if alpha.is_positive() && *alpha < int(1) {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha.to_string()))
    }
}

/// The 1 - alpha quantile of chi-square with one degree of freedom, rounded
/// to a multiple of 1e-15.
pub fn chisq_quantile(alpha: &Rational) -> Result<Rational> {
    check_alpha(alpha)?;
    let a = alpha
        .to_f64()
        .ok_or_else(|| Error::AlphaOutOfRange(alpha.to_string()))?;
    // P(X > q) = erfc(sqrt(q/2)), so q = 2 erfc^-1(a)^2.
    let x = erfc_inv(a);
    let q = 2.0 * x * x;
    let exact = Rational::from_float(q).ok_or_else(|| Error::AlphaOutOfRange(alpha.to_string()))?;
    let den = BigInt::from(QUANTILE_DENOMINATOR);
    let scaled = (exact * Rational::from_integer(den.clone())).round().to_integer();
    Ok(Rational::new(scaled, den))
}

/// A decision procedure with its critical value precomputed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionRule {
    spec: NullSpec,
    chisq: Rational,
}

impl DecisionRule {
    pub fn new(spec: &NullSpec) -> Result<Self> {
        check_alpha(&spec.alpha)?;
        if spec.null_kind == NullKind::Weak && spec.method == DecisionMethod::ExactEnumeration {
            return Err(Error::InvalidParameter(
                "exact enumeration is defined for the sharp null only".into(),
            ));
        }
        Ok(DecisionRule {
            spec: spec.clone(),
            chisq: chisq_quantile(&spec.alpha)?,
        })
    }

    pub fn spec(&self) -> &NullSpec {
        &self.spec
    }

    /// Rationalized chi-square critical value for the spec's alpha.
    pub fn chisq(&self) -> &Rational {
        &self.chisq
    }

    /// Checks that the experiment satisfies the rule's preconditions.
    pub fn check(&self, exp: &StratifiedExperiment) -> Result<()> {
        match (self.spec.null_kind, self.spec.method) {
            (NullKind::Weak, _) => check_arm_sizes(exp),
            (NullKind::Sharp, DecisionMethod::ExactEnumeration) => {
                check_cap(exp_sizes(exp), self.spec.enumeration_cap)
            }
            _ => Ok(()),
        }
    }

    pub fn decide(&self, exp: &StratifiedExperiment, y: &OutcomeVector) -> Result<TestDecision> {
        exp.check_len(y)?;
        self.check(exp)?;
        self.decide_tables(&tables_for(exp, y))
    }

    /// Decision from the per-stratum tables of an outcome vector against the
    /// design. Weak-null arm sizes are checked, reported by stratum position.
    pub fn decide_tables(&self, tables: &[StratumTable]) -> Result<TestDecision> {
        match (self.spec.null_kind, self.spec.method) {
            (NullKind::Sharp, DecisionMethod::ChiSquare) => {
                let t = mh_statistic_tables(tables);
                let (e, var) = mh_moments_tables(tables);
                Ok(chisq_decision(&(t - e), var, &self.chisq))
            }
            (NullKind::Weak, DecisionMethod::ChiSquare) => {
                let t = neyman_statistic_tables(tables);
                let var = neyman_varhat_tables(tables)?;
                Ok(chisq_decision(&t, var, &self.chisq))
            }
            (NullKind::Sharp, DecisionMethod::ExactEnumeration) => {
                let p = pvalue_tables(tables, self.spec.sidedness, self.spec.enumeration_cap)?;
                let (_, var) = mh_moments_tables(tables);
                let decision = if p <= self.spec.alpha {
                    Decision::Reject
                } else {
                    Decision::Accept
                };
                Ok(TestDecision {
                    statistic: mh_statistic_tables(tables),
                    threshold: self.spec.alpha.clone(),
                    decision,
                    degenerate: var.is_zero(),
                    p_value: Some(p),
                })
            }
            (NullKind::Weak, DecisionMethod::ExactEnumeration) => unreachable!(),
        }
    }
}

/// Reject iff var > 0 and centered^2 > chisq * var.
fn chisq_decision(centered: &Rational, var: Rational, chisq: &Rational) -> TestDecision {
    if var.is_zero() {
        return TestDecision {
            statistic: int(0),
            threshold: chisq.clone(),
            decision: Decision::Accept,
            degenerate: true,
            p_value: None,
        };
    }
    let sq = centered * centered;
    let decision = if sq > chisq * &var {
        Decision::Reject
    } else {
        Decision::Accept
    };
    TestDecision {
        statistic: sq / var,
        threshold: chisq.clone(),
        decision,
        degenerate: false,
        p_value: None,
    }
}

fn r(v: u64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub(crate) fn mh_statistic_tables(tables: &[StratumTable]) -> Rational {
    r(tables.iter().map(|t| t.treated_positive).sum())
}

pub(crate) fn mh_moments_tables(tables: &[StratumTable]) -> (Rational, Rational) {
    let mut e = int(0);
    let mut var = int(0);
    for t in tables {
        let n = t.size();
        let m = t.treated();
        let k = t.treated_positive + t.control_positive;
        e += Rational::new(BigInt::from(m * k), BigInt::from(n));
        let num = BigInt::from(m) * BigInt::from(k) * BigInt::from(n - k) * BigInt::from(n - m);
        let den = BigInt::from(n) * BigInt::from(n) * BigInt::from(n - 1);
        var += Rational::new(num, den);
    }
    (e, var)
}

pub(crate) fn neyman_statistic_tables(tables: &[StratumTable]) -> Rational {
    let total: u64 = tables.iter().map(StratumTable::size).sum();
    let mut acc = int(0);
    for t in tables {
        let (n, m) = (t.size(), t.treated());
        let diff = Rational::new(t.treated_positive.into(), m.into())
            - Rational::new(t.control_positive.into(), (n - m).into());
        acc += Rational::new(n.into(), total.into()) * diff;
    }
    acc
}

pub(crate) fn neyman_varhat_tables(tables: &[StratumTable]) -> Result<Rational> {
    let total: u64 = tables.iter().map(StratumTable::size).sum();
    let mut acc = int(0);
    for (i, t) in tables.iter().enumerate() {
        let (n, m) = (t.size(), t.treated());
        let c = n - m;
        if m < 2 || c < 2 {
            return Err(Error::ArmTooSmall {
                stratum: format!("#{i}"),
                treated: m as usize,
                control: c as usize,
            });
        }
        let a = t.treated_positive;
        let k = t.control_positive;
        let treated = Rational::new((a * (m - a)).into(), (m * m * (m - 1)).into());
        let control = Rational::new((k * (c - k)).into(), (c * c * (c - 1)).into());
        let w = Rational::new(n.into(), total.into());
        acc += &w * &w * (treated + control);
    }
    Ok(acc)
}

pub fn check_arm_sizes(exp: &StratifiedExperiment) -> Result<()> {
    for s in exp.strata() {
        if s.treated_count() < 2 || s.control_count() < 2 {
            return Err(Error::ArmTooSmall {
                stratum: s.label().to_string(),
                treated: s.treated_count(),
                control: s.control_count(),
            });
        }
    }
    Ok(())
}

/// sum over strata of Z * y
pub fn mh_statistic(exp: &StratifiedExperiment, y: &OutcomeVector) -> Result<Rational> {
    exp.check_len(y)?;
    Ok(mh_statistic_tables(&tables_for(exp, y)))
}

/// Null mean and variance of the Mantel-Haenszel statistic over the
/// randomization distribution.
pub fn mh_moments(exp: &StratifiedExperiment, y: &OutcomeVector) -> Result<(Rational, Rational)> {
    exp.check_len(y)?;
    Ok(mh_moments_tables(&tables_for(exp, y)))
}

pub fn mh_decision(
    exp: &StratifiedExperiment,
    y: &OutcomeVector,
    alpha: &Rational,
) -> Result<TestDecision> {
    DecisionRule::new(&NullSpec::sharp_chisq(alpha.clone())?)?.decide(exp, y)
}

/// Stratum-size weighted difference in means.
pub fn neyman_statistic(exp: &StratifiedExperiment, y: &OutcomeVector) -> Result<Rational> {
    exp.check_len(y)?;
    Ok(neyman_statistic_tables(&tables_for(exp, y)))
}

pub fn neyman_varhat(exp: &StratifiedExperiment, y: &OutcomeVector) -> Result<Rational> {
    exp.check_len(y)?;
    check_arm_sizes(exp)?;
    neyman_varhat_tables(&tables_for(exp, y))
}

pub fn neyman_decision(
    exp: &StratifiedExperiment,
    y: &OutcomeVector,
    alpha: &Rational,
) -> Result<TestDecision> {
    DecisionRule::new(&NullSpec::weak_chisq(alpha.clone())?)?.decide(exp, y)
}

/// General entry point: the decision of `spec` on outcome vector `y`.
pub fn decide(exp: &StratifiedExperiment, y: &OutcomeVector, spec: &NullSpec) -> Result<TestDecision> {
    DecisionRule::new(spec)?.decide(exp, y)
}

fn exp_sizes(exp: &StratifiedExperiment) -> Vec<(u64, u64)> {
    exp.strata()
        .iter()
        .map(|s| (s.size() as u64, s.treated_count() as u64))
        .collect()
}

pub(crate) fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Number of equally likely assignments: the product of C(n_i, m_i).
pub fn assignment_space_size(exp: &StratifiedExperiment) -> BigInt {
    exp_sizes(exp)
        .into_iter()
        .map(|(n, m)| binomial(n, m))
        .product()
}

fn check_cap(sizes: Vec<(u64, u64)>, cap: u64) -> Result<()> {
    let size: BigInt = sizes.into_iter().map(|(n, m)| binomial(n, m)).product();
    if size > BigInt::from(cap) {
        return Err(Error::EnumerationCapExceeded {
            size: size.to_string(),
            cap,
        });
    }
    Ok(())
}

/// Exact p-value over the uniform distribution on assignments. The count of
/// assignments reaching each value of T is built by convolving the
/// per-stratum hypergeometric counts C(K, t) C(n - K, m - t).
pub(crate) fn pvalue_tables(tables: &[StratumTable], sidedness: Sidedness, cap: u64) -> Result<Rational> {
    check_cap(tables.iter().map(|t| (t.size(), t.treated())).collect(), cap)?;
    let mut dist = vec![BigInt::one()];
    for t in tables {
        let (n, m) = (t.size(), t.treated());
        let k = t.treated_positive + t.control_positive;
        let local: Vec<BigInt> = (0..=k.min(m))
            .map(|j| binomial(k, j) * binomial(n - k, m - j))
            .collect();
        let mut next = vec![BigInt::zero(); dist.len() + local.len() - 1];
        for (i, a) in dist.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in local.iter().enumerate() {
                if !b.is_zero() {
                    next[i + j] += a * b;
                }
            }
        }
        dist = next;
    }
    let total: BigInt = dist.iter().sum();
    let observed = tables.iter().map(|t| t.treated_positive).sum::<u64>();
    let tail: BigInt = match sidedness {
        Sidedness::OneSidedUpper => dist.iter().skip(observed as usize).sum(),
        Sidedness::TwoSided => {
            let (e, _) = mh_moments_tables(tables);
            let dev = (r(observed) - &e).abs();
            dist.iter()
                .enumerate()
                .filter(|(v, _)| (r(*v as u64) - &e).abs() >= dev)
                .map(|(_, c)| c)
                .sum()
        }
    };
    Ok(Rational::new(tail, total))
}

pub fn exact_randomization_pvalue(
    exp: &StratifiedExperiment,
    y: &OutcomeVector,
    sidedness: Sidedness,
    cap: u64,
) -> Result<Rational> {
    exp.check_len(y)?;
    pvalue_tables(&tables_for(exp, y), sidedness, cap)
}

/// f64 view of a decision statistic, for logs.
/// P(X > stat) for X chi-square with one degree of freedom, in floating
/// point. For reporting only; decisions compare against the rational
/// quantile.
pub fn chisq_upper_tail(stat: &Rational) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let x = approx(stat);
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(1.0).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

pub fn approx(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{parse_rational, ratio};
    use proptest::prelude::*;

    fn alpha05() -> Rational {
        ratio(1, 20)
    }

    fn single(treated: &[u8], y: &[u8]) -> (StratifiedExperiment, OutcomeVector) {
        let z: Vec<bool> = treated.iter().map(|&b| b == 1).collect();
        let y = OutcomeVector::from_bits(y).unwrap();
        let exp = StratifiedExperiment::from_strata(vec![("s", z, y.as_slice().to_vec())]).unwrap();
        (exp, y)
    }

    #[test]
    fn upper_tail_at_quantile_is_alpha() {
        let q = chisq_quantile(&alpha05()).unwrap();
        assert!((chisq_upper_tail(&q) - 0.05).abs() < 1e-9);
        assert_eq!(chisq_upper_tail(&int(0)), 1.0);
    }

    fn lone_treated() -> (StratifiedExperiment, OutcomeVector) {
        let mut z = vec![0u8; 1001];
        z[0] = 1;
        single(&z, &z)
    }

    fn three_strata(variant: u8) -> (StratifiedExperiment, OutcomeVector) {
        let raw: Vec<(&str, &str)> = if variant == 1 {
            vec![("101", "101"), ("001000", "001000"), ("00010000", "00010000")]
        } else {
            vec![("1000000", "0000000"), ("11010", "11010"), ("00110", "00110")]
        };
        let bits = |s: &str| s.bytes().map(|b| b == b'1').collect::<Vec<_>>();
        let strata = raw
            .iter()
            .enumerate()
            .map(|(i, (z, y))| (format!("s{}", i + 1), bits(z), bits(y)))
            .collect();
        let exp = StratifiedExperiment::from_strata(strata).unwrap();
        let y = exp.measured().clone();
        (exp, y)
    }

    /// High-precision values of the chi-square(1) upper quantiles.
    const CHISQ_ORACLE: [(&str, f64); 4] = [
        ("0.05", 3.841_458_820_694_126),
        ("0.1", 2.705_543_454_095_414_6),
        ("0.01", 6.634_896_601_021_215),
        ("0.999", 1.570_797_149_262_489_8e-6),
    ];

    #[test]
    fn chisq_quantile_matches_reference() {
        for (a, expected) in CHISQ_ORACLE {
            let q = approx(&chisq_quantile(&parse_rational(a).unwrap()).unwrap());
            assert!((q - expected).abs() < 1e-12, "alpha {a}: {q} vs {expected}");
        }
        let q05 = chisq_quantile(&alpha05()).unwrap();
        let scaled = &q05 * Rational::from_integer(BigInt::from(QUANTILE_DENOMINATOR));
        assert!(scaled.is_integer());
        assert_eq!(q05, chisq_quantile(&alpha05()).unwrap());
    }

    #[test]
    fn chisq_quantile_is_squared_normal_quantile() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.975);
        let q = approx(&chisq_quantile(&alpha05()).unwrap());
        assert!((q - z * z).abs() < 1e-12);
    }

    #[test]
    fn chisq_quantile_rejects_bad_alpha() {
        assert!(chisq_quantile(&int(0)).is_err());
        assert!(chisq_quantile(&int(1)).is_err());
        assert!(chisq_quantile(&ratio(-1, 2)).is_err());
        let a = chisq_quantile(&ratio(1, 10)).unwrap();
        let b = chisq_quantile(&ratio(1, 20)).unwrap();
        assert!(a < b);
    }

    #[test]
    fn mh_examples() {
        let (exp, y) = three_strata(1);
        assert_eq!(mh_statistic(&exp, &y).unwrap(), int(4));
        let (exp, y) = lone_treated();
        assert_eq!(mh_statistic(&exp, &y).unwrap(), int(1));
        let (e, var) = mh_moments(&exp, &y).unwrap();
        assert_eq!(e, ratio(1, 1001));
        assert_eq!(var, ratio(1000, 1001 * 1001));
        let d = mh_decision(&exp, &y, &alpha05()).unwrap();
        assert_eq!(d.decision, Decision::Reject);
        assert_eq!(d.statistic, int(1000));
        let zeros = OutcomeVector::zeros(1001);
        assert_eq!(mh_statistic(&exp, &zeros).unwrap(), int(0));
        assert_eq!(mh_moments(&exp, &zeros).unwrap(), (int(0), int(0)));
        let d = mh_decision(&exp, &zeros, &alpha05()).unwrap();
        assert_eq!(d.decision, Decision::Accept);
        assert!(d.degenerate);
    }

    #[test]
    fn mh_small_cases() {
        let (exp, y) = single(&[1, 0], &[1, 0]);
        assert_eq!(mh_moments(&exp, &y).unwrap(), (ratio(1, 2), ratio(1, 4)));
        let (exp, y) = single(&[1, 1, 0, 0], &[1, 1, 0, 0]);
        assert_eq!(mh_moments(&exp, &y).unwrap(), (int(1), ratio(1, 3)));
        let d = mh_decision(&exp, &y, &alpha05()).unwrap();
        assert_eq!(d.statistic, int(3));
        assert_eq!(d.decision, Decision::Accept);
    }

    #[test]
    fn neyman_examples() {
        let (exp, y) = single(&[1, 1, 0, 0], &[1, 0, 0, 0]);
        assert_eq!(neyman_statistic(&exp, &y).unwrap(), ratio(1, 2));
        assert_eq!(neyman_varhat(&exp, &y).unwrap(), ratio(1, 4));
        let d = neyman_decision(&exp, &y, &alpha05()).unwrap();
        assert_eq!(d.statistic, int(1));
        assert_eq!(d.decision, Decision::Accept);
        let zeros = OutcomeVector::zeros(4);
        assert_eq!(neyman_statistic(&exp, &zeros).unwrap(), int(0));
        let d = neyman_decision(&exp, &zeros, &alpha05()).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.decision, Decision::Accept);

        let (paired, y) = single(&[1, 0], &[1, 0]);
        assert!(matches!(neyman_varhat(&paired, &y), Err(Error::ArmTooSmall { .. })));
    }

    #[test]
    fn neyman_cancels_across_equal_strata() {
        let exp = StratifiedExperiment::from_strata(vec![
            ("a", vec![true, true, false, false], vec![true, true, false, false]),
            ("b", vec![true, true, false, false], vec![false, false, true, true]),
        ])
        .unwrap();
        let y = exp.measured().clone();
        assert_eq!(neyman_statistic(&exp, &y).unwrap(), int(0));
        // constant within each arm: zero variance
        assert_eq!(neyman_varhat(&exp, &y).unwrap(), int(0));
    }

    #[test]
    fn neyman_rejects_clear_effect() {
        // 8 treated all positive, 8 controls all negative except one.
        let mut z = vec![1u8; 8];
        z.extend([0u8; 8]);
        let mut y = vec![1u8; 7];
        y.push(0);
        y.extend([0u8; 7]);
        y.push(1);
        let (exp, y) = single(&z, &y);
        let t = neyman_statistic(&exp, &y).unwrap();
        assert_eq!(t, ratio(3, 4));
        let v = neyman_varhat(&exp, &y).unwrap();
        // each arm: 7 of 8 agree, variance 7/(64*7) = 1/64
        assert_eq!(v, ratio(1, 32));
        let d = neyman_decision(&exp, &y, &alpha05()).unwrap();
        assert_eq!(d.statistic, int(18));
        assert_eq!(d.decision, Decision::Reject);
    }

    #[test]
    fn exact_pvalues_from_examples() {
        let (exp, y) = lone_treated();
        let cap = DEFAULT_ENUMERATION_CAP;
        assert_eq!(
            exact_randomization_pvalue(&exp, &y, Sidedness::OneSidedUpper, cap).unwrap(),
            ratio(1, 1001)
        );
        let (exp, y) = three_strata(1);
        assert_eq!(
            exact_randomization_pvalue(&exp, &y, Sidedness::OneSidedUpper, cap).unwrap(),
            ratio(1, 144)
        );
        let (exp, y) = three_strata(2);
        assert_eq!(
            exact_randomization_pvalue(&exp, &y, Sidedness::OneSidedUpper, cap).unwrap(),
            ratio(1, 100)
        );
        assert!(matches!(
            exact_randomization_pvalue(&exp, &y, Sidedness::OneSidedUpper, 10),
            Err(Error::EnumerationCapExceeded { .. })
        ));
    }

    #[test]
    fn exact_decision_uses_pvalue() {
        let (exp, y) = three_strata(1);
        let spec = NullSpec::sharp_exact(alpha05(), Sidedness::OneSidedUpper).unwrap();
        let d = decide(&exp, &y, &spec).unwrap();
        assert_eq!(d.decision, Decision::Reject);
        assert_eq!(d.p_value, Some(ratio(1, 144)));
        assert!(NullSpec::new(
            NullKind::Weak,
            alpha05(),
            DecisionMethod::ExactEnumeration,
            Sidedness::OneSidedUpper
        )
        .is_err());
    }

    /// Enumerates every assignment and tallies the observed statistic.
    fn enumerate_pvalue(tables: &[StratumTable], sidedness: Sidedness) -> Rational {
        fn subsets(n: usize, m: usize) -> Vec<Vec<bool>> {
            (0u32..1 << n)
                .filter(|mask| mask.count_ones() as usize == m)
                .map(|mask| (0..n).map(|i| mask >> i & 1 == 1).collect())
                .collect()
        }
        // outcome vectors per stratum, positives first
        let ys: Vec<Vec<bool>> = tables
            .iter()
            .map(|t| {
                let k = (t.treated_positive + t.control_positive) as usize;
                (0..t.size() as usize).map(|i| i < k).collect()
            })
            .collect();
        let per: Vec<Vec<u64>> = tables
            .iter()
            .zip(&ys)
            .map(|(t, y)| {
                subsets(t.size() as usize, t.treated() as usize)
                    .iter()
                    .map(|z| z.iter().zip(y).filter(|(a, b)| **a && **b).count() as u64)
                    .collect()
            })
            .collect();
        let observed = r(tables.iter().map(|t| t.treated_positive).sum());
        let (e, _) = mh_moments_tables(tables);
        let mut totals = vec![0u64];
        for p in &per {
            totals = totals.iter().flat_map(|a| p.iter().map(move |b| a + b)).collect();
        }
        let hits = totals
            .iter()
            .filter(|&&t| match sidedness {
                Sidedness::OneSidedUpper => r(t) >= observed,
                Sidedness::TwoSided => (r(t) - &e).abs() >= (&observed - &e).abs(),
            })
            .count();
        Rational::new(BigInt::from(hits), BigInt::from(totals.len()))
    }

    fn small_tables() -> impl Strategy<Value = Vec<StratumTable>> {
        proptest::collection::vec(
            (2u64..6).prop_flat_map(|n| (Just(n), 1..n)).prop_flat_map(|(n, m)| {
                (Just(n), Just(m), 0..=m, 0..=n - m)
            }),
            1..4,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(n, m, a, c)| StratumTable::new(n - m - c, c, m - a, a))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn convolution_matches_enumeration(tables in small_tables()) {
            for s in [Sidedness::OneSidedUpper, Sidedness::TwoSided] {
                let p = pvalue_tables(&tables, s, DEFAULT_ENUMERATION_CAP).unwrap();
                prop_assert_eq!(&p, &enumerate_pvalue(&tables, s));
                prop_assert!(p.is_positive() && p <= int(1));
            }
        }

        #[test]
        fn zero_outcomes_give_unit_pvalue(tables in small_tables()) {
            let zero: Vec<StratumTable> = tables
                .iter()
                .map(|t| StratumTable::new(t.control(), 0, t.treated(), 0))
                .collect();
            prop_assert_eq!(
                pvalue_tables(&zero, Sidedness::OneSidedUpper, DEFAULT_ENUMERATION_CAP).unwrap(),
                int(1)
            );
        }

        #[test]
        fn zero_variance_means_centered(tables in small_tables(), flags in proptest::collection::vec(any::<bool>(), 4)) {
            let constant: Vec<StratumTable> = tables
                .iter()
                .zip(flags)
                .map(|(t, pos)| if pos {
                    StratumTable::new(0, t.control(), 0, t.treated())
                } else {
                    StratumTable::new(t.control(), 0, t.treated(), 0)
                })
                .collect();
            let (e, var) = mh_moments_tables(&constant);
            prop_assert!(var.is_zero());
            prop_assert_eq!(e, mh_statistic_tables(&constant));
        }

        #[test]
        fn variances_nonnegative(tables in small_tables()) {
            let (_, var) = mh_moments_tables(&tables);
            prop_assert!(!var.is_negative());
            if tables.iter().all(|t| t.treated() >= 2 && t.control() >= 2) {
                prop_assert!(!neyman_varhat_tables(&tables).unwrap().is_negative());
            }
        }
    }
}
