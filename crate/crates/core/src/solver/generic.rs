//! Variable-by-variable branch and bound for problems that do not decompose
//! into independent groups. Bounds use exact interval arithmetic.

use std::io::Write;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::search::Limits;
use crate::formulation::{IqclpProblem, QuadSense};
use crate::rational::{int, Rational};

pub(crate) struct GenericOutcome {
    pub best: Option<(Rational, Vec<i64>)>,
    pub nodes: u64,
    pub complete: bool,
}

#[derive(Clone)]
struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    fn point(v: Rational) -> Self {
        Interval { lo: v.clone(), hi: v }
    }

    fn add(&mut self, other: &Interval) {
        self.lo += &other.lo;
        self.hi += &other.hi;
    }

    fn scaled_var(c: &Rational, lo: i64, hi: i64) -> Self {
        let a = c * big(lo);
        let b = c * big(hi);
        if a <= b {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    fn square(&self) -> Self {
        let a = &self.lo * &self.lo;
        let b = &self.hi * &self.hi;
        let hi = if a > b { a.clone() } else { b.clone() };
        let lo = if !self.lo.is_positive() && !self.hi.is_negative() {
            int(0)
        } else if a < b {
            a
        } else {
            b
        };
        Interval { lo, hi }
    }
}

fn big(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

struct Ctx<'a, 'w> {
    p: &'a IqclpProblem,
    limits: &'a Limits,
    log: &'a mut Option<&'w mut dyn Write>,
    x: Vec<i64>,
    best: Option<(Rational, Vec<i64>)>,
    nodes: u64,
    stopped: bool,
    /// Best objective contribution of variables `k..`.
    suffix_best: Vec<Rational>,
}

impl Ctx<'_, '_> {
    fn range(&self, v: usize, k: usize) -> (i64, i64) {
        if v < k {
            (self.x[v], self.x[v])
        } else {
            (self.p.lower[v], self.p.upper[v])
        }
    }

    /// Interval of (a'x, g - (a'x)^2) with variables `k..` free.
    fn bounds(&self, k: usize) -> (Interval, Interval) {
        let p = self.p;
        let mut l = Interval::point(int(0));
        if let Some(a) = &p.quad_matrix.rank_one {
            for (v, av) in a.iter().enumerate() {
                if !av.is_zero() {
                    let (lo, hi) = self.range(v, k);
                    l.add(&Interval::scaled_var(av, lo, hi));
                }
            }
        }
        let mut r = Interval::point(int(0));
        for (v, qv) in p.quad_linear.iter().enumerate() {
            if !qv.is_zero() {
                let (lo, hi) = self.range(v, k);
                r.add(&Interval::scaled_var(qv, lo, hi));
            }
        }
        for (&(u, v), q) in &p.quad_matrix.residual {
            let (ulo, uhi) = self.range(u, k);
            let (vlo, vhi) = self.range(v, k);
            let term = if u == v {
                let sq = Interval {
                    lo: big(ulo),
                    hi: big(uhi),
                }
                .square();
                let a = q * &sq.lo;
                let b = q * &sq.hi;
                if a <= b {
                    Interval { lo: a, hi: b }
                } else {
                    Interval { lo: b, hi: a }
                }
            } else {
                let two_q = q * int(2);
                let corners = [ulo * vlo, ulo * vhi, uhi * vlo, uhi * vhi];
                let vals: Vec<Rational> = corners.iter().map(|&c| &two_q * big(c)).collect();
                Interval {
                    lo: vals.iter().min().cloned().unwrap_or_else(|| int(0)),
                    hi: vals.iter().max().cloned().unwrap_or_else(|| int(0)),
                }
            };
            r.add(&term);
        }
        (l, r)
    }

    fn prune_reason(&self, k: usize, fixed_obj: &Rational) -> Option<&'static str> {
        let p = self.p;
        if let Some((best, _)) = &self.best {
            if &(fixed_obj + &self.suffix_best[k]) <= best {
                return Some("objective");
            }
        }
        for eq in &p.equalities {
            let (mut lo, mut hi) = (0i64, 0i64);
            for &v in &eq.vars {
                let (a, b) = self.range(v, k);
                lo += a;
                hi += b;
            }
            if eq.rhs < lo || eq.rhs > hi {
                return Some("equality");
            }
        }
        let (l, r) = self.bounds(k);
        let sq = l.square();
        let g_lo = &sq.lo + &r.lo;
        let g_hi = &sq.hi + &r.hi;
        let r_may_vanish = !r.lo.is_positive() && !r.hi.is_negative();
        match p.quad_sense {
            QuadSense::LeqZero => {
                if g_lo.is_positive() && !(p.variance_guard && r_may_vanish) {
                    return Some("box minimum");
                }
            }
            QuadSense::GtZero => {
                if !g_hi.is_positive() {
                    return Some("box maximum");
                }
                if p.variance_guard && r.lo.is_zero() && r.hi.is_zero() {
                    return Some("zero variance");
                }
            }
        }
        None
    }

    fn dfs(&mut self, k: usize, fixed_obj: Rational) {
        if self.stopped {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes
            || (self.nodes.is_multiple_of(1024) && self.limits.deadline.is_some_and(|d| Instant::now() >= d))
        {
            self.stopped = true;
            return;
        }
        if let Some(reason) = self.prune_reason(k, &fixed_obj) {
            if let Some(w) = self.log.as_mut() {
                let _ = writeln!(w, "depth {k} pruned: {reason}");
            }
            return;
        }
        let n = self.p.num_vars();
        if k == n {
            if self.p.satisfies(&self.x) {
                if let Some(w) = self.log.as_mut() {
                    let _ = writeln!(w, "depth {k} leaf objective {fixed_obj} feasible");
                }
                self.best = Some((fixed_obj, self.x.clone()));
            }
            return;
        }
        if let Some(w) = self.log.as_mut() {
            let _ = writeln!(w, "depth {k} objective so far {fixed_obj}");
        }
        let (lo, hi) = (self.p.lower[k], self.p.upper[k]);
        let coef = self.p.objective[k].clone();
        let values: Box<dyn Iterator<Item = i64>> = if coef.is_negative() {
            Box::new(lo..=hi)
        } else {
            Box::new((lo..=hi).rev())
        };
        for value in values {
            self.x[k] = value;
            let obj = &fixed_obj + &coef * big(value);
            self.dfs(k + 1, obj);
            if self.stopped {
                return;
            }
        }
        self.x[k] = self.p.lower[k];
    }
}

pub(crate) fn search(
    p: &IqclpProblem,
    limits: &Limits,
    log: &mut Option<&mut dyn Write>,
) -> GenericOutcome {
    let n = p.num_vars();
    let mut suffix_best = vec![int(0); n + 1];
    for k in (0..n).rev() {
        let a = &p.objective[k] * big(p.lower[k]);
        let b = &p.objective[k] * big(p.upper[k]);
        suffix_best[k] = &suffix_best[k + 1] + if a > b { a } else { b };
    }
    let mut ctx = Ctx {
        p,
        limits,
        log,
        x: p.lower.clone(),
        best: None,
        nodes: 0,
        stopped: false,
        suffix_best,
    };
    ctx.dfs(0, p.objective_constant.clone());
    GenericOutcome {
        best: ctx.best,
        nodes: ctx.nodes,
        complete: !ctx.stopped,
    }
}
