//! Depth-first branch and bound over the levels of a [`Structure`].
//!
//! Costs are integers (objective loss times the objective scale), so the
//! search looks for a pick vector whose total cost is below the incumbent's.
//! Nodes are pruned with suffix tables indexed by (level, remaining budget):
//!
//! * interval bounds on the linear part L and the variance part R, giving
//!   the box range of `g = L^2 + R`;
//! * for `g <= 0`, tangent cuts: `L^2 >= 2tL - t^2`, so a feasible point has
//!   `sum(2t ell + r) <= t^2` for every t;
//! * for `g > 0`, secant cuts: on `[Lmin, Lmax]`,
//!   `L^2 <= sL + max(Lmin^2 - s Lmin, Lmax^2 - s Lmax)` for every s.
//!
//! All table values are fixed-point integers rounded in the safe direction,
//! so a prune never removes a feasible point. Leaves are checked exactly.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::Zero;

use super::structure::{Choice, Structure, ELL_SHIFT, VAL_SHIFT};
use crate::formulation::QuadSense;

const BUDGET_COLUMNS: u64 = 1024;
/// Tangent and secant slopes are multiples of 2^-16.
const SLOPE_SHIFT: u32 = 16;
const GRID: [i128; 7] = [256, 128, 64, 32, 16, 8, 4];
/// Sums of table values stay below this, so pairwise sums cannot overflow.
const SUM_LIMIT: i128 = 1 << 120;

pub(crate) struct Limits {
    pub max_nodes: u64,
    pub deadline: Option<Instant>,
}

pub(crate) struct SearchOutcome {
    pub best: Option<(u64, Vec<usize>)>,
    pub nodes: u64,
    pub complete: bool,
}

fn floor_shift(v: i128, shift: u32) -> i128 {
    v >> shift
}

fn ceil_shift(v: i128, shift: u32) -> i128 {
    -((-v) >> shift)
}

/// Suffix minima of a per-choice value over (level, budget).
struct Table {
    cols: usize,
    data: Vec<i128>,
    unbounded: Vec<i128>,
}

impl Table {
    fn build(st: &Structure, bcap: u64, value: impl Fn(&Choice) -> Option<i128>) -> Option<Table> {
        let levels = st.levels.len();
        let cols = bcap as usize + 1;
        // per-group values, shared by slot levels
        let mut values: Vec<Vec<i128>> = Vec::with_capacity(st.choices.len());
        let mut magnitude: i128 = 0;
        for choices in &st.choices {
            let vs: Option<Vec<i128>> = choices.iter().map(&value).collect();
            values.push(vs?);
        }
        for level in &st.levels {
            let worst = values[level.group]
                .iter()
                .try_fold(0i128, |acc, v| v.checked_abs().map(|a| acc.max(a)))?;
            magnitude = magnitude.checked_add(worst)?;
            if magnitude >= SUM_LIMIT {
                return None;
            }
        }
        let mut data = vec![0i128; (levels + 1) * cols];
        let mut unbounded = vec![0i128; levels + 1];
        for k in (0..levels).rev() {
            let g = st.levels[k].group;
            let choices = &st.choices[g];
            let vs = &values[g];
            unbounded[k] = vs.iter().min().copied().unwrap_or(0) + unbounded[k + 1];
            let (head, tail) = data.split_at_mut((k + 1) * cols);
            let row = &mut head[k * cols..];
            for b in 0..cols {
                let mut best = i128::MAX;
                for (c, v) in choices.iter().zip(vs) {
                    if c.cost > b as u64 {
                        break;
                    }
                    let cand = v + tail[b - c.cost as usize];
                    if cand < best {
                        best = cand;
                    }
                }
                row[b] = best;
            }
        }
        Some(Table {
            cols,
            data,
            unbounded,
        })
    }

    /// Picks attaining the level-0 minimum for budget `b < cols`.
    fn argmin(&self, st: &Structure, b: u64, value: &impl Fn(&Choice) -> Option<i128>) -> Option<Vec<usize>> {
        let mut b = b as usize;
        let mut picks = Vec::with_capacity(st.levels.len());
        for k in 0..st.levels.len() {
            let target = self.data[k * self.cols + b];
            let next = &self.data[(k + 1) * self.cols..(k + 2) * self.cols];
            let cs = st.level_choices(k);
            let i = cs.iter().position(|c| {
                (c.cost as usize) <= b && value(c).is_some_and(|v| v + next[b - c.cost as usize] == target)
            })?;
            b -= cs[i].cost as usize;
            picks.push(i);
        }
        Some(picks)
    }

    fn at(&self, k: usize, budget: Option<u64>) -> i128 {
        match budget {
            Some(b) if (b as usize) < self.cols => self.data[k * self.cols + b as usize],
            _ => self.unbounded[k],
        }
    }
}

fn tangent_value(t: i128, c: &Choice) -> Option<i128> {
    let ell = if t >= 0 { c.ell_lo } else { c.ell_hi };
    let prod = t.checked_mul(2)?.checked_mul(ell)?;
    floor_shift(prod, 2 * SLOPE_SHIFT).checked_add(c.r_lo)
}

fn secant_value(s: i128, c: &Choice) -> Option<i128> {
    let ell = if s >= 0 { c.ell_hi } else { c.ell_lo };
    let prod = s.checked_mul(ell)?;
    ceil_shift(prod, 2 * SLOPE_SHIFT).checked_add(c.r_hi)
}

/// Halvings of each sign half of the L range when looking for a secant cut.
const SPLIT_DEPTH: u32 = 4;
/// Slopes tried on each side of a piece's own secant slope.
const PIECE_SLOPES: usize = 3;
/// Evenly spaced extra secant slopes per sign of L.
const SPREAD: i128 = 24;

/// Upper bound on `(L^2 - sL) * 2^32` for L in [lmin, lmax] (scaled by 2^48).
fn secant_offset(s: i128, lmin: i128, lmax: i128) -> Option<i128> {
    let at = |l: i128| -> Option<i128> {
        let sq = ceil_shift(l.checked_mul(l)?, 2 * ELL_SHIFT - VAL_SHIFT);
        let lin = floor_shift(s.checked_mul(l)?, 2 * SLOPE_SHIFT);
        sq.checked_sub(lin)
    };
    Some(at(lmin)?.max(at(lmax)?))
}

/// Per-choice value held by a cut table.
fn cut_value(sense: QuadSense, slope: i128, c: &Choice) -> Option<i128> {
    match sense {
        QuadSense::LeqZero => tangent_value(slope, c),
        QuadSense::GtZero => secant_value(slope, c).map(|v| -v),
    }
}

struct Bounds {
    ell_min: Table,
    ell_max_neg: Table,
    r_min: Table,
    r_max_neg: Table,
    slopes: Vec<i128>,
    cuts: Vec<Table>,
}

/// Per-depth running sums along the current path.
#[derive(Clone)]
struct PathState {
    cost: u64,
    l_lo: i128,
    l_hi: i128,
    r_lo: i128,
    r_hi: i128,
    cuts: Vec<i128>,
}

impl PathState {
    fn root(ncuts: usize) -> Self {
        PathState {
            cost: 0,
            l_lo: 0,
            l_hi: 0,
            r_lo: 0,
            r_hi: 0,
            cuts: vec![0; ncuts],
        }
    }

    fn extend(&self, c: &Choice, sense: QuadSense, slopes: &[i128], into: &mut PathState) {
        into.cost = self.cost + c.cost;
        into.l_lo = self.l_lo + c.ell_lo;
        into.l_hi = self.l_hi + c.ell_hi;
        into.r_lo = self.r_lo + c.r_lo;
        into.r_hi = self.r_hi + c.r_hi;
        into.cuts.clear();
        for (acc, &t) in self.cuts.iter().zip(slopes) {
            let v = match sense {
                QuadSense::LeqZero => tangent_value(t, c),
                QuadSense::GtZero => secant_value(t, c),
            };
            // table construction guarantees these fit
            into.cuts.push(acc + v.unwrap_or(0));
        }
    }
}

impl Bounds {
    fn build(st: &Structure, bcap: u64, root_budget: Option<u64>) -> Option<Bounds> {
        if !st.fixed_ok {
            return None;
        }
        let ell_min = Table::build(st, bcap, |c| Some(c.ell_lo))?;
        let ell_max_neg = Table::build(st, bcap, |c| Some(-c.ell_hi))?;
        let r_min = Table::build(st, bcap, |c| Some(c.r_lo))?;
        let r_max_neg = Table::build(st, bcap, |c| Some(-c.r_hi))?;
        let mut bounds = Bounds {
            ell_min,
            ell_max_neg,
            r_min,
            r_max_neg,
            slopes: Vec::new(),
            cuts: Vec::new(),
        };
        let lmin = bounds.ell_min.at(0, root_budget);
        let lmax = -bounds.ell_max_neg.at(0, root_budget);
        let to_slope = |l: i128| l >> (ELL_SHIFT - SLOPE_SHIFT);
        let mut spread = Vec::new();
        let centers = match st.sense {
            QuadSense::LeqZero => {
                // maximize the tangent bound at the root, a concave function of t
                let mut memo: HashMap<i128, Option<i128>> = HashMap::new();
                let mut score = |t: i128| -> Option<i128> {
                    *memo.entry(t).or_insert_with(|| {
                        let table = Table::build(st, bcap, |c| tangent_value(t, c))?;
                        table.at(0, root_budget).checked_sub(t.checked_mul(t)?)
                    })
                };
                vec![ternary(to_slope(lmin), to_slope(lmax), |t| score(t).unwrap_or(i128::MIN))]
            }
            QuadSense::GtZero => {
                // each sign of L gets its own secant slope, chosen to minimize
                // the root bound of that side (a convex function of s)
                let mut centers = Vec::new();
                for (lo, hi) in [(lmin.max(0), lmax), (lmin, lmax.min(0))] {
                    if lo > hi {
                        continue;
                    }
                    // spread for the pieces of the side: ideal slopes run from
                    // about 0 to 2 * max |L|
                    let far = 2 * to_slope(if lo >= 0 { hi } else { lo });
                    for j in 1..=SPREAD {
                        spread.push(far * j / SPREAD);
                    }
                    let mut memo: HashMap<i128, Option<i128>> = HashMap::new();
                    let mut score = |s: i128| -> Option<i128> {
                        *memo.entry(s).or_insert_with(|| {
                            let table = Table::build(st, bcap, |c| secant_value(s, c).map(|v| -v))?;
                            (-table.at(0, root_budget)).checked_add(secant_offset(s, lo, hi)?)
                        })
                    };
                    centers.push(ternary(2 * to_slope(lo), 2 * to_slope(hi), |s| {
                        score(s).map(|v| -v).unwrap_or(i128::MIN)
                    }));
                }
                centers
            }
        };
        let mut slopes = Vec::new();
        for center in centers {
            slopes.push(center);
            for d in GRID {
                let step = center / d;
                if step != 0 {
                    slopes.push(center + step);
                    slopes.push(center - step);
                }
            }
        }
        if st.sense == QuadSense::GtZero {
            slopes.push(0);
            slopes.extend(spread);
        }
        slopes.sort_unstable();
        slopes.dedup();
        for t in slopes {
            if let Some(table) = Table::build(st, bcap, |c| cut_value(st.sense, t, c)) {
                bounds.slopes.push(t);
                bounds.cuts.push(table);
            }
        }
        Some(bounds)
    }

    /// Reason to prune the subtree below a path, if any.
    fn prune(&self, st: &Structure, k: usize, budget: Option<u64>, p: &PathState) -> Option<&'static str> {
        let lmin = p.l_lo + self.ell_min.at(k, budget);
        let lmax = p.l_hi - self.ell_max_neg.at(k, budget);
        let shift = 2 * ELL_SHIFT - VAL_SHIFT;
        match st.sense {
            QuadSense::LeqZero => {
                let dist = if lmin > 0 {
                    lmin
                } else if lmax < 0 {
                    -lmax
                } else {
                    0
                };
                let rmin = p.r_lo + self.r_min.at(k, budget);
                if let Some(sq) = dist.checked_mul(dist) {
                    if floor_shift(sq, shift) + rmin > 0 {
                        return Some("interval");
                    }
                }
                for ((acc, t), table) in p.cuts.iter().zip(&self.slopes).zip(&self.cuts) {
                    if let Some(t2) = t.checked_mul(*t) {
                        if acc + table.at(k, budget) > t2 {
                            return Some("tangent");
                        }
                    }
                }
            }
            QuadSense::GtZero => {
                let rmax = p.r_hi - self.r_max_neg.at(k, budget);
                let interval_dead = |lo: i128, hi: i128| match (lo.checked_mul(lo), hi.checked_mul(hi)) {
                    (Some(a), Some(b)) => ceil_shift(a.max(b), shift) + rmax <= 0,
                    _ => false,
                };
                if interval_dead(lmin, lmax) {
                    return Some("interval");
                }
                if st.guard && p.r_lo + self.r_min.at(k, budget) >= 0 {
                    return Some("zero variance");
                }
                // g > 0 needs L >= 0 or L <= 0; both halves must be ruled out,
                // each possibly split into pieces with their own best secant
                let piece_dead = |lo: i128, hi: i128, positive: bool, whole: bool| {
                    let check = |i: usize| {
                        let s = self.slopes[i];
                        if (positive && s < 0) || (!positive && s > 0) {
                            return false;
                        }
                        secant_offset(s, lo, hi)
                            .is_some_and(|off| p.cuts[i] - self.cuts[i].at(k, budget) + off <= 0)
                    };
                    if whole {
                        return (0..self.slopes.len()).any(check);
                    }
                    // a piece only tries the slopes nearest its own secant
                    let ideal = (lo >> (ELL_SHIFT - SLOPE_SHIFT)) + (hi >> (ELL_SHIFT - SLOPE_SHIFT));
                    let at = self.slopes.partition_point(|&s| s < ideal);
                    let from = at.saturating_sub(PIECE_SLOPES);
                    let to = (at + PIECE_SLOPES).min(self.slopes.len());
                    (from..to).any(check)
                };
                fn split_dead(lo: i128, hi: i128, depth: u32, dead: &dyn Fn(i128, i128) -> bool) -> bool {
                    if lo > hi || dead(lo, hi) {
                        return true;
                    }
                    if depth == 0 || hi - lo < 2 {
                        return false;
                    }
                    let mid = lo + (hi - lo) / 2;
                    split_dead(lo, mid, depth - 1, dead) && split_dead(mid, hi, depth - 1, dead)
                }
                let side_dead = |lo: i128, hi: i128, positive: bool| {
                    lo > hi
                        || interval_dead(lo, hi)
                        || split_dead(lo, hi, SPLIT_DEPTH, &|a, b| piece_dead(a, b, positive, a == lo && b == hi))
                };
                if side_dead(lmin.max(0), lmax, true) && side_dead(lmin, lmax.min(0), false) {
                    return Some("secant");
                }
            }
        }
        None
    }
}

/// Integer maximizer of a unimodal function on [lo, hi], to within about
/// 1/4096 of its magnitude.
fn ternary(mut lo: i128, mut hi: i128, mut f: impl FnMut(i128) -> i128) -> i128 {
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    for _ in 0..64 {
        let width = hi - lo;
        let tol = (lo.abs().max(hi.abs()) / 4096).max(2);
        if width <= tol {
            break;
        }
        let m1 = lo + width / 3;
        let m2 = hi - width / 3;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    lo + (hi - lo) / 2
}

fn heuristic(st: &Structure) -> Option<(u64, Vec<usize>)> {
    repair(st, vec![0; st.levels.len()])
}

/// Greedy completion: from `picks`, repeatedly take the single-level change
/// with the best improvement of g per unit of cost until the point is
/// feasible, then drop cost while staying feasible.
fn repair(st: &Structure, mut picks: Vec<usize>) -> Option<(u64, Vec<usize>)> {
    let levels = st.levels.len();
    let mut l_f = 0.0;
    let mut r_f = 0.0;
    let mut l = BigInt::zero();
    let mut r = BigInt::zero();
    let mut cost_cap: u64 = 0;
    for (k, &i) in picks.iter().enumerate() {
        let cs = st.level_choices(k);
        l_f += cs[i].ell_f;
        r_f += cs[i].r_f;
        l += &cs[i].ell;
        r += &cs[i].r;
        cost_cap = cost_cap.saturating_add(cs.iter().map(|c| c.cost).max().unwrap_or(0));
    }
    let want_low = st.sense == QuadSense::LeqZero;
    let steps = cost_cap.saturating_mul(2).saturating_add(levels as u64 + 16).min(1_000_000);
    let mut feasible = st.feasible_sums(&l, &r);
    let mut step = 0;
    while !feasible && step < steps {
        step += 1;
        let g = l_f * l_f + r_f;
        let mut best: Option<((bool, f64), usize, usize)> = None;
        let mut seen: HashMap<(usize, usize), ()> = HashMap::new();
        for k in 0..levels {
            let group = st.levels[k].group;
            if seen.insert((group, picks[k]), ()).is_some() {
                continue;
            }
            let cs = st.level_choices(k);
            let cur = &cs[picks[k]];
            for (j, c) in cs.iter().enumerate() {
                if j == picks[k] {
                    continue;
                }
                let l2 = l_f - cur.ell_f + c.ell_f;
                let r2 = r_f - cur.r_f + c.r_f;
                let g2 = l2 * l2 + r2;
                let gain = if want_low { g - g2 } else { g2 - g };
                if !(gain > 0.0) {
                    continue;
                }
                let dc = c.cost as f64 - cur.cost as f64;
                let key = if dc <= 0.0 { (true, gain) } else { (false, gain / dc) };
                if best.as_ref().is_none_or(|(b, _, _)| key > *b) {
                    best = Some((key, k, j));
                }
            }
        }
        let (_, k, j) = best?;
        let cs = st.level_choices(k);
        let (old, new) = (&cs[picks[k]], &cs[j]);
        l_f += new.ell_f - old.ell_f;
        r_f += new.r_f - old.r_f;
        l += &new.ell - &old.ell;
        r += &new.r - &old.r;
        picks[k] = j;
        feasible = st.feasible_sums(&l, &r);
    }
    if !feasible {
        return None;
    }
    descend(st, &mut picks, l, r);
    canonicalize(st, &mut picks);
    Some((st.total_cost(&picks), picks))
}

/// Repeatedly applies the single-level change that saves the most cost
/// while keeping the point feasible. `l` and `r` are the point's sums.
fn descend(st: &Structure, picks: &mut [usize], mut l: BigInt, mut r: BigInt) {
    let levels = picks.len();
    loop {
        let mut best: Option<(u64, usize, usize)> = None;
        for k in 0..levels {
            let cs = st.level_choices(k);
            let cur = &cs[picks[k]];
            for (j, c) in cs.iter().enumerate() {
                if c.cost >= cur.cost {
                    break;
                }
                let saving = cur.cost - c.cost;
                if best.as_ref().is_some_and(|b| saving <= b.0) {
                    continue;
                }
                let l2 = &l - &cur.ell + &c.ell;
                let r2 = &r - &cur.r + &c.r;
                if st.feasible_sums(&l2, &r2) {
                    best = Some((saving, k, j));
                }
            }
        }
        match best {
            Some((_, k, j)) => {
                let cs = st.level_choices(k);
                l += &cs[j].ell - &cs[picks[k]].ell;
                r += &cs[j].r - &cs[picks[k]].r;
                picks[k] = j;
            }
            None => break,
        }
    }
}

/// Rounds the minimizers of each root cut table into feasible points,
/// lowering the budget after every success.
fn table_heuristic(st: &Structure, bounds: &Bounds, incumbent: Option<u64>) -> Option<(u64, Vec<usize>)> {
    const MISSES: u32 = 8;
    let mut best: Option<(u64, Vec<usize>)> = None;
    let mut best_cost = incumbent.unwrap_or(u64::MAX);
    for (&slope, table) in bounds.slopes.iter().zip(&bounds.cuts) {
        let value = |c: &Choice| cut_value(st.sense, slope, c);
        let top = (table.cols - 1) as u64;
        let mut b = best_cost.saturating_sub(1).min(top);
        let mut misses = 0;
        while best_cost > 0 {
            let mut found = false;
            if let Some(picks) = table.argmin(st, b, &value) {
                if let Some((cost, picks)) = repair(st, picks) {
                    if cost < best_cost {
                        best_cost = cost;
                        best = Some((cost, picks));
                        found = true;
                    }
                }
            }
            if found {
                misses = 0;
                b = b.min(best_cost.saturating_sub(1));
            } else {
                misses += 1;
                if misses > MISSES || b == 0 {
                    break;
                }
                b -= 1;
            }
            if found && best_cost == 0 {
                break;
            }
        }
    }
    best
}

/// Sorts the picks of each run of slot levels so they are non-decreasing.
fn canonicalize(st: &Structure, picks: &mut [usize]) {
    let mut k = 0;
    while k < picks.len() {
        let mut end = k + 1;
        if st.levels[k].slot {
            while end < picks.len() && st.levels[end].slot && st.levels[end].group == st.levels[k].group {
                end += 1;
            }
            picks[k..end].sort_unstable();
        }
        k = end;
    }
}

/// Best point whose variance part is zero: such points satisfy `g <= 0`
/// under the variance guard whatever L is.
fn zero_variance_point(st: &Structure) -> Option<(u64, Vec<usize>)> {
    let mut picks = Vec::with_capacity(st.levels.len());
    for k in 0..st.levels.len() {
        picks.push(st.level_choices(k).iter().position(|c| c.r.is_zero())?);
    }
    Some((st.total_cost(&picks), picks))
}

pub(crate) fn search(st: &Structure, limits: &Limits, log: &mut Option<&mut dyn Write>) -> SearchOutcome {
    let levels = st.levels.len();
    let mut nodes: u64 = 0;
    if st.trivially_infeasible {
        return SearchOutcome {
            best: None,
            nodes,
            complete: true,
        };
    }
    let mut best = heuristic(st);
    if st.guard && st.sense == QuadSense::LeqZero {
        if let Some(z) = zero_variance_point(st) {
            if best.as_ref().is_none_or(|b| z.0 < b.0) {
                best = Some(z);
            }
        }
    }
    if let Some((c, _)) = &best {
        logline(log, format_args!("incumbent cost {c} from heuristic"));
        if *c == 0 {
            return SearchOutcome {
                best,
                nodes,
                complete: true,
            };
        }
    }
    let max_cost: u64 = (0..levels)
        .map(|k| st.level_choices(k).iter().map(|c| c.cost).max().unwrap_or(0))
        .fold(0u64, u64::saturating_add);
    let mut round = 0;
    let bounds = loop {
        round += 1;
        let root_budget = best.as_ref().map(|(c, _)| c - 1);
        let bcap = root_budget.unwrap_or(max_cost).min(max_cost).min(BUDGET_COLUMNS);
        let bounds = Bounds::build(st, bcap, root_budget);
        if let Some(b) = &bounds {
            logline(
                log,
                format_args!("bounds ready: {} cut slopes, {} budget columns", b.slopes.len(), bcap + 1),
            );
            if round < 4 {
                if let Some(better) = table_heuristic(st, b, best.as_ref().map(|b| b.0)) {
                    logline(log, format_args!("incumbent cost {} from cut tables", better.0));
                    let done = better.0 == 0;
                    best = Some(better);
                    if done {
                        return SearchOutcome {
                            best,
                            nodes,
                            complete: true,
                        };
                    }
                    continue;
                }
            }
        }
        break bounds;
    };
    let ncuts = bounds.as_ref().map_or(0, |b| b.slopes.len());
    let slopes: Vec<i128> = bounds.as_ref().map_or(Vec::new(), |b| b.slopes.clone());

    let budget_for = |best: &Option<(u64, Vec<usize>)>, spent: u64| -> Result<Option<u64>, ()> {
        match best {
            Some((c, _)) if spent >= *c => Err(()),
            Some((c, _)) => Ok(Some(c - spent - 1)),
            None => Ok(None),
        }
    };

    let root = PathState::root(ncuts);
    if let (Some(b), Ok(budget)) = (&bounds, budget_for(&best, 0)) {
        if let Some(reason) = b.prune(st, 0, budget, &root) {
            logline(log, format_args!("depth 0 pruned at root: {reason}"));
            return SearchOutcome {
                best,
                nodes,
                complete: true,
            };
        }
    }
    if levels == 0 {
        return SearchOutcome {
            best,
            nodes,
            complete: true,
        };
    }

    let mut states: Vec<PathState> = vec![root; levels + 1];
    let mut picks = vec![0usize; levels];
    let mut next = vec![0usize; levels];
    let mut k = 0usize;
    let mut complete = true;
    'search: loop {
        let choices = st.level_choices(k);
        let mut descended = false;
        while next[k] < choices.len() {
            let budget = match budget_for(&best, states[k].cost) {
                Ok(b) => b,
                Err(()) => break,
            };
            let i = next[k];
            next[k] += 1;
            let c = &choices[i];
            if budget.is_some_and(|b| c.cost > b) {
                next[k] = choices.len();
                break;
            }
            nodes += 1;
            if nodes > limits.max_nodes
                || (nodes.is_multiple_of(1024) && limits.deadline.is_some_and(|d| Instant::now() >= d))
            {
                complete = false;
                break 'search;
            }
            let (head, tail) = states.split_at_mut(k + 1);
            head[k].extend(c, st.sense, &slopes, &mut tail[0]);
            picks[k] = i;
            let child_budget = budget.map(|b| b - c.cost);
            if k + 1 == levels {
                if st.exact_feasible(&picks) {
                    let cost = tail[0].cost;
                    logline(log, format_args!("depth {} leaf cost {cost} feasible", k + 1));
                    best = Some((cost, picks.clone()));
                } else {
                    logline(log, format_args!("depth {} leaf cost {} infeasible", k + 1, tail[0].cost));
                }
                continue;
            }
            if let Some(b) = &bounds {
                if let Some(reason) = b.prune(st, k + 1, child_budget, &tail[0]) {
                    logline(
                        log,
                        format_args!("depth {} choice {i} cost {} pruned: {reason}", k + 1, tail[0].cost),
                    );
                    continue;
                }
            }
            logline(
                log,
                format_args!(
                    "depth {} choice {i} cost {} budget {}",
                    k + 1,
                    tail[0].cost,
                    child_budget.map_or("unbounded".to_string(), |b| b.to_string())
                ),
            );
            k += 1;
            next[k] = st.start_index(k, Some(i));
            descended = true;
            break;
        }
        if !descended {
            if k == 0 {
                break;
            }
            k -= 1;
        }
    }
    SearchOutcome {
        best,
        nodes,
        complete,
    }
}

fn logline(log: &mut Option<&mut dyn Write>, args: std::fmt::Arguments<'_>) {
    if let Some(w) = log.as_mut() {
        let _ = writeln!(w, "{args}");
    }
}
