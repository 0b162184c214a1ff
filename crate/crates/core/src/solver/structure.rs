//! Reduction of a problem to levels of aggregated choices.
//!
//! Variables are grouped by stratum or class. Inside a group, variables that
//! the quadratic constraint cannot tell apart form a block, so the
//! constraint depends on the block sums only; for a given block sum the
//! objective is maximized by filling the block's variables in order of
//! decreasing objective coefficient. A group without an equality becomes
//! one level whose choices are all combinations of block sums. A group tied
//! by an equality `sum x = P` becomes P interchangeable slot levels, each
//! choosing one block.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::formulation::{IqclpProblem, QuadSense};
use crate::rational::{common_denominator, int, scale_exact, Rational};

/// Fixed-point shift for linear-part values.
pub(crate) const ELL_SHIFT: u32 = 48;
/// Fixed-point shift for constraint values.
pub(crate) const VAL_SHIFT: u32 = 32;

const MAX_GROUP_CHOICES: u128 = 2_000_000;
const MAX_PAIRWISE_GROUP: usize = 64;

#[derive(Debug, Clone)]
pub(crate) struct Block {
    /// Members by decreasing objective coefficient, then index.
    pub vars: Vec<usize>,
    pub lo: i64,
    pub hi: i64,
}

#[derive(Debug, Clone)]
pub(crate) enum Payload {
    /// Block sums of a free group.
    Sums(Vec<i64>),
    /// Block taken by one slot of an equality group.
    Block(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Choice {
    pub cost: u64,
    /// Linear part scaled by `dl`.
    pub ell: BigInt,
    /// Variance part scaled by `dr`.
    pub r: BigInt,
    pub ell_lo: i128,
    pub ell_hi: i128,
    pub r_lo: i128,
    pub r_hi: i128,
    pub ell_f: f64,
    pub r_f: f64,
    pub payload: Payload,
}

#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub blocks: Vec<Block>,
    /// Right-hand side of the group's equality, if any.
    pub slots: Option<i64>,
    pub size: u64,
    pub first_var: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Level {
    pub group: usize,
    /// Slot levels of the same group are consecutive and take
    /// non-decreasing choice indices.
    pub slot: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Structure {
    pub groups: Vec<Group>,
    pub choices: Vec<Vec<Choice>>,
    pub levels: Vec<Level>,
    pub dl: BigInt,
    pub dr: BigInt,
    /// Objective coefficients times `obj_scale` are integers.
    pub obj_scale: BigInt,
    /// Objective when every level takes a cost-zero choice.
    pub base: Rational,
    pub sense: QuadSense,
    pub guard: bool,
    /// All fixed-point values fit; pruning is disabled otherwise.
    pub fixed_ok: bool,
    /// An equality cannot be met at all.
    pub trivially_infeasible: bool,
}

impl Structure {
    pub fn level_choices(&self, k: usize) -> &[Choice] {
        &self.choices[self.levels[k].group]
    }

    /// First choice index allowed at level `k` given the pick at `k - 1`.
    pub fn start_index(&self, k: usize, prev_pick: Option<usize>) -> usize {
        match prev_pick {
            Some(p) if self.levels[k].slot && k > 0 && self.levels[k - 1].group == self.levels[k].group => p,
            _ => 0,
        }
    }

    /// Exact feasibility of a full pick vector.
    pub fn exact_feasible(&self, picks: &[usize]) -> bool {
        let mut l = BigInt::zero();
        let mut r = BigInt::zero();
        for (k, &i) in picks.iter().enumerate() {
            let c = &self.level_choices(k)[i];
            l += &c.ell;
            r += &c.r;
        }
        self.feasible_sums(&l, &r)
    }

    /// Sign test of g * dl^2 * dr = l^2 dr + r dl^2.
    pub fn feasible_sums(&self, l: &BigInt, r: &BigInt) -> bool {
        let g = l * l * &self.dr + r * &self.dl * &self.dl;
        match self.sense {
            QuadSense::LeqZero => !g.is_positive() || (self.guard && r.is_zero()),
            QuadSense::GtZero => g.is_positive() && !(self.guard && r.is_zero()),
        }
    }

    pub fn total_cost(&self, picks: &[usize]) -> u64 {
        picks
            .iter()
            .enumerate()
            .map(|(k, &i)| self.level_choices(k)[i].cost)
            .sum()
    }

    pub fn objective_of_cost(&self, cost: u64) -> Rational {
        &self.base - Rational::new(BigInt::from(cost), self.obj_scale.clone())
    }

    /// Variable assignment of a pick vector.
    pub fn decode(&self, problem: &IqclpProblem, picks: &[usize]) -> Vec<i64> {
        let mut x = problem.lower.clone();
        let mut slot_counts: HashMap<usize, Vec<i64>> = HashMap::new();
        for (k, &i) in picks.iter().enumerate() {
            let g = self.levels[k].group;
            match &self.choices[g][i].payload {
                Payload::Sums(sums) => {
                    for (block, &s) in self.groups[g].blocks.iter().zip(sums) {
                        fill_block(problem, block, s, &mut x);
                    }
                }
                Payload::Block(b) => {
                    slot_counts
                        .entry(g)
                        .or_insert_with(|| vec![0; self.groups[g].blocks.len()])[*b] += 1;
                }
            }
        }
        for (g, counts) in slot_counts {
            for (block, &s) in self.groups[g].blocks.iter().zip(&counts) {
                fill_block(problem, block, s, &mut x);
            }
        }
        x
    }
}

/// Raises the block's variables from their lower bounds, best objective
/// first, until they sum to `s`.
fn fill_block(problem: &IqclpProblem, block: &Block, s: i64, x: &mut [i64]) {
    let mut left = s - block.lo;
    for &v in &block.vars {
        let room = problem.upper[v] - problem.lower[v];
        let take = left.min(room);
        x[v] = problem.lower[v] + take;
        left -= take;
    }
}

fn block_objective(problem: &IqclpProblem, block: &Block, s: i64) -> Rational {
    let mut left = s - block.lo;
    let mut acc = int(0);
    for &v in &block.vars {
        let room = problem.upper[v] - problem.lower[v];
        let take = left.min(room);
        let value = problem.lower[v] + take;
        left -= take;
        if value != 0 {
            acc += &problem.objective[v] * Rational::from_integer(BigInt::from(value));
        }
    }
    acc
}

fn floor_div(num: &BigInt, den: &BigInt) -> BigInt {
    num.div_floor(den)
}

fn ceil_div(num: &BigInt, den: &BigInt) -> BigInt {
    -((-num).div_floor(den))
}

fn fixed(value: &BigInt, den: &BigInt, shift: u32) -> (Option<i128>, Option<i128>) {
    let num = value << shift;
    (floor_div(&num, den).to_i128(), ceil_div(&num, den).to_i128())
}

struct Residual<'a> {
    problem: &'a IqclpProblem,
}

impl Residual<'_> {
    fn get(&self, u: usize, v: usize) -> Rational {
        let key = (u.min(v), u.max(v));
        self.problem
            .quad_matrix
            .residual
            .get(&key)
            .cloned()
            .unwrap_or_else(|| int(0))
    }
}

/// Builds the level structure, or `None` when the problem does not decompose
/// into independent groups and the generic search must be used.
pub(crate) fn analyze(problem: &IqclpProblem) -> Option<Structure> {
    let n = problem.num_vars();
    let zero = int(0);
    let a: Vec<Rational> = match &problem.quad_matrix.rank_one {
        Some(a) => a.clone(),
        None => vec![zero.clone(); n],
    };

    // group membership, groups in order of their first variable
    let mut key_to_group: HashMap<(bool, usize), usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut var_group = vec![0usize; n];
    for v in 0..n {
        let g = match problem.var_meta[v].group() {
            Some(key) => *key_to_group.entry(key).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            }),
            None => {
                members.push(Vec::new());
                members.len() - 1
            }
        };
        members[g].push(v);
        var_group[v] = g;
    }
    let num_groups = members.len();

    let mut slots: Vec<Option<i64>> = vec![None; num_groups];
    for eq in &problem.equalities {
        let g = var_group[*eq.vars.first()?];
        if slots[g].is_some()
            || eq.vars.len() != members[g].len()
            || eq.vars.iter().any(|&v| var_group[v] != g)
        {
            return None;
        }
        slots[g] = Some(eq.rhs);
    }
    let mut has_residual = vec![false; num_groups];
    for &(u, v) in problem.quad_matrix.residual.keys() {
        if var_group[u] != var_group[v] {
            return None;
        }
        has_residual[var_group[u]] = true;
    }

    let residual = Residual { problem };
    let mut groups = Vec::with_capacity(num_groups);
    for (g, vars) in members.iter().enumerate() {
        if slots[g].is_some() && has_residual[g] {
            return None;
        }
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        if !has_residual[g] {
            let mut by_key: HashMap<(&Rational, &Rational), usize> = HashMap::new();
            for &v in vars {
                let b = *by_key.entry((&a[v], &problem.quad_linear[v])).or_insert_with(|| {
                    blocks.push(Vec::new());
                    blocks.len() - 1
                });
                blocks[b].push(v);
            }
        } else {
            if vars.len() > MAX_PAIRWISE_GROUP {
                return None;
            }
            let same = |u: usize, v: usize| {
                let d = residual.get(u, u);
                a[u] == a[v]
                    && problem.quad_linear[u] == problem.quad_linear[v]
                    && residual.get(v, v) == d
                    && residual.get(u, v) == d
                    && vars
                        .iter()
                        .filter(|&&w| w != u && w != v)
                        .all(|&w| residual.get(u, w) == residual.get(v, w))
            };
            for &v in vars {
                match blocks.iter_mut().find(|b| b.iter().all(|&u| same(u, v))) {
                    Some(b) => b.push(v),
                    None => blocks.push(vec![v]),
                }
            }
        }
        let blocks: Vec<Block> = blocks
            .into_iter()
            .map(|mut vs| {
                vs.sort_by(|&u, &v| problem.objective[v].cmp(&problem.objective[u]).then(u.cmp(&v)));
                Block {
                    lo: vs.iter().map(|&v| problem.lower[v]).sum(),
                    hi: vs.iter().map(|&v| problem.upper[v]).sum(),
                    vars: vs,
                }
            })
            .collect();
        if let Some(rhs) = slots[g] {
            // one unit per slot goes to the block's best variable
            for b in &blocks {
                if b.lo != 0 || (rhs > 0 && problem.upper[b.vars[0]] < rhs) {
                    return None;
                }
            }
        } else {
            let count: u128 = blocks
                .iter()
                .map(|b| (b.hi - b.lo) as u128 + 1)
                .try_fold(1u128, |acc, c| acc.checked_mul(c))?;
            if count > MAX_GROUP_CHOICES {
                return None;
            }
        }
        groups.push(Group {
            blocks,
            slots: slots[g],
            size: problem.var_meta[vars[0]].size(),
            first_var: vars[0],
        });
    }

    let dl = common_denominator(a.iter());
    let dr = common_denominator(
        problem
            .quad_matrix
            .residual
            .values()
            .chain(problem.quad_linear.iter()),
    );
    let obj_scale = common_denominator(problem.objective.iter());
    let a_int: Vec<BigInt> = a.iter().map(|v| scale_exact(v, &dl)).collect();
    let q_int: Vec<BigInt> = problem.quad_linear.iter().map(|v| scale_exact(v, &dr)).collect();
    let scaled_obj = |r: &Rational| -> BigInt { scale_exact(r, &obj_scale) };

    let mut fixed_ok = true;
    let mut trivially_infeasible = false;
    let mut base = problem.objective_constant.clone();
    let mut all_choices = Vec::with_capacity(groups.len());
    for group in &groups {
        let reps: Vec<usize> = group.blocks.iter().map(|b| b.vars[0]).collect();
        let mut raw: Vec<(BigInt, BigInt, BigInt, Payload)> = Vec::new();
        match group.slots {
            Some(rhs) => {
                if rhs < 0 || (rhs > 0 && group.blocks.is_empty()) {
                    trivially_infeasible = true;
                }
                for (b, &v) in reps.iter().enumerate() {
                    raw.push((
                        scaled_obj(&problem.objective[v]),
                        a_int[v].clone(),
                        q_int[v].clone(),
                        Payload::Block(b),
                    ));
                }
            }
            None => {
                let nb = group.blocks.len();
                let r_int: Vec<Vec<BigInt>> = (0..nb)
                    .map(|b| {
                        (0..nb)
                            .map(|c| scale_exact(&residual.get(reps[b], reps[c]), &dr))
                            .collect()
                    })
                    .collect();
                let objs: Vec<Vec<BigInt>> = group
                    .blocks
                    .iter()
                    .map(|b| (b.lo..=b.hi).map(|s| scaled_obj(&block_objective(problem, b, s))).collect())
                    .collect();
                let mut sums: Vec<i64> = group.blocks.iter().map(|b| b.lo).collect();
                'odometer: loop {
                    let mut obj = BigInt::zero();
                    let mut ell = BigInt::zero();
                    let mut r = BigInt::zero();
                    for b in 0..nb {
                        let sb = BigInt::from(sums[b]);
                        obj += &objs[b][(sums[b] - group.blocks[b].lo) as usize];
                        ell += &a_int[reps[b]] * &sb;
                        r += &q_int[reps[b]] * &sb;
                        for c in 0..nb {
                            if !r_int[b][c].is_zero() {
                                r += &r_int[b][c] * &sb * BigInt::from(sums[c]);
                            }
                        }
                    }
                    raw.push((obj, ell, r, Payload::Sums(sums.clone())));
                    // last block varies fastest
                    let mut i = nb;
                    loop {
                        if i == 0 {
                            break 'odometer;
                        }
                        i -= 1;
                        if sums[i] < group.blocks[i].hi {
                            sums[i] += 1;
                            continue 'odometer;
                        }
                        sums[i] = group.blocks[i].lo;
                    }
                }
            }
        }
        let best = raw.iter().map(|c| c.0.clone()).max().unwrap_or_else(BigInt::zero);
        let units = match group.slots {
            Some(rhs) => BigInt::from(rhs.max(0)),
            None => BigInt::one(),
        };
        base += Rational::new(&best * units, obj_scale.clone());
        let mut choices: Vec<(usize, Choice)> = Vec::with_capacity(raw.len());
        let mut seen: HashMap<(BigInt, BigInt), usize> = HashMap::new();
        for (idx, (obj, ell, r, payload)) in raw.into_iter().enumerate() {
            let cost = (&best - obj).to_u64()?;
            let key = (ell.clone(), r.clone());
            if let Some(&j) = seen.get(&key) {
                if choices[j].1.cost <= cost {
                    continue;
                }
            }
            let (ell_lo, ell_hi) = fixed(&ell, &dl, ELL_SHIFT);
            let (r_lo, r_hi) = fixed(&r, &dr, VAL_SHIFT);
            let unpack = |v: Option<i128>, ok: &mut bool| {
                v.unwrap_or_else(|| {
                    *ok = false;
                    0
                })
            };
            let choice = Choice {
                cost,
                ell_f: Rational::new(ell.clone(), dl.clone()).to_f64().unwrap_or(0.0),
                r_f: Rational::new(r.clone(), dr.clone()).to_f64().unwrap_or(0.0),
                ell_lo: unpack(ell_lo, &mut fixed_ok),
                ell_hi: unpack(ell_hi, &mut fixed_ok),
                r_lo: unpack(r_lo, &mut fixed_ok),
                r_hi: unpack(r_hi, &mut fixed_ok),
                ell,
                r,
                payload,
            };
            match seen.get(&key) {
                Some(&j) => choices[j] = (idx, choice),
                None => {
                    seen.insert(key, choices.len());
                    choices.push((idx, choice));
                }
            }
        }
        choices.sort_by_key(|(idx, c)| (c.cost, *idx));
        all_choices.push(choices.into_iter().map(|(_, c)| c).collect::<Vec<_>>());
    }

    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&g, &h| {
        groups[h]
            .size
            .cmp(&groups[g].size)
            .then(groups[g].first_var.cmp(&groups[h].first_var))
    });
    let mut levels = Vec::new();
    for g in order {
        match groups[g].slots {
            Some(rhs) => {
                for _ in 0..rhs.max(0) {
                    levels.push(Level { group: g, slot: true });
                }
            }
            None => levels.push(Level { group: g, slot: false }),
        }
    }
    if problem.variance_guard && all_choices.iter().flatten().any(|c| c.r.is_positive()) {
        // the guard needs every variance contribution to be non-positive
        return None;
    }
    Some(Structure {
        groups,
        choices: all_choices,
        levels,
        dl,
        dr,
        obj_scale,
        base,
        sense: problem.quad_sense,
        guard: problem.variance_guard,
        fixed_ok,
        trivially_infeasible,
    })
}
