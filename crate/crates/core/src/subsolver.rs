//! Exact solvers over an explicit lot-type set: the supply-window DP, the
//! subset search used for dives, and the brute-force reference.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{cost, enumerate_applicable_lot_types, Instance, LotType};
use crate::SubsolverError;

/// An integral solution: one `(lot-type, multiplicity)` per branch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub choices: Vec<(LotType, u32)>,
    pub selected: BTreeSet<LotType>,
    pub total_supply: u64,
    pub total_cost: i64,
}

impl Assignment {
    /// Builds an assignment from per-branch choices, recomputing the
    /// selected set, supply and exact cost.
    pub fn from_choices(inst: &Instance, choices: Vec<(LotType, u32)>) -> Self {
        let selected = choices.iter().map(|(l, _)| l.clone()).collect();
        let total_supply = choices.iter().map(|(l, m)| u64::from(*m) * l.size()).sum();
        let total_cost = choices.iter().enumerate().map(|(b, (l, m))| cost(inst, b, l, *m)).sum();
        Assignment { choices, selected, total_supply, total_cost }
    }

    /// Every violated invariant; empty for a feasible, self-consistent value.
    pub fn violations(&self, inst: &Instance) -> Vec<String> {
        let mut out = Vec::new();
        if self.choices.len() != inst.num_branches() {
            out.push(format!("{} choices for {} branches", self.choices.len(), inst.num_branches()));
            return out;
        }
        for (b, (l, m)) in self.choices.iter().enumerate() {
            if !inst.params().contains(l) {
                out.push(format!("branch {b}: lot-type {l} is not applicable"));
            }
            if !inst.multiplicities().contains(m) {
                out.push(format!("branch {b}: multiplicity {m} not in M"));
            }
            if !self.selected.contains(l) {
                out.push(format!("branch {b}: lot-type {l} missing from the selected set"));
            }
        }
        if out.is_empty() {
            let fresh = Assignment::from_choices(inst, self.choices.clone());
            if fresh.selected != self.selected {
                out.push("selected set lists unused lot-types".into());
            }
            if fresh.total_supply != self.total_supply {
                out.push(format!("supply mismatch: stored {}, actual {}", self.total_supply, fresh.total_supply));
            }
            if fresh.total_cost != self.total_cost {
                out.push(format!("cost mismatch: stored {}, actual {}", self.total_cost, fresh.total_cost));
            }
            if !(inst.supply_lo()..=inst.supply_hi()).contains(&fresh.total_supply) {
                out.push(format!(
                    "supply {} outside [{}, {}]",
                    fresh.total_supply,
                    inst.supply_lo(),
                    inst.supply_hi()
                ));
            }
        }
        if self.selected.len() > inst.k() {
            out.push(format!("{} lot-types used, k = {}", self.selected.len(), inst.k()));
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct Choice {
    lot: usize,
    m: u32,
    cost: i64,
    supply: u64,
}

/// All `(l, m)` options of one branch in lexicographic `(l, m)` order.
fn branch_options(inst: &Instance, b: usize, lots: &[LotType]) -> Vec<Choice> {
    let mut out = Vec::with_capacity(lots.len() * inst.multiplicities().len());
    for (i, l) in lots.iter().enumerate() {
        for &m in inst.multiplicities() {
            out.push(Choice { lot: i, m, cost: cost(inst, b, l, m), supply: u64::from(m) * l.size() });
        }
    }
    out
}

/// Cheapest assignment using only lot-types from `lots` that meets the
/// supply window. Ties go to the smaller total supply, then to a fixed
/// deterministic choice.
pub fn assign_optimal(inst: &Instance, lots: &BTreeSet<LotType>) -> Result<Assignment, SubsolverError> {
    if lots.is_empty() {
        return Err(SubsolverError::EmptySet);
    }
    let lots: Vec<LotType> = lots.iter().cloned().collect();
    let options: Vec<Vec<Choice>> = (0..inst.num_branches()).map(|b| branch_options(inst, b, &lots)).collect();
    assign_from_options(inst, &lots, &options)
}

fn build(inst: &Instance, lots: &[LotType], picks: &[Choice]) -> Assignment {
    let choices = picks.iter().map(|c| (lots[c.lot].clone(), c.m)).collect();
    Assignment::from_choices(inst, choices)
}

/// Per-branch minimizers of `cost - lambda * supply`, ties to the smaller
/// supply when `lambda <= 0` and to the larger one otherwise.
fn relaxed(options: &[Vec<Choice>], lambda: f64) -> (f64, u64, Vec<Choice>) {
    let mut value = 0.0;
    let mut supply = 0;
    let mut picks = Vec::with_capacity(options.len());
    for opts in options {
        let mut best = opts[0];
        let mut bv = best.cost as f64 - lambda * best.supply as f64;
        for &c in &opts[1..] {
            let v = c.cost as f64 - lambda * c.supply as f64;
            let tie_up = if lambda > 0.0 { c.supply > best.supply } else { c.supply < best.supply };
            if v < bv || (v == bv && tie_up) {
                best = c;
                bv = v;
            }
        }
        value += bv;
        supply += best.supply;
        picks.push(best);
    }
    (value, supply, picks)
}

/// A multiplier on the supply total for bounding, plus a feasible
/// assignment if the search stumbles on one.
fn lagrangian(options: &[Vec<Choice>], lo: u64, hi: u64, below: bool) -> (f64, Option<(i64, u64, Vec<Choice>)>) {
    let max_cost = options.iter().flatten().map(|c| c.cost.abs()).max().unwrap_or(0) as f64;
    let sign = if below { 1.0 } else { -1.0 };
    let (mut inner, mut outer) = (0.0, 2.0 * max_cost + 1.0);
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut incumbent: Option<(i64, u64, Vec<Choice>)> = None;
    let mut consider = |picks: Vec<Choice>, supply: u64| {
        let cost: i64 = picks.iter().map(|c| c.cost).sum();
        if incumbent.as_ref().is_none_or(|(c, s, _)| (cost, supply) < (*c, *s)) {
            incumbent = Some((cost, supply, picks));
        }
    };
    let (mut inner_picks, mut outer_picks) = (None, None);
    for _ in 0..60 {
        let t = 0.5 * (inner + outer);
        let lambda = sign * t;
        let (value, supply, picks) = relaxed(options, lambda);
        let dual = value + if below { lambda * lo as f64 } else { lambda * hi as f64 };
        if dual > best.0 {
            best = (dual, lambda);
        }
        if (lo..=hi).contains(&supply) {
            consider(picks, supply);
            break;
        }
        if (supply < lo) == below {
            inner = t;
            inner_picks = Some(picks);
        } else {
            outer = t;
            outer_picks = Some(picks);
        }
        if outer - inner < 1e-9 * (1.0 + outer) {
            break;
        }
    }
    // walk from one side of the window to the other, one branch at a time
    if let (Some(mut walk), Some(target)) = (inner_picks, outer_picks) {
        let mut supply: u64 = walk.iter().map(|c| c.supply).sum();
        for b in 0..walk.len() {
            supply = supply - walk[b].supply + target[b].supply;
            walk[b] = target[b];
            if (lo..=hi).contains(&supply) {
                consider(walk.clone(), supply);
                break;
            }
        }
    }
    (best.1, incumbent)
}

#[derive(Clone, Copy)]
struct State {
    supply: u64,
    cost: i64,
    parent: u32,
    option: u32,
}

fn assign_from_options(inst: &Instance, lots: &[LotType], options: &[Vec<Choice>]) -> Result<Assignment, SubsolverError> {
    let nb = options.len();
    let lo = inst.supply_lo();
    let mut suf_min = vec![0u64; nb + 1];
    let mut suf_max = vec![0u64; nb + 1];
    for b in (0..nb).rev() {
        suf_min[b] = suf_min[b + 1] + options[b].iter().map(|c| c.supply).min().expect("options are non-empty");
        suf_max[b] = suf_max[b + 1] + options[b].iter().map(|c| c.supply).max().unwrap();
    }
    let hi = inst.supply_hi().min(suf_max[0]);
    if lo > hi || suf_min[0] > hi {
        return Err(SubsolverError::Infeasible);
    }

    // independent per-branch minima already inside the window
    let greedy: Vec<Choice> = options
        .iter()
        .map(|opts| *opts.iter().min_by_key(|c| (c.cost, c.supply)).unwrap())
        .collect();
    let greedy_supply: u64 = greedy.iter().map(|c| c.supply).sum();
    if (lo..=hi).contains(&greedy_supply) {
        return Ok(build(inst, lots, &greedy));
    }

    // Forward DP over the supply of the branches so far. A state survives
    // only if its exact prefix cost plus a Lagrangian bound on the rest can
    // still reach the best known feasible cost.
    let (lambda, incumbent) = lagrangian(options, lo, hi, greedy_supply < lo);
    let ub = incumbent.as_ref().map(|(c, _, _)| *c);
    let multipliers = [0.0, lambda];
    let mut rest = vec![[0.0f64; 2]; nb + 1];
    for b in (0..nb).rev() {
        for (j, &lam) in multipliers.iter().enumerate() {
            let m = options[b].iter().map(|c| c.cost as f64 - lam * c.supply as f64).fold(f64::INFINITY, f64::min);
            rest[b][j] = rest[b + 1][j] + m;
        }
    }
    let slack = ub.map_or(f64::INFINITY, |u| u as f64 + 1e-6 * (1.0 + (u as f64).abs()));
    let viable = |b: usize, supply: u64, cost: i64| -> bool {
        if supply + suf_min[b] > hi || supply + suf_max[b] < lo {
            return false;
        }
        let t_min = lo.saturating_sub(supply).max(suf_min[b]) as f64;
        let t_max = (hi - supply).min(suf_max[b]) as f64;
        multipliers.iter().enumerate().all(|(j, &lam)| {
            let tail = if lam >= 0.0 { lam * t_min } else { lam * t_max };
            cost as f64 + rest[b][j] + tail <= slack
        })
    };

    let mut layers: Vec<Vec<State>> = Vec::with_capacity(nb + 1);
    layers.push(vec![State { supply: 0, cost: 0, parent: u32::MAX, option: u32::MAX }]);
    let mut slot = vec![u32::MAX; hi as usize + 1];
    for b in 0..nb {
        let prev = &layers[b];
        let mut next: Vec<State> = Vec::new();
        for (pi, st) in prev.iter().enumerate() {
            for (oi, c) in options[b].iter().enumerate() {
                let supply = st.supply + c.supply;
                let cost = st.cost + c.cost;
                if supply > hi || !viable(b + 1, supply, cost) {
                    continue;
                }
                let at = &mut slot[supply as usize];
                if *at == u32::MAX {
                    *at = next.len() as u32;
                    next.push(State { supply, cost, parent: pi as u32, option: oi as u32 });
                } else if cost < next[*at as usize].cost {
                    next[*at as usize] = State { supply, cost, parent: pi as u32, option: oi as u32 };
                }
            }
        }
        for st in &next {
            slot[st.supply as usize] = u32::MAX;
        }
        if next.is_empty() {
            return Err(SubsolverError::Infeasible);
        }
        layers.push(next);
    }
    let last = layers[nb].iter().enumerate().min_by_key(|(_, st)| (st.cost, st.supply)).map(|(i, _)| i).unwrap();
    let mut picks = vec![options[0][0]; nb];
    let mut at = last;
    for b in (0..nb).rev() {
        let st = layers[b + 1][at];
        picks[b] = options[b][st.option as usize];
        at = st.parent as usize;
    }
    Ok(build(inst, lots, &picks))
}

/// `C(n, r)`, saturating.
pub(crate) fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Calls `visit` on every `r`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, r: usize, mut visit: impl FnMut(&[usize])) {
    if r > n {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        visit(&idx);
        let mut i = r;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - r + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Per-branch option costs for a fixed list of lot-types, so that many
/// subsets of it can be evaluated cheaply.
pub(crate) struct OptionTable {
    lots: Vec<LotType>,
    nm: usize,
    options: Vec<Vec<Choice>>,
    fits: Vec<Vec<i64>>,
}

impl OptionTable {
    pub(crate) fn new(inst: &Instance, lots: Vec<LotType>) -> Self {
        let nm = inst.multiplicities().len();
        let options: Vec<Vec<Choice>> = (0..inst.num_branches()).map(|b| branch_options(inst, b, &lots)).collect();
        let fits = options
            .iter()
            .map(|opts| opts.chunks(nm).map(|c| c.iter().map(|o| o.cost).min().unwrap()).collect())
            .collect();
        OptionTable { lots, nm, options, fits }
    }

    /// Supply-relaxed lower bound `sum_b min_{i in idx} fit(b, i)`.
    pub(crate) fn lower_bound(&self, idx: &[usize]) -> i64 {
        self.fits.iter().map(|f| idx.iter().map(|&i| f[i]).min().unwrap_or(i64::MAX / 4)).sum()
    }

    /// [`assign_optimal`] restricted to the lot-types at `idx` (sorted).
    pub(crate) fn assign(&self, inst: &Instance, idx: &[usize]) -> Result<Assignment, SubsolverError> {
        if idx.is_empty() {
            return Err(SubsolverError::EmptySet);
        }
        let nm = self.nm;
        let sub_lots: Vec<LotType> = idx.iter().map(|&i| self.lots[i].clone()).collect();
        let sub_opts: Vec<Vec<Choice>> = self
            .options
            .iter()
            .map(|opts| {
                idx.iter()
                    .enumerate()
                    .flat_map(|(j, &i)| opts[i * nm..(i + 1) * nm].iter().map(move |c| Choice { lot: j, ..*c }))
                    .collect()
            })
            .collect();
        assign_from_options(inst, &sub_lots, &sub_opts)
    }
}

/// Exact optimum over assignments whose lot-types all come from `lbar`
/// (at most `k` of them).
///
/// Only subsets of size `min(k, |lbar|)` are searched: enlarging the
/// allowed set never increases the optimum. Subsets are visited in order of
/// the supply-relaxed bound and pruned against the best cost found.
pub fn solve_restricted(inst: &Instance, lbar: &BTreeSet<LotType>) -> Result<Assignment, SubsolverError> {
    if lbar.is_empty() {
        return Err(SubsolverError::EmptySet);
    }
    let n = lbar.len();
    let r = inst.k().min(n);
    if r == n {
        return assign_optimal(inst, lbar);
    }
    let table = OptionTable::new(inst, lbar.iter().cloned().collect());
    let mut subsets: Vec<(i64, Vec<usize>)> = Vec::with_capacity(binomial(n, r).min(1 << 24) as usize);
    for_each_subset(n, r, |idx| subsets.push((table.lower_bound(idx), idx.to_vec())));
    subsets.sort();

    let mut best: Option<Assignment> = None;
    for (lb, idx) in subsets {
        if let Some(b) = &best {
            if lb >= b.total_cost {
                break;
            }
        }
        match table.assign(inst, &idx) {
            Ok(a) => {
                let better = match &best {
                    None => true,
                    Some(b) => (a.total_cost, a.total_supply) < (b.total_cost, b.total_supply),
                };
                if better {
                    best = Some(a);
                }
            }
            Err(SubsolverError::Infeasible) => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or(SubsolverError::Infeasible)
}

/// Default work budget for [`brute_force_oracle`], in DP cell visits.
pub const ORACLE_BUDGET: u128 = 20_000_000_000;

/// Global optimum by enumerating every lot-type subset of size at most `k`
/// and solving each with [`assign_optimal`]. Reference implementation for
/// small instances only.
pub fn brute_force_oracle(inst: &Instance, budget: u128) -> Result<Assignment, SubsolverError> {
    let cap = 1000;
    let lots: Vec<LotType> = match enumerate_applicable_lot_types(inst.params(), cap) {
        Ok(it) => it.collect(),
        Err(_) => {
            return Err(SubsolverError::Budget { needed: u128::MAX, budget });
        }
    };
    let n = lots.len();
    let subsets: u128 = (1..=inst.k().min(n)).map(|r| binomial(n, r)).fold(0u128, u128::saturating_add);
    let per_subset = (inst.num_branches() as u128)
        .saturating_mul(inst.multiplicities().len() as u128)
        .saturating_mul(inst.k() as u128)
        .saturating_mul(u128::from(inst.supply_hi()) + 1);
    let needed = subsets.saturating_mul(per_subset);
    if needed > budget {
        return Err(SubsolverError::Budget { needed, budget });
    }
    let mut best: Option<Assignment> = None;
    for r in 1..=inst.k().min(n) {
        for_each_subset(n, r, |idx| {
            let set: BTreeSet<LotType> = idx.iter().map(|&i| lots[i].clone()).collect();
            if let Ok(a) = assign_optimal(inst, &set) {
                if best.as_ref().is_none_or(|b| a.total_cost < b.total_cost) {
                    best = Some(a);
                }
            }
        });
    }
    best.ok_or(SubsolverError::Infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_instance, RawDemand, RawInstance, RawLotBounds, RawSupply};

    fn inst(demand: &[&[&str]], mults: &[i64], bounds: (i64, i64, i64, i64), supply: (i64, i64), k: i64) -> Instance {
        let ns = demand[0].len();
        validate_instance(&RawInstance {
            sizes: (0..ns).map(|i| format!("s{i}")).collect(),
            branches: (0..demand.len()).map(|i| format!("b{i}")).collect(),
            demand: demand.iter().map(|r| r.iter().map(|s| RawDemand::Text(s.to_string())).collect()).collect(),
            multiplicities: mults.to_vec(),
            lot_bounds: RawLotBounds { min_c: bounds.0, max_c: bounds.1, min_t: bounds.2, max_t: bounds.3 },
            supply: RawSupply { lo: supply.0, hi: supply.1 },
            k,
        })
        .unwrap()
    }

    fn set(lots: &[&[u32]]) -> BTreeSet<LotType> {
        lots.iter().map(|l| LotType::new(l.to_vec())).collect()
    }

    /// Plain DP over every supply total, for cross-checking.
    fn dense_reference(inst: &Instance, lots: &BTreeSet<LotType>) -> Option<(i64, u64)> {
        let lots: Vec<LotType> = lots.iter().cloned().collect();
        let hi = inst.supply_hi() as usize;
        let mut best: Vec<Option<i64>> = vec![None; hi + 1];
        best[0] = Some(0);
        for b in 0..inst.num_branches() {
            let mut next = vec![None; hi + 1];
            for s in 0..=hi {
                let Some(v) = best[s] else { continue };
                for c in branch_options(inst, b, &lots) {
                    let t = s + c.supply as usize;
                    if t <= hi && next[t].is_none_or(|w| v + c.cost < w) {
                        next[t] = Some(v + c.cost);
                    }
                }
            }
            best = next;
        }
        (inst.supply_lo() as usize..=hi).filter_map(|s| best[s].map(|v| (v, s as u64))).min()
    }

    #[test]
    fn pruned_dp_matches_dense_dp() {
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut next = move |n: u64| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state % n
        };
        for trial in 0..300 {
            let nb = 1 + next(8) as usize;
            let rows: Vec<Vec<String>> =
                (0..nb).map(|_| (0..3).map(|_| format!("{}.{}", next(5), next(10))).collect()).collect();
            let refs: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
            let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
            let lo = next(12 * nb as u64) as i64;
            let hi = lo + next(15) as i64;
            let i = inst(&slices, &[1, 2, 3], (0, 2, 1, 4), (lo, hi), 3);
            let all: Vec<LotType> = enumerate_applicable_lot_types(i.params(), 100).unwrap().collect();
            let lots: BTreeSet<LotType> = (0..1 + next(3)).map(|_| all[next(all.len() as u64) as usize].clone()).collect();
            let got = assign_optimal(&i, &lots).ok().map(|a| {
                assert!(a.violations(&i).iter().all(|v| v.contains("lot-types used")), "trial {trial}");
                (a.total_cost, a.total_supply)
            });
            assert_eq!(got, dense_reference(&i, &lots), "trial {trial}");
        }
    }

    #[test]
    fn single_branch_window_forces_multiplicity() {
        let i = inst(&[&["3", "3", "3", "3"]], &[1, 2], (0, 3, 0, 12), (6, 6), 1);
        let a = assign_optimal(&i, &set(&[&[1, 2, 2, 1]])).unwrap();
        assert_eq!(a.choices, vec![(LotType::new(vec![1, 2, 2, 1]), 1)]);
        assert_eq!(a.total_supply, 6);
    }

    #[test]
    fn slack_window_is_per_branch_argmin() {
        let i = inst(&[&["2", "1"], &["0", "4"]], &[1, 2], (0, 2, 0, 4), (0, 1000), 2);
        let lots = set(&[&[1, 0], &[0, 2], &[1, 1]]);
        let a = assign_optimal(&i, &lots).unwrap();
        let expected: i64 = (0..2)
            .map(|b| lots.iter().flat_map(|l| [1, 2].map(|m| cost(&i, b, l, m))).min().unwrap())
            .sum();
        assert_eq!(a.total_cost, expected);
        assert!(a.violations(&i).is_empty());
    }

    #[test]
    fn empty_window_is_infeasible() {
        let i = inst(&[&["1"]], &[1], (1, 1, 1, 1), (5, 9), 1);
        assert_eq!(assign_optimal(&i, &set(&[&[1]])), Err(SubsolverError::Infeasible));
    }

    #[test]
    fn subset_enumeration_is_lexicographic() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(binomial(33, 5), 237_336);
    }

    #[test]
    fn perfect_fit_has_zero_cost() {
        let i = inst(&[&["2", "4"], &["1", "2"]], &[1, 2], (0, 2, 1, 4), (0, 100), 1);
        let a = brute_force_oracle(&i, ORACLE_BUDGET).unwrap();
        assert_eq!(a.total_cost, 0);
        assert_eq!(a.selected, set(&[&[1, 2]]));
    }

    #[test]
    fn restricted_matches_oracle_over_its_set() {
        let i = inst(&[&["1.5", "0.5"], &["0", "2"], &["2.2", "1"]], &[1, 2], (0, 2, 1, 3), (5, 8), 2);
        let lots: BTreeSet<LotType> = enumerate_applicable_lot_types(i.params(), 100).unwrap().collect();
        let got = solve_restricted(&i, &lots).unwrap();
        let want = brute_force_oracle(&i, ORACLE_BUDGET).unwrap();
        assert_eq!(got.total_cost, want.total_cost);
        assert!(got.violations(&i).is_empty());
    }
}
