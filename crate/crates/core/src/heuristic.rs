//! Starting solution: greedy set growth over a small candidate pool
//! followed by 1-swap local search.

use std::collections::BTreeSet;

use log::debug;
use rayon::prelude::*;

use crate::model::{top_n_lot_types, Instance, LotType};
use crate::subsolver::{Assignment, OptionTable};
use crate::SubsolverError;

/// Lot-type shaped like the aggregate demand, sized for multiplicity `m`.
pub fn profile_lot_type(inst: &Instance, m: u32) -> LotType {
    let p = inst.params();
    let ns = inst.num_sizes();
    let mut totals = vec![0i128; ns];
    for b in 0..inst.num_branches() {
        for (s, &d) in inst.demand(b).iter().enumerate() {
            totals[s] += i128::from(d);
        }
    }
    let sum: i128 = totals.iter().sum();
    let denom = inst.num_branches() as i128 * i128::from(m) * i128::from(inst.scale());
    // natural per-branch lot total, rounded half-up, then clamped
    let natural = (2 * sum + denom) / (2 * denom);
    let target = natural.clamp(i128::from(p.min_t), i128::from(p.max_t));
    let mut entries: Vec<u32> = totals
        .iter()
        .map(|&d| {
            let v = if sum == 0 { 0 } else { (2 * d * target + sum) / (2 * sum) };
            v.clamp(i128::from(p.min_c), i128::from(p.max_c)) as u32
        })
        .collect();
    let mut total: u64 = entries.iter().map(|&v| u64::from(v)).sum();
    while total < u64::from(p.min_t) {
        let s = (0..ns)
            .filter(|&s| entries[s] < p.max_c)
            .max_by_key(|&s| (totals[s], std::cmp::Reverse(s)))
            .expect("bounds admit a lot-type");
        entries[s] += 1;
        total += 1;
    }
    while total > u64::from(p.max_t) {
        let s = (0..ns)
            .filter(|&s| entries[s] > p.min_c)
            .min_by_key(|&s| (totals[s], s))
            .expect("bounds admit a lot-type");
        entries[s] -= 1;
        total -= 1;
    }
    LotType::new(entries)
}

fn candidate_pool(inst: &Instance, per_branch: usize) -> Result<Vec<LotType>, SubsolverError> {
    let mut pool = BTreeSet::new();
    for b in 0..inst.num_branches() {
        for (l, _) in top_n_lot_types(inst, b, per_branch)? {
            pool.insert(l);
        }
    }
    for &m in inst.multiplicities() {
        pool.insert(profile_lot_type(inst, m));
    }
    Ok(pool.into_iter().collect())
}

/// `(feasible, cost-or-bound)`: feasible sets rank before infeasible ones.
type Score = (bool, i64, u64);

fn evaluate(inst: &Instance, table: &OptionTable, idx: &[usize], cutoff: Option<i64>) -> (Score, Option<Assignment>) {
    let lb = table.lower_bound(idx);
    if let Some(c) = cutoff {
        if lb >= c {
            return ((true, i64::MAX, u64::MAX), None);
        }
    }
    match table.assign(inst, idx) {
        Ok(a) => ((false, a.total_cost, a.total_supply), Some(a)),
        Err(_) => ((true, lb, u64::MAX), None),
    }
}

fn sorted_with(set: &[usize], extra: usize) -> Vec<usize> {
    let mut v = set.to_vec();
    v.push(extra);
    v.sort_unstable();
    v
}

fn greedy_and_swap(inst: &Instance, pool: Vec<LotType>) -> Option<Assignment> {
    let n = pool.len();
    let table = OptionTable::new(inst, pool);
    let mut set: Vec<usize> = Vec::new();
    let mut current: Option<Assignment> = None;

    while set.len() < inst.k().min(n) {
        let cutoff = current.as_ref().map(|a| a.total_cost);
        let scored: Vec<(Score, usize, Option<Assignment>)> = (0..n)
            .into_par_iter()
            .filter(|i| !set.contains(i))
            .map(|i| {
                let (score, a) = evaluate(inst, &table, &sorted_with(&set, i), cutoff);
                (score, i, a)
            })
            .collect();
        let Some((score, i, a)) = scored.into_iter().min_by_key(|(s, i, _)| (*s, *i)) else { break };
        if let Some(cur) = &current {
            if score.0 || score.1 >= cur.total_cost {
                break;
            }
        }
        set = sorted_with(&set, i);
        if a.is_some() {
            current = a;
        }
    }
    let mut current = current?;

    // first-improvement 1-swap
    let mut improved = true;
    let mut sweeps = 0;
    while improved && sweeps < 50 {
        improved = false;
        sweeps += 1;
        'outer: for pos in 0..set.len() {
            let rest: Vec<usize> = set.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &v)| v).collect();
            let found = (0..n)
                .into_par_iter()
                .filter(|c| !set.contains(c))
                .filter_map(|c| {
                    let idx = sorted_with(&rest, c);
                    match evaluate(inst, &table, &idx, Some(current.total_cost)) {
                        ((false, cost, _), Some(a)) if cost < current.total_cost => Some((c, idx, a)),
                        _ => None,
                    }
                })
                .min_by_key(|(c, _, _)| *c);
            if let Some((_, idx, a)) = found {
                debug!("swap improves incumbent {} -> {}", current.total_cost, a.total_cost);
                set = idx;
                current = a;
                improved = true;
                break 'outer;
            }
        }
    }
    Some(current)
}

/// A feasible starting assignment. The pool is each branch's three best
/// fitting lot-types plus one aggregate-profile lot-type per multiplicity;
/// if no set from it meets the supply window, it is widened to ten per
/// branch.
pub fn initial_incumbent(inst: &Instance) -> Result<Assignment, SubsolverError> {
    for per_branch in [3, 10] {
        let pool = candidate_pool(inst, per_branch)?;
        debug!("heuristic pool of {} lot-types", pool.len());
        if let Some(a) = greedy_and_swap(inst, pool) {
            return Ok(a);
        }
    }
    Err(SubsolverError::Infeasible)
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

    #[test]
    fn single_lot_type_space() {
        let i = inst(&[&["1", "3"], &["2", "2"]], &[1, 2], (1, 1, 2, 2), (4, 6), 2);
        let a = initial_incumbent(&i).unwrap();
        assert_eq!(a.selected.len(), 1);
        assert!(a.violations(&i).is_empty());
    }

    #[test]
    fn perfect_fit_is_found() {
        let i = inst(&[&["2", "4", "4", "2"], &["1", "2", "2", "1"]], &[1, 2], (0, 3, 4, 8), (0, 100), 1);
        let a = initial_incumbent(&i).unwrap();
        assert_eq!(a.total_cost, 0);
    }

    #[test]
    fn profile_respects_bounds() {
        let i = inst(&[&["10", "0", "0"], &["10", "0", "0"]], &[1], (0, 2, 3, 4), (0, 100), 1);
        let l = profile_lot_type(&i, 1);
        assert!(i.params().contains(&l));
        assert_eq!(l.entries()[0], 2);
    }

    #[test]
    fn infeasible_window_is_reported() {
        let i = inst(&[&["1"]], &[1], (1, 1, 1, 1), (3, 4), 1);
        assert_eq!(initial_incumbent(&i), Err(SubsolverError::Infeasible));
    }
}
