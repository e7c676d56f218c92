//! Reduced costs from named duals and the search for improving columns.
//!
//! For `x_{b,l,m}` the reduced cost is
//! `c_{b,l,m} - alpha_b - m|l| (mu_lo - mu_hi) + beta_{b,l}`. Pool members
//! are priced explicitly. Outside the pool, [`price_new_lot_type`] searches
//! one ordered stream per `(b, m)`, and [`pricing_round`] searches for
//! lot-types whose combined gain over all branches beats `kappa`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lotsearch::LotSearch;
use crate::lotspace::{priced_value, LotCosts, OrderedLotTypes};
use crate::model::{best_multiplicity, cost, Instance, LotType};
use crate::rmp::{multiplicity_window, Action, Duals, Fixings, WorkingSet};

pub const TOL_RC: f64 = 1e-5;
pub const DEFAULT_ACTION_CAP: usize = 200;

/// Whether columns are priced against optimal duals or against the Farkas
/// multipliers of an infeasible RMP (costs then count as zero).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PricingMode {
    Optimality,
    Farkas,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub actions: Vec<Action>,
    pub best_rc: f64,
    /// No column anywhere has reduced cost below `-tol_rc`.
    pub proven_clean: bool,
    /// Improving candidates found before the cap was applied.
    pub candidates: usize,
}

/// Reduced cost of `x_{b,l,m}`; `beta` is the binding-row dual, or 0 when
/// the row does not exist yet.
pub fn reduced_cost_x(duals: &Duals, inst: &Instance, b: usize, lot: &LotType, m: u32, beta: f64) -> f64 {
    reduced_cost_with(duals, b, cost(inst, b, lot, m), m, lot.size(), beta)
}

#[inline]
fn reduced_cost_with(duals: &Duals, b: usize, c: i64, m: u32, total: u64, beta: f64) -> f64 {
    priced_value(c, duals.delta(), m, total) - duals.alpha[b] + beta
}

fn column_cost(inst: &Instance, b: usize, lot: &LotType, m: u32, mode: PricingMode) -> i64 {
    match mode {
        PricingMode::Optimality => cost(inst, b, lot, m),
        PricingMode::Farkas => 0,
    }
}

fn zeta_action(inst: &Instance, b: usize, lot: &LotType, m: u32, fresh: bool) -> Action {
    let mut ms = multiplicity_window(inst, best_multiplicity(inst, b, lot));
    ms.insert(m);
    if fresh {
        Action::NewLotType { branch: b, lot: lot.clone(), ms }
    } else {
        Action::AddZeta { branch: b, lot: lot.clone(), ms }
    }
}

/// Improving columns among pool lot-types: missing multiplicities of
/// admitted pairs (with their `beta`) and pairs not yet admitted (with
/// `beta = 0`).
pub fn price_existing(
    inst: &Instance,
    ws: &WorkingSet,
    duals: &Duals,
    fix: &Fixings,
    mode: PricingMode,
    tol_rc: f64,
) -> Vec<(f64, Action)> {
    (0..inst.num_branches())
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut out = Vec::new();
            for lot in &ws.pool {
                if !fix.lot_allowed(lot) {
                    continue;
                }
                let admitted = ws.zeta[b].get(lot);
                let beta = duals.beta_of(b, lot).unwrap_or(0.0);
                let mut best: Option<(f64, u32)> = None;
                for &m in inst.multiplicities() {
                    if admitted.is_some_and(|ms| ms.contains(&m)) || !fix.allows(b, lot, m) {
                        continue;
                    }
                    let rc = reduced_cost_with(duals, b, column_cost(inst, b, lot, m, mode), m, lot.size(), beta);
                    if rc < -tol_rc {
                        if admitted.is_some() {
                            out.push((rc, Action::EnlargeEta { branch: b, lot: lot.clone(), m }));
                        } else if best.is_none_or(|(r, _)| rc < r) {
                            best = Some((rc, m));
                        }
                    }
                }
                if let Some((rc, m)) = best {
                    out.push((rc, zeta_action(inst, b, lot, m, false)));
                }
            }
            out
        })
        .collect()
}

/// The lot-type minimizing the reduced cost of `x_{b,l,m}` over the whole
/// applicable space, ties broken lexicographically, with that reduced cost.
pub fn price_new_lot_type(inst: &Instance, duals: &Duals, b: usize, m: u32) -> Option<(LotType, f64)> {
    price_new_lot_type_excluding(inst, duals, b, m, PricingMode::Optimality, f64::INFINITY, |_| false)
}

/// Like [`price_new_lot_type`] but skips lot-types for which `excluded`
/// holds, giving up once the reduced cost reaches `stop_at`.
pub fn price_new_lot_type_excluding(
    inst: &Instance,
    duals: &Duals,
    b: usize,
    m: u32,
    mode: PricingMode,
    stop_at: f64,
    excluded: impl Fn(&LotType) -> bool,
) -> Option<(LotType, f64)> {
    let weight = match mode {
        PricingMode::Optimality => 1,
        PricingMode::Farkas => 0,
    };
    let costs = LotCosts::deviation(inst, b, m, weight);
    let mut stream = OrderedLotTypes::priced(inst.params(), costs, duals.delta(), m);
    while let Some((lot, _, value)) = stream.next_priced() {
        let rc = value - duals.alpha[b];
        if rc >= stop_at {
            return None;
        }
        if !excluded(&lot) {
            return Some((lot, rc));
        }
    }
    None
}

/// Lot-types found by the implicit search per round.
const LOTS_PER_ROUND: usize = 64;

/// An improving bundle: one column, or a lot-type with the branches that
/// would take it.
struct Group {
    violation: f64,
    actions: Vec<Action>,
}

/// Per-branch gains `-rc0_b(l)` (positive only) for branches that have not
/// admitted `lot`, with the best multiplicity of each.
fn branch_gains(
    inst: &Instance,
    ws: &WorkingSet,
    duals: &Duals,
    fix: &Fixings,
    mode: PricingMode,
    lot: &LotType,
    branches: impl Iterator<Item = usize>,
) -> Vec<(usize, u32, f64)> {
    let mut out = Vec::new();
    for b in branches {
        if ws.zeta[b].contains_key(lot) {
            continue;
        }
        let mut best: Option<(f64, u32)> = None;
        for &m in inst.multiplicities() {
            if !fix.allows(b, lot, m) {
                continue;
            }
            let rc = reduced_cost_with(duals, b, column_cost(inst, b, lot, m, mode), m, lot.size(), 0.0);
            if best.is_none_or(|(r, _)| rc < r) {
                best = Some((rc, m));
            }
        }
        if let Some((rc, m)) = best.filter(|&(rc, _)| rc < 0.0) {
            out.push((b, m, -rc));
        }
    }
    out
}

fn lot_group(inst: &Instance, lot: &LotType, slack: f64, gains: &[(usize, u32, f64)], fresh: bool, tol_rc: f64) -> Option<Group> {
    let total: f64 = gains.iter().map(|g| g.2).sum();
    let violation = slack - total;
    if violation >= -tol_rc {
        return None;
    }
    let actions = gains
        .iter()
        .filter(|g| g.2 > tol_rc)
        .map(|&(b, m, _)| zeta_action(inst, b, lot, m, fresh))
        .collect::<Vec<_>>();
    (!actions.is_empty()).then_some(Group { violation, actions })
}

/// One pricing pass over all of `B x L x M`.
///
/// The RMP duals extend to the complete formulation by giving each absent
/// binding row `(b, l)` the dual `max(0, -rc0_b(l))`; that extension is
/// feasible unless some admitted column prices out negative or some
/// lot-type's gains exceed the reduced cost of its `y` column. Those two
/// cases are the improving bundles. The action list is capped at `cap`
/// (whole bundles, most violated first); `proven_clean` reflects the full
/// scan.
pub fn pricing_round(
    inst: &Instance,
    ws: &WorkingSet,
    duals: &Duals,
    fix: &Fixings,
    mode: PricingMode,
    tol_rc: f64,
    cap: usize,
) -> PricingResult {
    let mut groups: Vec<Group> = price_existing(inst, ws, duals, fix, mode, tol_rc)
        .into_iter()
        .filter(|(_, a)| matches!(a, Action::EnlargeEta { .. }))
        .map(|(rc, a)| Group { violation: rc, actions: vec![a] })
        .collect();

    // reduced cost of y_l for pool members
    let mut beta_sum: BTreeMap<&LotType, f64> = BTreeMap::new();
    for ((_, l), v) in &duals.beta {
        *beta_sum.entry(l).or_default() += v;
    }
    let y_slack = |lot: &LotType| {
        let cuts: f64 = ws.cuts.iter().zip(&duals.gamma).filter(|(c, _)| c.contains(lot)).map(|(_, g)| g).sum();
        duals.kappa - beta_sum.get(lot).copied().unwrap_or(0.0) + cuts - duals.rho.get(lot).copied().unwrap_or(0.0)
    };
    let pool: Vec<&LotType> = ws.pool.iter().filter(|l| fix.lot_allowed(l)).collect();
    let pooled: Vec<Group> = pool
        .par_iter()
        .filter_map(|&lot| {
            let gains = branch_gains(inst, ws, duals, fix, mode, lot, 0..inst.num_branches());
            lot_group(inst, lot, y_slack(lot), &gains, false, tol_rc)
        })
        .collect();
    groups.extend(pooled);

    let open: Vec<usize> = (0..inst.num_branches()).filter(|&b| fix.pinned(b).is_none()).collect();
    let weight = match mode {
        PricingMode::Optimality => 1,
        PricingMode::Farkas => 0,
    };
    let skip = |l: &LotType| ws.pool.contains(l);
    let search = LotSearch::new(inst, &duals.alpha, duals.delta(), weight, open.clone(), &skip);
    for found in search.top(duals.kappa + tol_rc, LOTS_PER_ROUND) {
        let gains = branch_gains(inst, ws, duals, fix, mode, &found.lot, open.iter().copied());
        groups.extend(lot_group(inst, &found.lot, duals.kappa, &gains, true, tol_rc));
    }

    groups.sort_by(|a, b| a.violation.total_cmp(&b.violation).then_with(|| a.actions.cmp(&b.actions)));
    let candidates = groups.len();
    let best_rc = groups.first().map_or(0.0, |g| g.violation);
    let mut actions = Vec::new();
    for g in groups {
        if actions.len() >= cap {
            break;
        }
        actions.extend(g.actions);
    }
    PricingResult { proven_clean: candidates == 0, best_rc, candidates, actions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_instance, RawDemand, RawInstance, RawLotBounds, RawSupply};

    fn inst(demand: &[&[&str]], mults: &[i64], bounds: (i64, i64, i64, i64)) -> Instance {
        let ns = demand[0].len();
        validate_instance(&RawInstance {
            sizes: (0..ns).map(|i| format!("s{i}")).collect(),
            branches: (0..demand.len()).map(|i| format!("b{i}")).collect(),
            demand: demand.iter().map(|r| r.iter().map(|s| RawDemand::Text(s.to_string())).collect()).collect(),
            multiplicities: mults.to_vec(),
            lot_bounds: RawLotBounds { min_c: bounds.0, max_c: bounds.1, min_t: bounds.2, max_t: bounds.3 },
            supply: RawSupply { lo: 0, hi: 1000 },
            k: 1,
        })
        .unwrap()
    }

    fn duals(nb: usize, alpha: f64, delta: f64) -> Duals {
        Duals {
            alpha: vec![alpha; nb],
            mu_lo: delta.max(0.0),
            mu_hi: (-delta).max(0.0),
            ..Default::default()
        }
    }

    #[test]
    fn zero_duals_give_raw_cost() {
        let i = inst(&[&["1.1", "2.0", "1.8", "0.9"]], &[1], (0, 3, 0, 12));
        let l = LotType::new(vec![1, 2, 2, 1]);
        assert_eq!(reduced_cost_x(&duals(1, 0.0, 0.0), &i, 0, &l, 1, 0.0), 4.0);
    }

    #[test]
    fn exact_fit_is_found_at_zero_delta() {
        let i = inst(&[&["2", "4", "4", "2"]], &[1, 2], (0, 3, 0, 12));
        let (l, rc) = price_new_lot_type(&i, &duals(1, 7.0, 0.0), 0, 2).unwrap();
        assert_eq!(l, LotType::new(vec![1, 2, 2, 1]));
        assert_eq!(rc, -7.0);
    }

    #[test]
    fn large_delta_saturates() {
        let i = inst(&[&["0", "0", "0"]], &[1], (0, 5, 0, 12));
        let (l, _) = price_new_lot_type(&i, &duals(1, 0.0, 1e6), 0, 1).unwrap();
        assert_eq!(l.size(), 12);
        assert_eq!(l, LotType::new(vec![2, 5, 5]));
    }

    #[test]
    fn cap_zero_keeps_the_clean_flag_honest() {
        let i = inst(&[&["2", "4"]], &[1, 2], (0, 3, 1, 6));
        let ws = WorkingSet { zeta: vec![BTreeMap::new()], ..Default::default() };
        let r = pricing_round(&i, &ws, &duals(1, 5.0, 0.0), &Fixings::default(), PricingMode::Optimality, TOL_RC, 0);
        assert!(r.actions.is_empty());
        assert!(!r.proven_clean);
        assert!(r.best_rc < 0.0);
    }
}
