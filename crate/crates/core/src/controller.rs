//! The solve loop: heuristic start, restricted master, dives on the
//! fractional support with cover cuts, and column/row generation until the
//! bound meets the incumbent.
//!
//! When pricing is exhausted, the bound is still below the incumbent and no
//! new dive is available, the loop branches (on `y_l`, then on
//! `sum_m x_{b,l,m}`, then on single columns) and explores the children
//! depth first. Cover cuts, dives and the working set are shared by all
//! nodes. A final pass re-prices every leaf against the final working set,
//! so the certificate can be replayed from stored data alone.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use log::{debug, info, trace};
use serde::{Deserialize, Serialize};

use crate::heuristic::initial_incumbent;
use crate::lp::{LpOptions, TOL_GAP};
use crate::model::{Instance, LotType};
use crate::pricing::{pricing_round, PricingMode, DEFAULT_ACTION_CAP, TOL_RC};
use crate::rmp::{
    apply_actions, build_rmp, fractional_support, incumbent_basis, initialize_working_set, solve_rmp, solve_rmp_with, Action, Fixings,
    RmpOutcome, RmpSolution, WarmBasis, WorkingSet,
};
use crate::subsolver::{binomial, solve_restricted, Assignment};
use crate::{SolveError, SubsolverError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Threshold on `y_l` defining the dive set.
    pub eps: f64,
    pub tol_rc: f64,
    pub max_rounds: usize,
    pub action_cap: usize,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub max_nodes: usize,
    /// Largest number of subsets a dive may enumerate.
    pub dive_subset_limit: u128,
    /// Only used by the instance generator; the solve is deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps: 0.15,
            tol_rc: TOL_RC,
            max_rounds: 1_000_000,
            action_cap: DEFAULT_ACTION_CAP,
            time_limit: None,
            max_nodes: 100_000,
            dive_subset_limit: 2_000_000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(SolveError::Config(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.tol_rc > 0.0 && self.tol_rc.is_finite()) {
            return Err(SolveError::Config(format!("tol_rc must be positive, got {}", self.tol_rc)));
        }
        if let Some(t) = self.time_limit {
            if !(t >= 0.0) {
                return Err(SolveError::Config(format!("time limit must be non-negative, got {t}")));
            }
        }
        if self.max_nodes == 0 {
            return Err(SolveError::Config("max_nodes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conclusion {
    ProvenOptimal,
    ProvenInfeasible,
    /// Search finished but some leaf could not be re-certified.
    BoundOnly { gap: f64 },
    LimitReached { reason: String, gap: Option<f64> },
}

impl Conclusion {
    pub fn is_proven(&self) -> bool {
        matches!(self, Conclusion::ProvenOptimal | Conclusion::ProvenInfeasible)
    }
}

/// A branching decision; the "on" child enforces it, the "off" child its
/// negation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    /// `y_l >= 1` / `y_l = 0`.
    Lot(LotType),
    /// Branch `b` uses `l` / does not.
    Pair(usize, LotType),
    /// Branch `b` uses `(l, m)` / does not.
    Column(usize, LotType, u32),
}

impl Decision {
    fn apply(&self, fix: &Fixings, on: bool) -> Fixings {
        let mut f = fix.clone();
        match (self, on) {
            (Decision::Lot(l), true) => {
                f.lot_on.insert(l.clone());
            }
            (Decision::Lot(l), false) => {
                f.lot_off.insert(l.clone());
            }
            (Decision::Pair(b, l), true) => {
                f.pair_on.insert(*b, l.clone());
            }
            (Decision::Pair(b, l), false) => {
                f.pair_off.insert((*b, l.clone()));
            }
            (Decision::Column(b, l, m), true) => {
                f.col_on.insert(*b, (l.clone(), *m));
            }
            (Decision::Column(b, l, m), false) => {
                f.col_off.insert((*b, l.clone(), *m));
            }
        }
        f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    /// Restricted LP priced out with a bound at or above the incumbent.
    Bound,
    /// Restricted LP empty with Farkas pricing exhausted.
    Infeasible,
    /// `k` lot-types fixed on: the node was solved exactly by a dive.
    Covered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum NodeState {
    Branch { decision: Decision, on: usize, off: usize },
    Leaf {
        kind: LeafKind,
        bound: Option<f64>,
        /// Final RMP basis of an LP leaf; a starting point for replays.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        basis: Option<WarmBasis>,
    },
    Open { bound: Option<f64> },
}

/// An exactly solved restricted problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiveRecord {
    pub set: Vec<LotType>,
    /// `None` when no assignment over the set meets the supply window.
    pub cost: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub incumbent_cost: Option<i64>,
    pub lower_bound: f64,
    pub proven_clean: bool,
    /// One record per cover cut, in the order of `working_set.cuts`.
    pub cuts: Vec<DiveRecord>,
    /// Dives on sets too small for a cut.
    pub small_dives: Vec<DiveRecord>,
    pub working_set: WorkingSet,
    /// Search tree, root first.
    pub tree: Vec<NodeState>,
    pub conclusion: Conclusion,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub pricing_rounds: usize,
    pub cover_cuts: usize,
    pub dives: usize,
    pub nodes: usize,
    pub columns_added: usize,
    pub lp_iterations: usize,
    pub initial_variables: usize,
    pub initial_constraints: usize,
    pub final_variables: usize,
    pub final_constraints: usize,
    pub pool_size: usize,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub assignment: Option<Assignment>,
    pub certificate: Certificate,
    pub counters: Counters,
    pub config: SolverConfig,
}

/// `ceil(bound - tol) >= incumbent`: all integral costs are integers.
fn bound_closes(bound: f64, incumbent: Option<i64>) -> bool {
    match incumbent {
        Some(c) => (bound - TOL_GAP * (1.0 + bound.abs())).ceil() >= c as f64,
        None => false,
    }
}

fn bounds_agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL_GAP * (1.0 + a.abs().max(b.abs()))
}

const INT_TOL: f64 = 1e-6;

struct Search<'a> {
    inst: &'a Instance,
    cfg: &'a SolverConfig,
    start: Instant,
    deadline: Option<Instant>,
    ws: WorkingSet,
    incumbent: Option<Assignment>,
    cuts: Vec<DiveRecord>,
    small_dives: Vec<DiveRecord>,
    explored: Vec<BTreeSet<LotType>>,
    tree: Vec<NodeState>,
    counters: Counters,
    limit: Option<String>,
    /// Start basis of the last infeasible RMP solve. Re-solving from it
    /// reproduces the same Farkas ray, so infeasible leaves store it.
    infeasible_start: Option<WarmBasis>,
}

enum NodeResult {
    Leaf(LeafKind, Option<f64>),
    Branch(Decision, Option<WarmBasis>, f64),
    Stopped(Option<f64>),
}

enum LeafEval {
    Bound(f64),
    Infeasible,
}

impl<'a> Search<'a> {
    fn incumbent_cost(&self) -> Option<i64> {
        self.incumbent.as_ref().map(|a| a.total_cost)
    }

    fn check_limits(&mut self) -> bool {
        if self.limit.is_some() {
            return true;
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.limit = Some("time limit".into());
        } else if self.counters.pricing_rounds >= self.cfg.max_rounds {
            self.limit = Some("round limit".into());
        } else if self.tree.len() > self.cfg.max_nodes {
            self.limit = Some("node limit".into());
        }
        self.limit.is_some()
    }

    fn offer(&mut self, a: Assignment) {
        if self.incumbent.as_ref().is_none_or(|inc| a.total_cost < inc.total_cost) {
            info!("new incumbent {}", a.total_cost);
            self.incumbent = Some(a);
        }
    }

    fn is_explored(&self, set: &BTreeSet<LotType>) -> bool {
        self.explored.iter().any(|e| set.is_subset(e))
    }

    /// Solves the problem restricted to `set`, records it and adds its cover
    /// cut when `|set| >= k`. Returns false if the set is too large.
    fn dive(&mut self, set: BTreeSet<LotType>) -> Result<bool, SolveError> {
        let r = self.inst.k().min(set.len());
        if binomial(set.len(), r) > self.cfg.dive_subset_limit {
            return Ok(false);
        }
        self.counters.dives += 1;
        let cost = match solve_restricted(self.inst, &set) {
            Ok(a) => {
                let c = a.total_cost;
                self.offer(a);
                Some(c)
            }
            Err(SubsolverError::Infeasible) => None,
            Err(e) => return Err(e.into()),
        };
        debug!("dive on {} lot-types: {:?}", set.len(), cost);
        let record = DiveRecord { set: set.iter().cloned().collect(), cost };
        if set.len() >= self.inst.k() {
            apply_actions(self.inst, &mut self.ws, &[Action::AddCut(set.clone())])?;
            self.cuts.push(record);
            self.counters.cover_cuts += 1;
        } else {
            self.small_dives.push(record);
        }
        self.explored.push(set);
        Ok(true)
    }

    fn apply(&mut self, actions: &[Action]) -> Result<(), SolveError> {
        let before = self.ws.num_x_columns();
        apply_actions(self.inst, &mut self.ws, actions)?;
        self.counters.columns_added += self.ws.num_x_columns() - before;
        Ok(())
    }

    fn price(&mut self, duals: &crate::rmp::Duals, fix: &Fixings, mode: PricingMode) -> Result<bool, SolveError> {
        self.counters.pricing_rounds += 1;
        let t = Instant::now();
        let r = pricing_round(self.inst, &self.ws, duals, fix, mode, self.cfg.tol_rc, self.cfg.action_cap);
        trace!("pricing took {:.2?}", t.elapsed());
        if r.proven_clean {
            return Ok(true);
        }
        debug!("pricing: {} candidates, best rc {:e}", r.candidates, r.best_rc);
        self.apply(&r.actions)?;
        Ok(false)
    }

    /// Solves the node RMP; `None` when the time limit ran out mid-solve.
    fn solve_node_lp(
        &mut self,
        fix: &Fixings,
        warm: &mut Option<WarmBasis>,
    ) -> Result<Option<RmpOutcome>, SolveError> {
        let t = Instant::now();
        let start = warm.clone();
        let opts = LpOptions { deadline: self.deadline, ..Default::default() };
        let solved = solve_rmp_with(self.inst, &self.ws, fix, warm.as_ref(), &opts)
            .or_else(|_| solve_rmp_with(self.inst, &self.ws, fix, None, &opts));
        let s = match solved {
            Ok(s) => s,
            Err(_) if self.check_limits() => return Ok(None),
            Err(e) => return Err(SolveError::Numerical(e.to_string())),
        };
        trace!("rmp solve took {:.2?}, {} iterations", t.elapsed(), s.iterations);
        self.counters.lp_iterations += s.iterations;
        self.counters.final_variables = s.num_columns;
        self.counters.final_constraints = s.num_rows;
        if matches!(s.outcome, RmpOutcome::Infeasible(_)) {
            self.infeasible_start = start;
        }
        if s.basis.is_some() {
            *warm = s.basis;
        }
        Ok(Some(s.outcome))
    }

    fn process(&mut self, fix: &Fixings, warm: &mut Option<WarmBasis>) -> Result<NodeResult, SolveError> {
        let mut last_bound = None;
        loop {
            if self.check_limits() {
                return Ok(NodeResult::Stopped(last_bound));
            }
            if fix.lot_on.len() >= self.inst.k() {
                let set = fix.lot_on.clone();
                let cost = match solve_restricted(self.inst, &set) {
                    Ok(a) => {
                        let c = a.total_cost;
                        self.offer(a);
                        Some(c as f64)
                    }
                    Err(SubsolverError::Infeasible) => None,
                    Err(e) => return Err(e.into()),
                };
                return Ok(NodeResult::Leaf(LeafKind::Covered, cost));
            }
            let Some(outcome) = self.solve_node_lp(fix, warm)? else {
                return Ok(NodeResult::Stopped(last_bound));
            };
            let sol = match outcome {
                RmpOutcome::Infeasible(farkas) => {
                    if self.price(&farkas, fix, PricingMode::Farkas)? {
                        *warm = self.infeasible_start.take();
                        return Ok(NodeResult::Leaf(LeafKind::Infeasible, None));
                    }
                    continue;
                }
                RmpOutcome::Optimal(sol) => sol,
            };
            let bound = sol.objective;
            debug!(
                "rmp bound {bound:.4}, {} lot-types with y > 0, max y {:.3}",
                sol.y.values().filter(|&&v| v > 1e-9).count(),
                sol.y.values().fold(0.0f64, |a, &v| a.max(v))
            );
            if bound_closes(bound, self.incumbent_cost()) {
                if self.price(&sol.duals, fix, PricingMode::Optimality)? {
                    return Ok(NodeResult::Leaf(LeafKind::Bound, Some(bound)));
                }
                continue;
            }
            let lbar: BTreeSet<LotType> =
                fractional_support(&sol, self.cfg.eps).into_iter().filter(|l| fix.lot_allowed(l)).collect();
            if !lbar.is_empty() && !self.is_explored(&lbar) && self.dive(lbar)? {
                continue;
            }
            if !self.price(&sol.duals, fix, PricingMode::Optimality)? {
                continue;
            }
            // priced out, bound below the incumbent; only now is it a valid bound
            last_bound = Some(bound);
            let support = positive_support(&sol);
            if !support.is_empty() && !self.is_explored(&support) && self.dive(support)? {
                continue;
            }
            if let Some(a) = integral_assignment(self.inst, &sol) {
                if self.incumbent_cost().is_none_or(|c| a.total_cost < c) {
                    self.offer(a);
                    continue;
                }
            }
            match choose_branch(&sol, fix) {
                Some(d) => return Ok(NodeResult::Branch(d, warm.clone(), bound)),
                None => {
                    return Err(SolveError::Numerical(format!(
                        "no branching candidate at bound {bound} (incumbent {:?})",
                        self.incumbent_cost()
                    )))
                }
            }
        }
    }

    fn search(&mut self) -> Result<(), SolveError> {
        self.tree.push(NodeState::Open { bound: None });
        let crash = self.incumbent.as_ref().and_then(|a| incumbent_basis(self.inst, &self.ws, a).ok());
        let mut stack: Vec<(usize, Fixings, Option<WarmBasis>)> = vec![(0, Fixings::default(), crash)];
        while let Some((id, fix, mut warm)) = stack.pop() {
            match self.process(&fix, &mut warm)? {
                NodeResult::Leaf(kind, bound) => {
                    let basis = if kind == LeafKind::Covered { None } else { warm };
                    self.tree[id] = NodeState::Leaf { kind, bound, basis }
                }
                NodeResult::Stopped(bound) => {
                    if let NodeState::Open { bound: b } = &mut self.tree[id] {
                        *b = bound.or(*b);
                    }
                    break;
                }
                NodeResult::Branch(decision, basis, bound) => {
                    let on = self.tree.len();
                    let off = on + 1;
                    self.tree.push(NodeState::Open { bound: Some(bound) });
                    self.tree.push(NodeState::Open { bound: Some(bound) });
                    debug!("node {id}: branch on {decision:?}");
                    stack.push((off, decision.apply(&fix, false), basis.clone()));
                    stack.push((on, decision.apply(&fix, true), basis));
                    self.tree[id] = NodeState::Branch { decision, on, off };
                }
            }
        }
        self.counters.nodes = self.tree.len();
        Ok(())
    }

    /// Column generation at a leaf against the current working set.
    fn certify_leaf(&mut self, fix: &Fixings, warm: &mut Option<WarmBasis>) -> Result<Option<LeafEval>, SolveError> {
        loop {
            if self.check_limits() {
                return Ok(None);
            }
            let Some(outcome) = self.solve_node_lp(fix, warm)? else { return Ok(None) };
            match outcome {
                RmpOutcome::Infeasible(farkas) => {
                    if self.price(&farkas, fix, PricingMode::Farkas)? {
                        *warm = self.infeasible_start.take();
                        return Ok(Some(LeafEval::Infeasible));
                    }
                }
                RmpOutcome::Optimal(sol) => {
                    if self.price(&sol.duals, fix, PricingMode::Optimality)? {
                        return Ok(Some(LeafEval::Bound(sol.objective)));
                    }
                }
            }
        }
    }

    /// Re-prices every LP leaf until a full pass leaves the working set
    /// unchanged; returns whether every leaf still closes.
    fn certify(&mut self) -> Result<bool, SolveError> {
        let leaves: Vec<(usize, Fixings)> = leaf_fixings(&self.tree)
            .map_err(SolveError::Numerical)?
            .into_iter()
            .filter(|(id, _)| matches!(self.tree[*id], NodeState::Leaf { kind: LeafKind::Bound | LeafKind::Infeasible, .. }))
            .collect();
        for pass in 0..50 {
            let before = (self.ws.pool.len(), self.ws.num_x_columns(), self.ws.num_pairs());
            let mut all_close = true;
            for (id, fix) in &leaves {
                let mut basis = match &mut self.tree[*id] {
                    NodeState::Leaf { basis, .. } => basis.take(),
                    _ => None,
                };
                let Some(eval) = self.certify_leaf(fix, &mut basis)? else { return Ok(false) };
                self.tree[*id] = match eval {
                    LeafEval::Bound(b) => {
                        all_close &= bound_closes(b, self.incumbent_cost());
                        NodeState::Leaf { kind: LeafKind::Bound, bound: Some(b), basis }
                    }
                    LeafEval::Infeasible => NodeState::Leaf { kind: LeafKind::Infeasible, bound: None, basis },
                };
            }
            let after = (self.ws.pool.len(), self.ws.num_x_columns(), self.ws.num_pairs());
            if before == after {
                debug!("certification settled after {} passes", pass + 1);
                return Ok(all_close);
            }
        }
        Ok(false)
    }
}

/// Lot-types carrying any `x` or `y` weight.
fn positive_support(sol: &RmpSolution) -> BTreeSet<LotType> {
    let mut s: BTreeSet<LotType> = sol.y.iter().filter(|(_, &v)| v > INT_TOL).map(|(l, _)| l.clone()).collect();
    s.extend(sol.x.iter().filter(|(_, &v)| v > INT_TOL).map(|((_, l, _), _)| l.clone()));
    s
}

/// The assignment encoded by an integral `x`, if it is one and is feasible.
fn integral_assignment(inst: &Instance, sol: &RmpSolution) -> Option<Assignment> {
    let mut choices: Vec<Option<(LotType, u32)>> = vec![None; inst.num_branches()];
    for ((b, l, m), &v) in &sol.x {
        if v >= 1.0 - INT_TOL {
            choices[*b] = Some((l.clone(), *m));
        } else if v > INT_TOL {
            return None;
        }
    }
    let choices: Option<Vec<_>> = choices.into_iter().collect();
    let a = Assignment::from_choices(inst, choices?);
    a.violations(inst).is_empty().then_some(a)
}

fn fractionality(v: f64) -> f64 {
    let f = v.min(1.0);
    f.min(1.0 - f)
}

/// Most fractional `y_l` among used lot-types, then `u_{b,l}`, then `x`.
fn choose_branch(sol: &RmpSolution, fix: &Fixings) -> Option<Decision> {
    let pairs = sol.pair_values();
    let used: BTreeSet<&LotType> = pairs.iter().filter(|(_, &v)| v > INT_TOL).map(|((_, l), _)| l).collect();
    let pick = |cands: Vec<(f64, Decision)>| -> Option<Decision> {
        cands
            .into_iter()
            .filter(|(f, _)| *f > INT_TOL)
            .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| format!("{:?}", b.1).cmp(&format!("{:?}", a.1))))
            .map(|(_, d)| d)
    };
    let ys = sol
        .y
        .iter()
        .filter(|(l, _)| used.contains(l) && !fix.lot_on.contains(*l))
        .map(|(l, &v)| (fractionality(v), Decision::Lot(l.clone())))
        .collect();
    if let Some(d) = pick(ys) {
        return Some(d);
    }
    let us = pairs
        .iter()
        .filter(|((b, _), _)| !fix.pair_on.contains_key(b) && !fix.col_on.contains_key(b))
        .map(|((b, l), &v)| (fractionality(v), Decision::Pair(*b, l.clone())))
        .collect();
    if let Some(d) = pick(us) {
        return Some(d);
    }
    let xs = sol
        .x
        .iter()
        .filter(|((b, _, _), _)| !fix.col_on.contains_key(b))
        .map(|((b, l, m), &v)| (fractionality(v), Decision::Column(*b, l.clone(), *m)))
        .collect();
    pick(xs)
}

/// Fixings of every leaf, or an error for a malformed tree.
pub fn leaf_fixings(tree: &[NodeState]) -> Result<Vec<(usize, Fixings)>, String> {
    if tree.is_empty() {
        return Err("empty search tree".into());
    }
    let mut seen = vec![false; tree.len()];
    let mut out = Vec::new();
    let mut stack = vec![(0usize, Fixings::default())];
    while let Some((id, fix)) = stack.pop() {
        if id >= tree.len() || seen[id] {
            return Err(format!("search tree references node {id} twice or out of range"));
        }
        seen[id] = true;
        match &tree[id] {
            NodeState::Branch { decision, on, off } => {
                stack.push((*off, decision.apply(&fix, false)));
                stack.push((*on, decision.apply(&fix, true)));
            }
            _ => out.push((id, fix)),
        }
    }
    if seen.iter().any(|s| !s) {
        return Err("search tree has unreachable nodes".into());
    }
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}

fn tree_lower_bound(tree: &[NodeState], incumbent: Option<i64>) -> f64 {
    let mut lb: Option<f64> = None;
    let mut take = |v: f64| lb = Some(lb.map_or(v, |x: f64| x.min(v)));
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        match &tree[id] {
            NodeState::Branch { on, off, .. } => {
                stack.push(*on);
                stack.push(*off);
            }
            NodeState::Leaf { bound: Some(b), .. } => take(*b),
            NodeState::Leaf { bound: None, .. } => {}
            NodeState::Open { bound } => take(bound.unwrap_or(0.0).max(0.0)),
        }
    }
    match (lb, incumbent) {
        (Some(b), Some(c)) => b.min(c as f64).max(0.0),
        (Some(b), None) => b.max(0.0),
        (None, Some(c)) => c as f64,
        (None, None) => 0.0,
    }
}

/// Runs the full method on `inst`.
pub fn solve(inst: &Instance, config: &SolverConfig) -> Result<SolveReport, SolveError> {
    config.validate()?;
    let start = Instant::now();
    let deadline = config.time_limit.map(|t| start + Duration::from_secs_f64(t));

    let incumbent = match initial_incumbent(inst) {
        Ok(a) => Some(a),
        Err(SubsolverError::Infeasible) => None,
        Err(e) => return Err(e.into()),
    };
    info!("heuristic incumbent: {:?}", incumbent.as_ref().map(|a| a.total_cost));
    let ws = initialize_working_set(inst, incumbent.as_ref())?;
    let initial = build_rmp(inst, &ws)?;

    let mut search = Search {
        inst,
        cfg: config,
        start,
        deadline,
        ws,
        incumbent,
        cuts: Vec::new(),
        small_dives: Vec::new(),
        explored: Vec::new(),
        tree: Vec::new(),
        counters: Counters {
            initial_variables: initial.lp.num_cols(),
            initial_constraints: initial.lp.num_rows(),
            final_variables: initial.lp.num_cols(),
            final_constraints: initial.lp.num_rows(),
            ..Default::default()
        },
        limit: None,
        infeasible_start: None,
    };
    search.search()?;

    let finished = search.limit.is_none() && search.tree.iter().all(|n| !matches!(n, NodeState::Open { .. }));
    let certified = finished && search.certify()?;
    let inc_cost = search.incumbent_cost();
    let lower_bound = tree_lower_bound(&search.tree, inc_cost);
    let gap = inc_cost.map(|c| (c as f64 - lower_bound).max(0.0));
    let conclusion = if let Some(reason) = search.limit.clone() {
        Conclusion::LimitReached { reason, gap }
    } else if !certified {
        Conclusion::BoundOnly { gap: gap.unwrap_or(f64::MAX) }
    } else if inc_cost.is_some() {
        Conclusion::ProvenOptimal
    } else {
        Conclusion::ProvenInfeasible
    };
    info!("conclusion {conclusion:?}, incumbent {inc_cost:?}, bound {lower_bound}");

    let mut counters = search.counters.clone();
    counters.pool_size = search.ws.pool.len();
    counters.wall_seconds = search.start.elapsed().as_secs_f64();
    let certificate = Certificate {
        incumbent_cost: inc_cost,
        lower_bound,
        proven_clean: certified,
        cuts: search.cuts,
        small_dives: search.small_dives,
        working_set: search.ws,
        tree: search.tree,
        conclusion,
    };
    Ok(SolveReport { assignment: search.incumbent, certificate, counters, config: config.clone() })
}

/// Outcome of [`verify_certificate`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub reasons: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.reasons.is_empty()
    }
}

/// Replays a report: the assignment and its cost, every dive, the cut list
/// against the working set, and for proven conclusions every leaf of the
/// search tree (re-solved, re-priced and bound-tested).
pub fn verify_certificate(inst: &Instance, report: &SolveReport) -> Verification {
    let mut reasons = Vec::new();
    let cert = &report.certificate;
    let inc = cert.incumbent_cost;

    match (&report.assignment, inc) {
        (Some(a), Some(c)) => {
            for v in a.violations(inst) {
                reasons.push(format!("assignment: {v}"));
            }
            if a.total_cost != c {
                reasons.push(format!("cost mismatch: assignment {} vs certificate {c}", a.total_cost));
            }
        }
        (None, None) => {}
        _ => reasons.push("cost mismatch: assignment and certificate disagree on existence".into()),
    }

    let ws = &cert.working_set;
    for v in ws.violations(inst) {
        reasons.push(format!("working set: {v}"));
    }
    let recorded: Vec<BTreeSet<LotType>> = cert.cuts.iter().map(|d| d.set.iter().cloned().collect()).collect();
    if recorded != ws.cuts {
        reasons.push("unexplored support: cover cuts without matching dive records".into());
    }
    for d in cert.cuts.iter().chain(&cert.small_dives) {
        let set: BTreeSet<LotType> = d.set.iter().cloned().collect();
        let replay = match solve_restricted(inst, &set) {
            Ok(a) => Some(a.total_cost),
            Err(SubsolverError::Infeasible) => None,
            Err(e) => {
                reasons.push(format!("dive replay failed: {e}"));
                continue;
            }
        };
        if replay != d.cost {
            reasons.push(format!("dive mismatch: recorded {:?}, replayed {replay:?}", d.cost));
        }
        if let (Some(c), Some(i)) = (replay, inc) {
            if c < i {
                reasons.push(format!("dive found {c}, below the incumbent {i}"));
            }
        }
    }

    if cert.conclusion.is_proven() {
        if matches!(cert.conclusion, Conclusion::ProvenInfeasible) && inc.is_some() {
            reasons.push("infeasibility claimed with an incumbent".into());
        }
        match leaf_fixings(&cert.tree) {
            Err(e) => reasons.push(e),
            Ok(leaves) => {
                for (id, fix) in leaves {
                    verify_leaf(inst, ws, &cert.tree[id], &fix, inc, report.config.tol_rc, &mut reasons);
                }
                let lb = tree_lower_bound(&cert.tree, inc);
                if !bounds_agree(lb, cert.lower_bound) {
                    reasons.push(format!("bound mismatch: certificate {} vs tree {lb}", cert.lower_bound));
                }
                if inc.is_some() && !bound_closes(cert.lower_bound, inc) {
                    reasons.push("bound test fails for the global bound".into());
                }
            }
        }
        if !cert.proven_clean {
            reasons.push("proven conclusion without clean pricing".into());
        }
    }
    Verification { reasons }
}

fn verify_leaf(
    inst: &Instance,
    ws: &WorkingSet,
    node: &NodeState,
    fix: &Fixings,
    inc: Option<i64>,
    tol_rc: f64,
    reasons: &mut Vec<String>,
) {
    let NodeState::Leaf { kind, bound, basis } = node else {
        reasons.push("open node in a proven tree".into());
        return;
    };
    if *kind == LeafKind::Covered {
        let set = fix.lot_on.clone();
        let replay = solve_restricted(inst, &set).ok().map(|a| a.total_cost as f64);
        if replay != *bound || fix.lot_on.len() < inst.k() {
            reasons.push(format!("bound mismatch: covered leaf recorded {bound:?}, replayed {replay:?}"));
        }
        if let (Some(r), Some(c)) = (replay, inc) {
            if r < c as f64 {
                reasons.push("covered leaf beats the incumbent".into());
            }
        }
        return;
    }
    let solved = match solve_rmp(inst, ws, fix, basis.as_ref()).or_else(|_| solve_rmp(inst, ws, fix, None)) {
        Ok(s) => s,
        Err(e) => {
            reasons.push(format!("leaf re-solve failed: {e}"));
            return;
        }
    };
    match (&solved.outcome, kind) {
        (RmpOutcome::Optimal(sol), LeafKind::Bound) => {
            let clean = pricing_round(inst, ws, &sol.duals, fix, PricingMode::Optimality, tol_rc, 0).proven_clean;
            if !clean {
                reasons.push("leaf pricing finds an improving column".into());
            }
            match bound {
                Some(b) if bounds_agree(*b, sol.objective) => {}
                _ => reasons.push(format!("bound mismatch: leaf recorded {bound:?}, re-solved {}", sol.objective)),
            }
            if !bound_closes(sol.objective, inc) {
                reasons.push(format!("leaf bound {} does not close against {inc:?}", sol.objective));
            }
        }
        (RmpOutcome::Infeasible(farkas), LeafKind::Infeasible) => {
            let clean = pricing_round(inst, ws, farkas, fix, PricingMode::Farkas, tol_rc, 0).proven_clean;
            if !clean {
                reasons.push("infeasible leaf has a Farkas-improving column".into());
            }
        }
        _ => reasons.push(format!("leaf status changed on re-solve ({kind:?})")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_instance, RawDemand, RawInstance, RawLotBounds, RawSupply};
    use crate::subsolver::{brute_force_oracle, ORACLE_BUDGET};

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
    fn toy_instance_matches_oracle() {
        let i = inst(
            &[&["1.2", "3.1"], &["0.4", "2.0"], &["3.3", "0.2"], &["2.0", "2.0"]],
            &[1, 2],
            (0, 3, 1, 4),
            (10, 16),
            2,
        );
        let r = solve(&i, &SolverConfig::default()).unwrap();
        assert_eq!(r.certificate.conclusion, Conclusion::ProvenOptimal);
        let want = brute_force_oracle(&i, ORACLE_BUDGET).unwrap();
        assert_eq!(r.assignment.as_ref().unwrap().total_cost, want.total_cost);
        let v = verify_certificate(&i, &r);
        assert!(v.passed(), "{:?}", v.reasons);
    }

    #[test]
    fn perfect_fit_stops_at_zero() {
        let i = inst(&[&["2", "4", "4", "2"], &["1", "2", "2", "1"]], &[1, 2], (0, 3, 4, 8), (0, 100), 1);
        let r = solve(&i, &SolverConfig::default()).unwrap();
        assert_eq!(r.certificate.conclusion, Conclusion::ProvenOptimal);
        assert_eq!(r.certificate.incumbent_cost, Some(0));
    }

    #[test]
    fn infeasible_window_is_proven() {
        let i = inst(&[&["1"], &["2"]], &[1], (1, 2, 1, 2), (5, 9), 1);
        let r = solve(&i, &SolverConfig::default()).unwrap();
        assert_eq!(r.certificate.conclusion, Conclusion::ProvenInfeasible);
        assert!(r.assignment.is_none());
        assert!(verify_certificate(&i, &r).passed());
    }

    #[test]
    fn zero_time_limit_keeps_heuristic() {
        let i = inst(&[&["1.2", "3.1"], &["0.4", "2.0"]], &[1, 2], (0, 3, 1, 4), (0, 16), 1);
        let cfg = SolverConfig { time_limit: Some(0.0), ..Default::default() };
        let r = solve(&i, &cfg).unwrap();
        assert!(matches!(r.certificate.conclusion, Conclusion::LimitReached { .. }));
        assert!(r.assignment.is_some());
    }

    #[test]
    fn tampered_cost_is_rejected() {
        let i = inst(&[&["1.2", "3.1"], &["0.4", "2.0"], &["3.3", "0.2"]], &[1, 2], (0, 3, 1, 4), (6, 14), 2);
        let mut r = solve(&i, &SolverConfig::default()).unwrap();
        assert!(verify_certificate(&i, &r).passed());
        r.certificate.incumbent_cost = r.certificate.incumbent_cost.map(|c| c - 1);
        let v = verify_certificate(&i, &r);
        assert!(v.reasons.iter().any(|s| s.contains("cost mismatch")), "{:?}", v.reasons);
    }
}
