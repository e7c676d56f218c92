//! Restricted master problem over a working set of lot-types, admitted
//! `(branch, lot-type)` pairs and multiplicities, plus cover cuts.
//!
//! Rows, all in `>=` or `=` form:
//!
//! * convexity `sum_{l,m} x_{b,l,m} = 1` per branch (dual `alpha_b`)
//! * `-sum_l y_l >= -k` (dual `kappa`)
//! * `sum m|l| x >= lo` and `-sum m|l| x >= -hi` (duals `mu_lo`, `mu_hi`)
//! * binding `y_l - sum_m x_{b,l,m} >= 0` per admitted pair (dual `beta`)
//! * cover cut `-sum_{l in C} y_l >= -(k-1)` (dual `gamma`)
//! * `y_l >= 1` for lot-types fixed on by branching (dual `rho`)

use std::collections::{BTreeMap, BTreeSet};

use log::trace;
use serde::{Deserialize, Serialize};

use crate::lp::{solve_lp_with, Basis, BasisVar, LinearProgram, LpOptions, LpStatus, RowSense, TOL_DUAL};
use crate::model::{best_multiplicity, cost, top_n_lot_types, Instance, LotType};
use crate::subsolver::Assignment;
use crate::RmpError;

/// The restriction defining the RMP.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "WorkingSetRepr", into = "WorkingSetRepr")]
pub struct WorkingSet {
    /// `L'`.
    pub pool: BTreeSet<LotType>,
    /// Per branch: `zeta(b)` with `eta(b, l)` for each member.
    pub zeta: Vec<BTreeMap<LotType, BTreeSet<u32>>>,
    /// Cover sets `C_i`.
    pub cuts: Vec<BTreeSet<LotType>>,
}

#[derive(Serialize, Deserialize)]
struct WorkingSetRepr {
    pool: Vec<LotType>,
    zeta: Vec<Vec<(LotType, Vec<u32>)>>,
    cuts: Vec<Vec<LotType>>,
}

impl From<WorkingSetRepr> for WorkingSet {
    fn from(r: WorkingSetRepr) -> Self {
        WorkingSet {
            pool: r.pool.into_iter().collect(),
            zeta: r
                .zeta
                .into_iter()
                .map(|z| z.into_iter().map(|(l, ms)| (l, ms.into_iter().collect())).collect())
                .collect(),
            cuts: r.cuts.into_iter().map(|c| c.into_iter().collect()).collect(),
        }
    }
}

impl From<WorkingSet> for WorkingSetRepr {
    fn from(ws: WorkingSet) -> Self {
        WorkingSetRepr {
            pool: ws.pool.into_iter().collect(),
            zeta: ws
                .zeta
                .into_iter()
                .map(|z| z.into_iter().map(|(l, ms)| (l, ms.into_iter().collect())).collect())
                .collect(),
            cuts: ws.cuts.into_iter().map(|c| c.into_iter().collect()).collect(),
        }
    }
}

impl WorkingSet {
    pub fn num_x_columns(&self) -> usize {
        self.zeta.iter().flat_map(|z| z.values()).map(BTreeSet::len).sum()
    }

    pub fn num_pairs(&self) -> usize {
        self.zeta.iter().map(BTreeMap::len).sum()
    }

    /// Every violated structural invariant.
    pub fn violations(&self, inst: &Instance) -> Vec<String> {
        let mut out = Vec::new();
        if self.zeta.len() != inst.num_branches() {
            out.push(format!("zeta has {} branches, instance {}", self.zeta.len(), inst.num_branches()));
        }
        for l in &self.pool {
            if !inst.params().contains(l) {
                out.push(format!("pool lot-type {l} is not applicable"));
            }
        }
        for (b, z) in self.zeta.iter().enumerate() {
            for (l, ms) in z {
                if !self.pool.contains(l) {
                    out.push(format!("zeta({b}) holds {l} outside the pool"));
                }
                if ms.is_empty() {
                    out.push(format!("eta({b}, {l}) is empty"));
                }
                if let Some(m) = ms.iter().find(|m| !inst.multiplicities().contains(m)) {
                    out.push(format!("eta({b}, {l}) holds {m} outside M"));
                }
            }
        }
        for (i, c) in self.cuts.iter().enumerate() {
            if c.len() < inst.k() {
                out.push(format!("cut {i} has {} < k members", c.len()));
            }
        }
        out
    }
}

/// `{m-1, m, m+1}` intersected with `M`.
pub fn multiplicity_window(inst: &Instance, m_hat: u32) -> BTreeSet<u32> {
    inst.multiplicities()
        .iter()
        .copied()
        .filter(|&m| m + 1 >= m_hat && m <= m_hat + 1)
        .collect()
}

/// Initial working set: each branch admits its three best fitting lot-types
/// and its incumbent lot-type, each with the multiplicity window around its
/// best multiplicity (plus the incumbent's own multiplicity).
pub fn initialize_working_set(inst: &Instance, incumbent: Option<&Assignment>) -> Result<WorkingSet, RmpError> {
    let mut ws = WorkingSet { zeta: vec![BTreeMap::new(); inst.num_branches()], ..Default::default() };
    for b in 0..inst.num_branches() {
        for (l, _) in top_n_lot_types(inst, b, 3)? {
            let window = multiplicity_window(inst, best_multiplicity(inst, b, &l));
            ws.pool.insert(l.clone());
            ws.zeta[b].entry(l).or_default().extend(window);
        }
    }
    if let Some(inc) = incumbent {
        for l in &inc.selected {
            ws.pool.insert(l.clone());
        }
        for (b, (l, m)) in inc.choices.iter().enumerate() {
            let window = multiplicity_window(inst, best_multiplicity(inst, b, l));
            let eta = ws.zeta[b].entry(l.clone()).or_default();
            eta.extend(window);
            eta.insert(*m);
        }
    }
    Ok(ws)
}

/// A change to the working set.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    /// Add `m` to `eta(b, l)` for `l` already in `zeta(b)`.
    EnlargeEta { branch: usize, lot: LotType, m: u32 },
    /// Add pool member `l` to `zeta(b)` with the given multiplicities.
    AddZeta { branch: usize, lot: LotType, ms: BTreeSet<u32> },
    /// Add `l` to the pool and to `zeta(b)` with the given multiplicities.
    NewLotType { branch: usize, lot: LotType, ms: BTreeSet<u32> },
    AddCut(BTreeSet<LotType>),
}

/// Applies `actions` in order; returns how many changed the working set.
/// Actions that are already satisfied are no-ops; a duplicate cut is an
/// error.
pub fn apply_actions(inst: &Instance, ws: &mut WorkingSet, actions: &[Action]) -> Result<usize, RmpError> {
    let mut changed = 0;
    let check_ms = |ms: &BTreeSet<u32>| -> Result<(), RmpError> {
        match ms.iter().find(|m| !inst.multiplicities().contains(m)) {
            Some(&m) => Err(RmpError::UnknownMultiplicity(m)),
            None if ms.is_empty() => Err(RmpError::UnknownMultiplicity(0)),
            None => Ok(()),
        }
    };
    for action in actions {
        match action {
            Action::EnlargeEta { branch, lot, m } => {
                let z = ws.zeta.get_mut(*branch).ok_or(RmpError::UnknownBranch(*branch))?;
                check_ms(&BTreeSet::from([*m]))?;
                let eta = z.get_mut(lot).ok_or_else(|| RmpError::UnknownLotType(lot.clone()))?;
                changed += usize::from(eta.insert(*m));
            }
            Action::AddZeta { branch, lot, ms } | Action::NewLotType { branch, lot, ms } => {
                if *branch >= ws.zeta.len() {
                    return Err(RmpError::UnknownBranch(*branch));
                }
                check_ms(ms)?;
                if matches!(action, Action::AddZeta { .. }) {
                    if !ws.pool.contains(lot) {
                        return Err(RmpError::UnknownLotType(lot.clone()));
                    }
                } else {
                    if !inst.params().contains(lot) {
                        return Err(RmpError::NotApplicable(lot.clone()));
                    }
                    changed += usize::from(ws.pool.insert(lot.clone()));
                }
                let eta = ws.zeta[*branch].entry(lot.clone()).or_default();
                let before = eta.len();
                eta.extend(ms.iter().copied());
                changed += usize::from(eta.len() != before);
            }
            Action::AddCut(set) => {
                if set.len() < inst.k() {
                    return Err(RmpError::CutTooSmall { size: set.len(), k: inst.k() });
                }
                if ws.cuts.contains(set) {
                    return Err(RmpError::DuplicateCut);
                }
                ws.cuts.push(set.clone());
                changed += 1;
            }
        }
    }
    Ok(changed)
}

/// Branching restrictions applied on top of a working set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixings {
    /// `y_l = 0`.
    pub lot_off: BTreeSet<LotType>,
    /// `y_l >= 1`.
    pub lot_on: BTreeSet<LotType>,
    /// Branch `b` may not use `l`.
    pub pair_off: BTreeSet<(usize, LotType)>,
    /// Branch `b` must use `l`.
    pub pair_on: BTreeMap<usize, LotType>,
    /// Branch `b` may not use `(l, m)`.
    pub col_off: BTreeSet<(usize, LotType, u32)>,
    /// Branch `b` must use `(l, m)`.
    pub col_on: BTreeMap<usize, (LotType, u32)>,
}

impl Fixings {
    pub fn is_empty(&self) -> bool {
        *self == Fixings::default()
    }

    pub fn lot_allowed(&self, lot: &LotType) -> bool {
        !self.lot_off.contains(lot)
    }

    /// Whether column `(b, l, m)` may exist under these fixings.
    pub fn allows(&self, b: usize, lot: &LotType, m: u32) -> bool {
        if self.lot_off.contains(lot) {
            return false;
        }
        if let Some(on) = self.pair_on.get(&b) {
            if on != lot {
                return false;
            }
        }
        if let Some((l, mm)) = self.col_on.get(&b) {
            if l != lot || *mm != m {
                return false;
            }
        }
        if self.col_off.contains(&(b, lot.clone(), m)) {
            return false;
        }
        !self.pair_off.contains(&(b, lot.clone()))
    }

    /// Whether branch `b` is pinned to a specific lot-type.
    pub fn pinned(&self, b: usize) -> Option<&LotType> {
        self.col_on.get(&b).map(|(l, _)| l).or_else(|| self.pair_on.get(&b))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ColumnKey {
    X(usize, LotType, u32),
    Y(LotType),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowKey {
    Convexity(usize),
    K,
    SupplyLo,
    SupplyHi,
    Binding(usize, LotType),
    Cut(usize),
    Fix(LotType),
}

/// A basic variable named by its RMP identity, so bases survive rebuilds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisKey {
    Column(ColumnKey),
    Logical(RowKey),
    Artificial(RowKey),
}

/// The LP together with the identity of each column and row.
#[derive(Clone, Debug)]
pub struct RmpModel {
    pub lp: LinearProgram,
    pub columns: Vec<ColumnKey>,
    pub rows: Vec<RowKey>,
}

/// A basis to restart from, plus the rows of the model it came from, so
/// rows added since then can enter with their logicals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarmBasis {
    pub basic: Vec<BasisKey>,
    pub rows: BTreeSet<RowKey>,
}

impl RmpModel {
    fn to_basis(&self, warm: &WarmBasis) -> Basis {
        let col_idx: BTreeMap<&ColumnKey, usize> = self.columns.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let row_idx: BTreeMap<&RowKey, usize> = self.rows.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let mut vars: Vec<BasisVar> = warm
            .basic
            .iter()
            .filter_map(|k| match k {
                BasisKey::Column(c) => col_idx.get(c).map(|&j| BasisVar::Column(j)),
                BasisKey::Logical(r) => row_idx.get(r).map(|&i| BasisVar::Logical(i)),
                BasisKey::Artificial(r) => row_idx.get(r).map(|&i| BasisVar::Artificial(i)),
            })
            .collect();
        for (i, key) in self.rows.iter().enumerate() {
            if !warm.rows.contains(key) {
                vars.push(match self.lp.rows()[i].sense {
                    RowSense::Ge => BasisVar::Logical(i),
                    RowSense::Eq => BasisVar::Artificial(i),
                });
            }
        }
        vars.truncate(self.rows.len());
        Basis(vars)
    }

    fn to_warm(&self, basis: &Basis) -> WarmBasis {
        let basic = basis
            .0
            .iter()
            .map(|v| match *v {
                BasisVar::Column(j) => BasisKey::Column(self.columns[j].clone()),
                BasisVar::Logical(i) => BasisKey::Logical(self.rows[i].clone()),
                BasisVar::Artificial(i) => BasisKey::Artificial(self.rows[i].clone()),
            })
            .collect();
        WarmBasis { basic, rows: self.rows.iter().cloned().collect() }
    }
}

/// The RMP for `ws` with no branching restrictions.
pub fn build_rmp(inst: &Instance, ws: &WorkingSet) -> Result<RmpModel, RmpError> {
    build_rmp_with(inst, ws, &Fixings::default())
}

/// The RMP for `ws` under `fix`: forbidden columns are omitted and
/// lot-types fixed on get a `y_l >= 1` row.
pub fn build_rmp_with(inst: &Instance, ws: &WorkingSet, fix: &Fixings) -> Result<RmpModel, RmpError> {
    let mut lp = LinearProgram::new();
    let mut columns = Vec::new();
    let mut rows = Vec::new();
    let nb = inst.num_branches();

    let mut y_col: BTreeMap<&LotType, usize> = BTreeMap::new();
    for l in &ws.pool {
        if fix.lot_allowed(l) {
            y_col.insert(l, lp.add_column(0.0));
            columns.push(ColumnKey::Y(l.clone()));
        }
    }
    // x columns per branch with their binding-row membership
    let mut conv: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    let mut supply: Vec<(usize, f64)> = Vec::new();
    let mut binding: Vec<(usize, &LotType, Vec<(usize, f64)>)> = Vec::new();
    for (b, z) in ws.zeta.iter().enumerate() {
        for (l, ms) in z {
            if !fix.lot_allowed(l) {
                continue;
            }
            let y = *y_col.get(l).ok_or_else(|| RmpError::UnknownLotType(l.clone()))?;
            let mut row = vec![(y, 1.0)];
            for &m in ms {
                if !fix.allows(b, l, m) {
                    continue;
                }
                let j = lp.add_column(cost(inst, b, l, m) as f64);
                columns.push(ColumnKey::X(b, l.clone(), m));
                conv[b].push((j, 1.0));
                supply.push((j, (u64::from(m) * l.size()) as f64));
                row.push((j, -1.0));
            }
            binding.push((b, l, row));
        }
    }

    for (b, coeffs) in conv.into_iter().enumerate() {
        lp.add_row(coeffs, RowSense::Eq, 1.0)?;
        rows.push(RowKey::Convexity(b));
    }
    let k = inst.k() as f64;
    lp.add_row(y_col.values().map(|&j| (j, -1.0)).collect(), RowSense::Ge, -k)?;
    rows.push(RowKey::K);
    lp.add_row(supply.clone(), RowSense::Ge, inst.supply_lo() as f64)?;
    rows.push(RowKey::SupplyLo);
    lp.add_row(supply.into_iter().map(|(j, v)| (j, -v)).collect(), RowSense::Ge, -(inst.supply_hi() as f64))?;
    rows.push(RowKey::SupplyHi);
    for (b, l, row) in binding {
        lp.add_row(row, RowSense::Ge, 0.0)?;
        rows.push(RowKey::Binding(b, l.clone()));
    }
    for (i, c) in ws.cuts.iter().enumerate() {
        let coeffs = c.iter().filter_map(|l| y_col.get(l)).map(|&j| (j, -1.0)).collect();
        lp.add_row(coeffs, RowSense::Ge, -(k - 1.0))?;
        rows.push(RowKey::Cut(i));
    }
    for l in &fix.lot_on {
        let coeffs = y_col.get(l).map(|&j| vec![(j, 1.0)]).unwrap_or_default();
        lp.add_row(coeffs, RowSense::Ge, 1.0)?;
        rows.push(RowKey::Fix(l.clone()));
    }
    Ok(RmpModel { lp, columns, rows })
}

/// Row duals by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    pub alpha: Vec<f64>,
    pub kappa: f64,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub beta: BTreeMap<(usize, LotType), f64>,
    /// Indexed like `WorkingSet::cuts`.
    pub gamma: Vec<f64>,
    pub rho: BTreeMap<LotType, f64>,
}

impl Duals {
    /// `mu_lo - mu_hi`: the dual price of one piece of supply.
    pub fn delta(&self) -> f64 {
        self.mu_lo - self.mu_hi
    }

    pub fn beta_of(&self, b: usize, lot: &LotType) -> Option<f64> {
        self.beta.get(&(b, lot.clone())).copied()
    }

    /// `sum_b alpha_b - k kappa + lo mu_lo - hi mu_hi - (k-1) sum gamma + sum rho`.
    pub fn objective(&self, inst: &Instance) -> f64 {
        let k = inst.k() as f64;
        self.alpha.iter().sum::<f64>() - k * self.kappa + inst.supply_lo() as f64 * self.mu_lo
            - inst.supply_hi() as f64 * self.mu_hi
            - (k - 1.0) * self.gamma.iter().sum::<f64>()
            + self.rho.values().sum::<f64>()
    }
}

/// Maps row duals to names, clamping tiny negative values of `>=` rows.
pub fn extract_duals(model: &RmpModel, dual: &[f64], ws: &WorkingSet) -> Result<Duals, RmpError> {
    let nb = ws.zeta.len();
    let mut d = Duals { alpha: vec![0.0; nb], gamma: vec![0.0; ws.cuts.len()], ..Default::default() };
    for (key, &v) in model.rows.iter().zip(dual) {
        let nonneg = |v: f64| -> Result<f64, RmpError> {
            if v >= 0.0 {
                Ok(v)
            } else if v >= -TOL_DUAL * 10.0 {
                Ok(0.0)
            } else {
                Err(RmpError::DualSign { row: format!("{key:?}"), value: v })
            }
        };
        match key {
            RowKey::Convexity(b) => d.alpha[*b] = v,
            RowKey::K => d.kappa = nonneg(v)?,
            RowKey::SupplyLo => d.mu_lo = nonneg(v)?,
            RowKey::SupplyHi => d.mu_hi = nonneg(v)?,
            RowKey::Binding(b, l) => {
                d.beta.insert((*b, l.clone()), nonneg(v)?);
            }
            RowKey::Cut(i) => d.gamma[*i] = nonneg(v)?,
            RowKey::Fix(l) => {
                d.rho.insert(l.clone(), nonneg(v)?);
            }
        }
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmpSolution {
    /// Nonzero `x_{b,l,m}`.
    pub x: BTreeMap<(usize, LotType, u32), f64>,
    /// `y_l` for every lot-type present.
    pub y: BTreeMap<LotType, f64>,
    pub objective: f64,
    pub duals: Duals,
}

impl RmpSolution {
    /// `u_{b,l} = sum_m x_{b,l,m}`.
    pub fn pair_values(&self) -> BTreeMap<(usize, LotType), f64> {
        let mut out: BTreeMap<(usize, LotType), f64> = BTreeMap::new();
        for ((b, l, _), &v) in &self.x {
            *out.entry((*b, l.clone())).or_default() += v;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RmpOutcome {
    Optimal(RmpSolution),
    /// Farkas multipliers proving the restricted LP empty.
    Infeasible(Duals),
}

#[derive(Clone, Debug)]
pub struct RmpSolve {
    pub outcome: RmpOutcome,
    pub basis: Option<WarmBasis>,
    pub iterations: usize,
    pub num_columns: usize,
    pub num_rows: usize,
}

/// A primal feasible starting basis at an integral solution whose columns
/// are all in the working set: its `x` and `y` columns are basic, and one
/// binding row per selected lot-type gives up its logical to `y_l`.
pub fn incumbent_basis(inst: &Instance, ws: &WorkingSet, a: &Assignment) -> Result<WarmBasis, RmpError> {
    let model = build_rmp(inst, ws)?;
    let mut basic: Vec<BasisKey> =
        a.choices.iter().enumerate().map(|(b, (l, m))| BasisKey::Column(ColumnKey::X(b, l.clone(), *m))).collect();
    let mut tight: BTreeSet<RowKey> = BTreeSet::new();
    for l in &a.selected {
        basic.push(BasisKey::Column(ColumnKey::Y(l.clone())));
        if let Some(b) = a.choices.iter().position(|(c, _)| c == l) {
            tight.insert(RowKey::Binding(b, l.clone()));
        }
    }
    for key in &model.rows {
        if !matches!(key, RowKey::Convexity(_)) && !tight.contains(key) {
            basic.push(BasisKey::Logical(key.clone()));
        }
    }
    Ok(WarmBasis { basic, rows: model.rows.iter().cloned().collect() })
}

/// Builds and solves the RMP, optionally warm-started from a named basis.
pub fn solve_rmp(
    inst: &Instance,
    ws: &WorkingSet,
    fix: &Fixings,
    warm: Option<&WarmBasis>,
) -> Result<RmpSolve, RmpError> {
    solve_rmp_with(inst, ws, fix, warm, &LpOptions::default())
}

/// [`solve_rmp`] with explicit LP options (tolerances, limits, deadline).
pub fn solve_rmp_with(
    inst: &Instance,
    ws: &WorkingSet,
    fix: &Fixings,
    warm: Option<&WarmBasis>,
    opts: &LpOptions,
) -> Result<RmpSolve, RmpError> {
    let model = build_rmp_with(inst, ws, fix)?;
    let basis = warm.map(|w| model.to_basis(w));
    let sol = solve_lp_with(&model.lp, basis.as_ref(), opts);
    trace!("rmp {}x{}: {} after {} iterations", model.lp.num_rows(), model.lp.num_cols(), sol.status, sol.iterations);
    let outcome = match sol.status {
        LpStatus::Optimal => {
            let mut x = BTreeMap::new();
            let mut y = BTreeMap::new();
            for (key, &v) in model.columns.iter().zip(&sol.primal) {
                match key {
                    ColumnKey::X(b, l, m) => {
                        if v > 0.0 {
                            x.insert((*b, l.clone(), *m), v);
                        }
                    }
                    ColumnKey::Y(l) => {
                        y.insert(l.clone(), v);
                    }
                }
            }
            let duals = extract_duals(&model, &sol.dual, ws)?;
            RmpOutcome::Optimal(RmpSolution { x, y, objective: sol.objective, duals })
        }
        LpStatus::Infeasible => RmpOutcome::Infeasible(extract_duals(&model, &sol.dual, ws)?),
        other => return Err(RmpError::NotOptimal(other)),
    };
    Ok(RmpSolve {
        outcome,
        basis: sol.basis.as_ref().map(|b| model.to_warm(b)),
        iterations: sol.iterations,
        num_columns: model.lp.num_cols(),
        num_rows: model.lp.num_rows(),
    })
}

/// `{l : y_l >= eps}`.
pub fn fractional_support(sol: &RmpSolution, eps: f64) -> BTreeSet<LotType> {
    sol.y.iter().filter(|&(_, &v)| v >= eps).map(|(l, _)| l.clone()).collect()
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

    fn lot(v: &[u32]) -> LotType {
        LotType::new(v.to_vec())
    }

    #[test]
    fn singleton_multiplicity_window() {
        let i = inst(&[&["1", "2"], &["2", "0"]], &[1], (0, 2, 0, 4), (0, 100), 1);
        let ws = initialize_working_set(&i, None).unwrap();
        for z in &ws.zeta {
            for ms in z.values() {
                assert_eq!(ms, &BTreeSet::from([1]));
            }
        }
        assert!(ws.pool.len() <= 2 * 3 + 1);
        assert!(ws.violations(&i).is_empty());
    }

    #[test]
    fn one_branch_one_column_shape() {
        let i = inst(&[&["1"]], &[1], (0, 2, 0, 2), (0, 10), 1);
        let ws = WorkingSet {
            pool: BTreeSet::from([lot(&[1])]),
            zeta: vec![BTreeMap::from([(lot(&[1]), BTreeSet::from([1]))])],
            cuts: Vec::new(),
        };
        let model = build_rmp(&i, &ws).unwrap();
        assert_eq!(model.lp.num_cols(), 2);
        assert_eq!(model.lp.num_rows(), 5);

        let mut ws2 = ws.clone();
        let i2 = inst(&[&["1"]], &[1], (0, 2, 0, 2), (0, 10), 1);
        apply_actions(&i2, &mut ws2, &[Action::AddCut(BTreeSet::from([lot(&[1])]))]).unwrap();
        let model2 = build_rmp(&i2, &ws2).unwrap();
        assert_eq!(model2.lp.num_rows(), 6);
        assert_eq!(model2.lp.num_cols(), 2);
    }

    #[test]
    fn trivial_rmp_duals() {
        let i = inst(&[&["1.5"]], &[1], (0, 2, 0, 2), (0, 10), 1);
        let ws = WorkingSet {
            pool: BTreeSet::from([lot(&[1])]),
            zeta: vec![BTreeMap::from([(lot(&[1]), BTreeSet::from([1]))])],
            cuts: Vec::new(),
        };
        let s = solve_rmp(&i, &ws, &Fixings::default(), None).unwrap();
        let RmpOutcome::Optimal(sol) = s.outcome else { panic!("not optimal") };
        assert!((sol.objective - 5.0).abs() < 1e-9);
        assert_eq!(sol.duals.mu_lo, 0.0);
        assert_eq!(sol.duals.mu_hi, 0.0);
        assert!((sol.duals.alpha[0] - 5.0).abs() < 1e-9);
        assert!((sol.duals.objective(&i) - sol.objective).abs() < 1e-6);
    }

    #[test]
    fn actions_are_idempotent_and_cuts_deduplicated() {
        let i = inst(&[&["1", "1"]], &[1, 2], (0, 2, 0, 4), (0, 100), 1);
        let mut ws = initialize_working_set(&i, None).unwrap();
        let l = ws.zeta[0].keys().next().unwrap().clone();
        let a = Action::EnlargeEta { branch: 0, lot: l.clone(), m: 2 };
        apply_actions(&i, &mut ws, &[a.clone()]).unwrap();
        assert_eq!(apply_actions(&i, &mut ws, &[a]).unwrap(), 0);

        let fresh = lot(&[2, 2]);
        assert!(!ws.pool.contains(&fresh));
        let before = ws.pool.len();
        apply_actions(&i, &mut ws, &[Action::NewLotType { branch: 0, lot: fresh.clone(), ms: BTreeSet::from([1]) }])
            .unwrap();
        assert_eq!(ws.pool.len(), before + 1);
        assert!(!ws.zeta[0][&fresh].is_empty());

        let cut = Action::AddCut(BTreeSet::from([l]));
        apply_actions(&i, &mut ws, &[cut.clone()]).unwrap();
        assert_eq!(apply_actions(&i, &mut ws, &[cut]), Err(RmpError::DuplicateCut));
        assert_eq!(
            apply_actions(&i, &mut ws, &[Action::EnlargeEta { branch: 7, lot: fresh, m: 1 }]),
            Err(RmpError::UnknownBranch(7))
        );
    }

    #[test]
    fn support_threshold() {
        let sol = RmpSolution {
            x: BTreeMap::new(),
            y: BTreeMap::from([(lot(&[0]), 0.5), (lot(&[1]), 0.5), (lot(&[2]), 0.1)]),
            objective: 0.0,
            duals: Duals::default(),
        };
        assert_eq!(fractional_support(&sol, 0.15), BTreeSet::from([lot(&[0]), lot(&[1])]));
        assert!(fractional_support(&sol, 0.9).is_empty());
    }

    #[test]
    fn working_set_round_trips_through_serde_shape() {
        let i = inst(&[&["1", "1"]], &[1, 2], (0, 2, 0, 4), (0, 100), 1);
        let ws = initialize_working_set(&i, None).unwrap();
        let repr: WorkingSetRepr = ws.clone().into();
        assert_eq!(WorkingSet::from(repr), ws);
    }
}
