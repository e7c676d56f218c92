//! Revised simplex engine for `min c^T x` over rows `a^T x >= b` or
//! `a^T x = b` with `x >= 0`.
//!
//! Each row gets a logical column `-e_i` (bounds `[0, inf)` for `>=` rows,
//! `[0, 0]` for equalities) and an artificial column `±e_i` that is only
//! free during phase one. The basis is kept as a sparse LU plus an eta file.
//! Warm starts go straight to primal phase two when primal feasible.
//! Otherwise the dual simplex restores feasibility, with costs temporarily
//! shifted if the basis is not dual feasible either (rows and columns were
//! both added), and the primal simplex finishes.
//!
//! Duals are reported with the sign convention `d_j = c_j - y^T a_j`, so
//! `>=` rows carry `y_i >= 0`. An infeasible result carries a Farkas
//! certificate instead, `y^T a_j <= 0` for every column and `b^T y > 0`,
//! taken from the phase-one duals or from the dual simplex row that proved
//! infeasibility.

mod lu;

use std::fmt;
use std::time::Instant;

use log::{debug, trace};
use serde::{Deserialize, Serialize};

use crate::LpError;
use lu::{Eta, LuFactors};

pub const TOL_FEAS: f64 = 1e-7;
pub const TOL_DUAL: f64 = 1e-7;
pub const TOL_GAP: f64 = 1e-6;

const PIVOT_TOL: f64 = 1e-9;
const BLAND_PIVOT_TOL: f64 = 1e-7;
const STALL_LIMIT: usize = 60;
const MAX_PERTURBATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    /// `a^T x >= b`
    Ge,
    /// `a^T x = b`
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// A minimization program with nonnegative variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    costs: Vec<f64>,
    rows: Vec<LpRow>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a column with objective coefficient `cost`, returning its index.
    pub fn add_column(&mut self, cost: f64) -> usize {
        self.costs.push(cost);
        self.costs.len() - 1
    }

    pub fn add_row(&mut self, mut coeffs: Vec<(usize, f64)>, sense: RowSense, rhs: f64) -> Result<usize, LpError> {
        let row = self.rows.len();
        if !rhs.is_finite() {
            return Err(LpError::NonFinite { row });
        }
        coeffs.sort_by_key(|&(j, _)| j);
        for w in coeffs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(LpError::DuplicateEntry { row, column: w[0].0 });
            }
        }
        for &(j, v) in &coeffs {
            if j >= self.costs.len() {
                return Err(LpError::UnknownColumn { row, column: j });
            }
            if !v.is_finite() {
                return Err(LpError::NonFinite { row });
            }
        }
        coeffs.retain(|&(_, v)| v != 0.0);
        self.rows.push(LpRow { coeffs, sense, rhs });
        Ok(row)
    }

    pub fn num_cols(&self) -> usize {
        self.costs.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn rows(&self) -> &[LpRow] {
        &self.rows
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    /// Largest violation of `rows` and `x >= 0` at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0f64, |acc, &v| acc.max(-v));
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.sense {
                RowSense::Ge => row.rhs - lhs,
                RowSense::Eq => (row.rhs - lhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// `sum_i b_i y_i`.
    pub fn dual_objective(&self, y: &[f64]) -> f64 {
        self.rows.iter().zip(y).map(|(r, &yi)| r.rhs * yi).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration limit",
            LpStatus::NumericalFailure => "numerical failure",
        };
        f.write_str(s)
    }
}

/// A basic variable, identified relative to the program it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisVar {
    Column(usize),
    Logical(usize),
    Artificial(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Basis(pub Vec<BasisVar>);

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Row duals when optimal; Farkas multipliers when infeasible.
    pub dual: Vec<f64>,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub tol_feas: f64,
    pub tol_dual: f64,
    pub tol_gap: f64,
    pub max_iterations: usize,
    pub refactor_interval: usize,
    /// Stop with `IterationLimit` once this instant has passed.
    pub deadline: Option<Instant>,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            tol_feas: TOL_FEAS,
            tol_dual: TOL_DUAL,
            tol_gap: TOL_GAP,
            max_iterations: 1_000_000,
            refactor_interval: 80,
            deadline: None,
        }
    }
}

/// `c_j - a_j^T y` for a column against the duals of `sol`.
pub fn reduced_cost_of_column(sol: &LpSolution, cost: f64, column: &[(usize, f64)]) -> f64 {
    cost - column.iter().map(|&(i, a)| a * sol.dual[i]).sum::<f64>()
}

pub fn solve_lp(lp: &LinearProgram, warm_start: Option<&Basis>) -> LpSolution {
    solve_lp_with(lp, warm_start, &LpOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, warm_start: Option<&Basis>, opts: &LpOptions) -> LpSolution {
    let mut solver = Simplex::new(lp, *opts);
    let status = solver.run(warm_start);
    solver.into_solution(lp, status)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Numerical,
}

struct Simplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    /// `rhs` plus the current perturbation, if any.
    shifted_rhs: Vec<f64>,
    perturbed: bool,
    row_is_eq: Vec<bool>,
    art_sign: Vec<f64>,
    basis: Vec<usize>,
    position: Vec<usize>,
    x_b: Vec<f64>,
    lu: LuFactors,
    etas: Vec<Eta>,
    phase: Phase,
    iterations: usize,
    opts: LpOptions,
    farkas: Option<Vec<f64>>,
    /// Temporary phase-two cost shifts making a warm basis dual feasible.
    shift: Vec<f64>,
}

const NOT_BASIC: usize = usize::MAX;

impl Simplex {
    fn new(lp: &LinearProgram, opts: LpOptions) -> Self {
        let m = lp.rows.len();
        let n = lp.costs.len();
        let mut counts = vec![0usize; n + 1];
        for row in &lp.rows {
            for &(j, _) in &row.coeffs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut fill = counts;
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0f64; nnz];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                let at = fill[j];
                col_row[at] = i;
                col_val[at] = v;
                fill[j] += 1;
            }
        }
        let mut row_start = Vec::with_capacity(m + 1);
        row_start.push(0);
        let mut row_col = Vec::with_capacity(nnz);
        let mut row_val = Vec::with_capacity(nnz);
        for row in &lp.rows {
            for &(j, v) in &row.coeffs {
                row_col.push(j);
                row_val.push(v);
            }
            row_start.push(row_col.len());
        }
        Simplex {
            m,
            n,
            col_start,
            col_row,
            col_val,
            row_start,
            row_col,
            row_val,
            cost: lp.costs.clone(),
            rhs: lp.rows.iter().map(|r| r.rhs).collect(),
            shifted_rhs: lp.rows.iter().map(|r| r.rhs).collect(),
            perturbed: false,
            row_is_eq: lp.rows.iter().map(|r| r.sense == RowSense::Eq).collect(),
            art_sign: vec![1.0; m],
            basis: Vec::new(),
            position: vec![NOT_BASIC; n + 2 * m],
            x_b: vec![0.0; m],
            lu: LuFactors::default(),
            etas: Vec::new(),
            phase: Phase::Two,
            iterations: 0,
            opts,
            farkas: None,
            shift: Vec::new(),
        }
    }

    #[inline]
    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n + self.m
    }

    /// Whether variable `j` is fixed at zero in the current phase.
    #[inline]
    fn fixed_at_zero(&self, j: usize) -> bool {
        if j < self.n {
            false
        } else if j < self.n + self.m {
            self.row_is_eq[j - self.n]
        } else {
            self.phase == Phase::Two
        }
    }

    #[inline]
    fn var_cost(&self, j: usize) -> f64 {
        match self.phase {
            Phase::One => {
                if self.is_artificial(j) {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                let c = if j < self.n { self.cost[j] } else { 0.0 };
                match self.shift.get(j) {
                    Some(s) => c + s,
                    None => c,
                }
            }
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1]).map(|k| (self.col_row[k], self.col_val[k])).collect()
        } else if j < self.n + self.m {
            vec![(j - self.n, -1.0)]
        } else {
            let i = j - self.n - self.m;
            vec![(i, self.art_sign[i])]
        }
    }

    /// `a_j^T y`.
    #[inline]
    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for k in self.col_start[j]..self.col_start[j + 1] {
                s += self.col_val[k] * y[self.col_row[k]];
            }
            s
        } else if j < self.n + self.m {
            -y[j - self.n]
        } else {
            let i = j - self.n - self.m;
            self.art_sign[i] * y[i]
        }
    }

    fn set_basis(&mut self, vars: Vec<usize>) {
        self.position.iter_mut().for_each(|p| *p = NOT_BASIC);
        for (p, &j) in vars.iter().enumerate() {
            self.position[j] = p;
        }
        self.basis = vars;
    }

    fn refactor(&mut self) -> bool {
        let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&j| self.column(j)).collect();
        match LuFactors::factor(self.m, &cols) {
            Ok(lu) => {
                self.lu = lu;
                self.etas.clear();
                self.recompute_primal();
                true
            }
            Err(s) => {
                debug!("basis singular at position {}", s.position);
                false
            }
        }
    }

    fn recompute_primal(&mut self) {
        let mut a = self.shifted_rhs.clone();
        let mut z = vec![0.0; self.m];
        self.lu.solve(&mut a, &mut z);
        for eta in &self.etas {
            eta.apply(&mut z);
        }
        self.x_b = z;
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        for (i, v) in self.column(j) {
            a[i] += v;
        }
        self.ftran_dense(a)
    }

    fn ftran_dense(&self, mut a: Vec<f64>) -> Vec<f64> {
        let mut z = vec![0.0; self.m];
        self.lu.solve(&mut a, &mut z);
        for eta in &self.etas {
            eta.apply(&mut z);
        }
        z
    }

    /// `y = B^{-T} c` for `c` indexed by basis position.
    fn btran(&self, mut c: Vec<f64>) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            eta.apply_transposed(&mut c);
        }
        let mut y = vec![0.0; self.m];
        self.lu.solve_transposed(&c, &mut y);
        y
    }

    fn duals(&self) -> Vec<f64> {
        let c_b: Vec<f64> = self.basis.iter().map(|&j| self.var_cost(j)).collect();
        self.btran(c_b)
    }

    /// Reduced costs of all variables, zero on basic ones.
    fn reduced_costs(&self) -> Vec<f64> {
        let y = self.duals();
        (0..self.n + 2 * self.m)
            .map(|j| if self.position[j] == NOT_BASIC { self.var_cost(j) - self.dot_column(j, &y) } else { 0.0 })
            .collect()
    }

    /// Entries `rho^T a_j` of the pivot row over nonbasic, non-fixed
    /// variables, accumulated row-wise from the nonzeros of `rho`.
    fn pivot_row(&self, rho: &[f64], acc: &mut [f64], mark: &mut [bool]) -> Vec<(usize, f64)> {
        let mut touched = Vec::new();
        let mut out = Vec::new();
        for (i, &r) in rho.iter().enumerate() {
            if r.abs() <= 1e-14 {
                continue;
            }
            for k in self.row_start[i]..self.row_start[i + 1] {
                let j = self.row_col[k];
                if !mark[j] {
                    mark[j] = true;
                    touched.push(j);
                }
                acc[j] += r * self.row_val[k];
            }
            let slack = self.n + i;
            if self.position[slack] == NOT_BASIC && !self.fixed_at_zero(slack) {
                out.push((slack, -r));
            }
            let art = self.n + self.m + i;
            if self.position[art] == NOT_BASIC && !self.fixed_at_zero(art) {
                out.push((art, self.art_sign[i] * r));
            }
        }
        for j in touched {
            if self.position[j] == NOT_BASIC && acc[j] != 0.0 {
                out.push((j, acc[j]));
            }
            acc[j] = 0.0;
            mark[j] = false;
        }
        out
    }

    fn objective(&self) -> f64 {
        self.basis.iter().zip(&self.x_b).map(|(&j, &x)| self.var_cost(j) * x).sum()
    }

    fn cold_basis(&mut self) {
        let mut vars = Vec::with_capacity(self.m);
        for i in 0..self.m {
            if !self.row_is_eq[i] && self.rhs[i] <= 0.0 {
                vars.push(self.n + i);
            } else {
                self.art_sign[i] = if self.rhs[i] >= 0.0 { 1.0 } else { -1.0 };
                vars.push(self.n + self.m + i);
            }
        }
        self.set_basis(vars);
    }

    /// Installs a warm basis. Missing or dependent columns are replaced by
    /// the logicals of rows left uncovered.
    fn warm_basis(&mut self, warm: &Basis) -> bool {
        if warm.0.len() > self.m {
            return false;
        }
        let mut vars = Vec::with_capacity(self.m);
        let mut seen = vec![false; self.n + 2 * self.m];
        for v in &warm.0 {
            let j = match *v {
                BasisVar::Column(j) if j < self.n => j,
                BasisVar::Logical(i) if i < self.m => self.n + i,
                BasisVar::Artificial(i) if i < self.m => self.n + self.m + i,
                _ => return false,
            };
            if seen[j] {
                return false;
            }
            seen[j] = true;
            vars.push(j);
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vars.iter().map(|&j| self.column(j)).collect();
        cols.resize(self.m, Vec::new());
        vars.resize(self.m, NOT_BASIC);
        let (lu, swaps) = LuFactors::factor_with_repair(self.m, &cols, |i| if self.row_is_eq[i] { 1.0 } else { -1.0 });
        if !swaps.is_empty() {
            trace!("warm basis repaired with {} logicals", swaps.len());
        }
        for (p, i) in swaps {
            vars[p] = if self.row_is_eq[i] { self.n + self.m + i } else { self.n + i };
        }
        self.set_basis(vars);
        self.lu = lu;
        self.etas.clear();
        self.recompute_primal();
        true
    }

    fn primal_infeasibility(&self) -> f64 {
        let mut worst = 0.0f64;
        for (p, &j) in self.basis.iter().enumerate() {
            let x = self.x_b[p];
            worst = worst.max(-x);
            if self.fixed_at_zero(j) {
                worst = worst.max(x);
            }
        }
        worst
    }

    fn dual_infeasibility(&self, y: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.n + 2 * self.m {
            if self.position[j] != NOT_BASIC || self.fixed_at_zero(j) {
                continue;
            }
            let d = self.var_cost(j) - self.dot_column(j, y);
            worst = worst.max(-d);
        }
        worst
    }

    fn run(&mut self, warm: Option<&Basis>) -> Outcome {
        self.phase = Phase::Two;
        if let Some(w) = warm {
            if self.warm_basis(w) {
                if let Some(outcome) = self.run_from_warm() {
                    return outcome;
                }
            } else {
                trace!("warm start rejected");
            }
        }
        self.run_cold()
    }

    fn run_from_warm(&mut self) -> Option<Outcome> {
        if self.primal_infeasibility() <= self.opts.tol_feas {
            return Some(self.finish_phase_two());
        }
        let y = self.duals();
        if self.dual_infeasibility(&y) > self.opts.tol_dual {
            self.shift_costs(&y);
        }
        let out = self.dual_simplex();
        self.shift.clear();
        match out {
            Outcome::Optimal => Some(self.finish_phase_two()),
            Outcome::IterationLimit => Some(Outcome::IterationLimit),
            Outcome::Infeasible => Some(Outcome::Infeasible),
            _ => None,
        }
    }

    /// Raises the cost of every dual infeasible nonbasic variable just enough
    /// to make its reduced cost positive. The dual simplex then restores
    /// primal feasibility and the primal simplex, with true costs, finishes.
    fn shift_costs(&mut self, y: &[f64]) {
        let total = self.n + 2 * self.m;
        self.shift = vec![0.0; total];
        let mut shifted = 0usize;
        for j in 0..total {
            if self.position[j] != NOT_BASIC || self.fixed_at_zero(j) {
                continue;
            }
            let d = self.var_cost(j) - self.dot_column(j, y);
            if d < 0.0 {
                self.shift[j] = -d + 10.0 * self.opts.tol_dual;
                shifted += 1;
            }
        }
        trace!("shifted {shifted} costs for the dual simplex");
    }

    fn run_cold(&mut self) -> Outcome {
        self.etas.clear();
        self.perturbed = false;
        self.shifted_rhs.clone_from(&self.rhs);
        self.art_sign.iter_mut().for_each(|s| *s = 1.0);
        self.cold_basis();
        if !self.refactor() {
            return Outcome::Numerical;
        }
        let needs_phase_one = self.basis.iter().zip(&self.x_b).any(|(&j, &x)| self.is_artificial(j) && x > 0.0);
        if needs_phase_one {
            self.phase = Phase::One;
            match self.primal_simplex() {
                Outcome::Optimal => {}
                Outcome::Unbounded => return Outcome::Numerical,
                other => return other,
            }
            let infeas = self.objective();
            if infeas > self.opts.tol_feas.max(1e-9 * self.rhs_scale()) {
                debug!("phase one ended with infeasibility {infeas:e}");
                self.farkas = Some(self.duals());
                return Outcome::Infeasible;
            }
            self.phase = Phase::Two;
        }
        self.finish_phase_two()
    }

    fn rhs_scale(&self) -> f64 {
        self.rhs.iter().fold(1.0f64, |acc, &b| acc.max(b.abs()))
    }

    /// Phase two to optimality, then a fresh refactorization to confirm.
    fn finish_phase_two(&mut self) -> Outcome {
        self.phase = Phase::Two;
        for _attempt in 0..4 {
            let out = self.primal_simplex();
            if out != Outcome::Optimal {
                return out;
            }
            if !self.refactor() {
                return Outcome::Numerical;
            }
            let pinf = self.primal_infeasibility();
            let y = self.duals();
            let dinf = self.dual_infeasibility(&y);
            if pinf <= self.opts.tol_feas && dinf <= self.opts.tol_dual {
                return Outcome::Optimal;
            }
            debug!("re-check after refactor: primal inf {pinf:e}, dual inf {dinf:e}");
            if pinf > self.opts.tol_feas {
                if dinf <= self.opts.tol_dual {
                    match self.dual_simplex() {
                        Outcome::Optimal => continue,
                        Outcome::IterationLimit => return Outcome::IterationLimit,
                        _ => return Outcome::Numerical,
                    }
                }
                return Outcome::Numerical;
            }
        }
        Outcome::Numerical
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64], theta: f64) {
        for (x, &a) in self.x_b.iter_mut().zip(alpha) {
            *x -= theta * a;
        }
        self.x_b[r] = theta;
        let leaving = self.basis[r];
        self.position[leaving] = NOT_BASIC;
        self.position[q] = r;
        self.basis[r] = q;
        self.etas.push(Eta::new(r, alpha));
        self.iterations += 1;
        if self.etas.len() >= self.opts.refactor_interval && !self.refactor() {
            self.repair();
        }
    }

    /// Replaces dependent basis columns by logicals of uncovered rows. The
    /// primal values change, so callers re-check feasibility.
    fn repair(&mut self) {
        let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&j| self.column(j)).collect();
        let (lu, swaps) =
            LuFactors::factor_with_repair(self.m, &cols, |i| if self.row_is_eq[i] { self.art_sign[i] } else { -1.0 });
        debug!("basis repaired with {} logicals", swaps.len());
        let mut vars = self.basis.clone();
        for (p, i) in swaps {
            vars[p] = if self.row_is_eq[i] { self.n + self.m + i } else { self.n + i };
        }
        self.set_basis(vars);
        self.lu = lu;
        self.etas.clear();
        self.recompute_primal();
    }

    /// Lifts basic values by small pseudo-random amounts, shifting the
    /// right-hand side to match, so degenerate vertices become strict.
    fn perturb(&mut self) {
        let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ (self.iterations as u64);
        let scale = 1e-6 * (1.0 + self.rhs_scale()).sqrt();
        for p in 0..self.m {
            let j = self.basis[p];
            if self.fixed_at_zero(j) {
                continue;
            }
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let delta = scale * (1.0 + (state % 1000) as f64 / 1000.0);
            self.x_b[p] += delta;
            for (i, v) in self.column(j) {
                self.shifted_rhs[i] += v * delta;
            }
        }
        self.perturbed = true;
        trace!("perturbed basic values after {} iterations", self.iterations);
    }

    /// Drops the perturbation and restores primal feasibility with the
    /// dual simplex; the basis is still dual feasible.
    fn unperturb(&mut self) -> Outcome {
        self.perturbed = false;
        self.shifted_rhs.clone_from(&self.rhs);
        if !self.refactor() {
            self.repair();
        }
        if self.primal_infeasibility() <= self.opts.tol_feas {
            return Outcome::Optimal;
        }
        match self.dual_simplex() {
            Outcome::Optimal => Outcome::Optimal,
            Outcome::IterationLimit => Outcome::IterationLimit,
            _ => Outcome::Numerical,
        }
    }

    fn primal_simplex(&mut self) -> Outcome {
        let total = self.n + 2 * self.m;
        let mut best_obj = self.objective();
        let mut stall = 0usize;
        let mut bland = false;
        let mut perturbations = 0;
        loop {
            if self.out_of_budget() {
                return Outcome::IterationLimit;
            }
            let y = self.duals();
            let mut entering = None;
            let mut best_d = -self.opts.tol_dual;
            for j in 0..total {
                if self.position[j] != NOT_BASIC || self.fixed_at_zero(j) {
                    continue;
                }
                let d = self.var_cost(j) - self.dot_column(j, &y);
                if bland {
                    if d < -self.opts.tol_dual {
                        entering = Some(j);
                        break;
                    }
                } else if d < best_d {
                    best_d = d;
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                if self.perturbed {
                    match self.unperturb() {
                        Outcome::Optimal => {
                            best_obj = self.objective();
                            stall = 0;
                            bland = false;
                            continue;
                        }
                        other => return other,
                    }
                }
                return Outcome::Optimal;
            };
            if self.iterations.is_multiple_of(1000) {
                trace!("iteration {} phase {:?} objective {:e} etas {}", self.iterations, self.phase, self.objective(), self.etas.len());
            }
            let alpha = self.ftran(q);
            let Some((r, theta)) = self.primal_ratio(&alpha, bland) else {
                return Outcome::Unbounded;
            };
            self.pivot(r, q, &alpha, theta);

            let obj = self.objective();
            if obj < best_obj - 1e-12 * (1.0 + best_obj.abs()) {
                best_obj = obj;
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall > STALL_LIMIT && !bland {
                    if perturbations < MAX_PERTURBATIONS && !self.perturbed {
                        perturbations += 1;
                        self.perturb();
                        best_obj = self.objective();
                    } else {
                        trace!("stalled for {stall} iterations, switching to Bland's rule");
                        bland = true;
                    }
                    stall = 0;
                }
            }
        }
    }

    /// Harris two-pass ratio test; with `bland`, the exact minimum ratio with
    /// ties to the smallest variable index.
    fn primal_ratio(&self, alpha: &[f64], bland: bool) -> Option<(usize, f64)> {
        let blocks = |p: usize, a: f64| -> bool { a > PIVOT_TOL || (a < -PIVOT_TOL && self.fixed_at_zero(self.basis[p])) };
        if bland {
            let firm = |p: usize, a: f64| a > BLAND_PIVOT_TOL || (a < -BLAND_PIVOT_TOL && self.fixed_at_zero(self.basis[p]));
            let tie = self.opts.tol_feas;
            let mut best: Option<(usize, f64)> = None;
            let any_firm = alpha.iter().enumerate().any(|(p, &a)| firm(p, a));
            for (p, &a) in alpha.iter().enumerate() {
                if !(if any_firm { firm(p, a) } else { blocks(p, a) }) {
                    continue;
                }
                let ratio = (self.x_b[p] / a).max(0.0);
                best = match best {
                    None => Some((p, ratio)),
                    Some((bp, br)) => {
                        if ratio < br - tie || (ratio <= br + tie && self.basis[p] < self.basis[bp]) {
                            Some((p, ratio))
                        } else {
                            Some((bp, br))
                        }
                    }
                };
            }
            return best;
        }
        let tol = self.opts.tol_feas;
        let mut theta_max = f64::INFINITY;
        for (p, &a) in alpha.iter().enumerate() {
            if a > PIVOT_TOL {
                theta_max = theta_max.min((self.x_b[p] + tol) / a);
            } else if a < -PIVOT_TOL && self.fixed_at_zero(self.basis[p]) {
                theta_max = theta_max.min((self.x_b[p] - tol) / a);
            }
        }
        if theta_max == f64::INFINITY {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for (p, &a) in alpha.iter().enumerate() {
            if !blocks(p, a) {
                continue;
            }
            let ratio = self.x_b[p] / a;
            if ratio <= theta_max {
                match best {
                    Some((bp, _)) if alpha[bp].abs() >= a.abs() => {}
                    _ => best = Some((p, ratio)),
                }
            }
        }
        best.map(|(p, ratio)| (p, ratio.max(0.0)))
    }

    fn out_of_budget(&self) -> bool {
        self.iterations >= self.opts.max_iterations
            || (self.iterations.is_multiple_of(64) && self.opts.deadline.is_some_and(|d| Instant::now() >= d))
    }

    /// Multipliers `y` with `y^T A <= 0`, `y >= 0` on inequality rows and
    /// `y^T b > 0`, from a row of `B^{-1}` with no eligible entering column.
    fn farkas_from_row(&self, rho: &[f64], below: bool) -> Vec<f64> {
        let sign = if below { -1.0 } else { 1.0 };
        let scale = rho.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        rho.iter()
            .enumerate()
            .map(|(i, &v)| {
                let y = sign * v / scale;
                if self.row_is_eq[i] { y } else { y.max(0.0) }
            })
            .collect()
    }

    /// Dual simplex with dual steepest-edge row choice. Reduced costs and
    /// edge weights are updated from the pivot row and recomputed whenever
    /// the basis is refactored.
    fn dual_simplex(&mut self) -> Outcome {
        let mut retries = 0;
        let mut d = self.reduced_costs();
        let mut w = vec![1.0; self.m];
        let mut acc = vec![0.0; self.n];
        let mut mark = vec![false; self.n];
        loop {
            if self.out_of_budget() {
                return Outcome::IterationLimit;
            }
            let mut leave = None;
            let mut best = 0.0;
            let mut worst = 0.0f64;
            for (p, &j) in self.basis.iter().enumerate() {
                let x = self.x_b[p];
                let viol = if x < 0.0 {
                    -x
                } else if self.fixed_at_zero(j) {
                    x
                } else {
                    0.0
                };
                if viol > self.opts.tol_feas {
                    worst = worst.max(viol);
                    let score = viol * viol / w[p];
                    if score > best {
                        best = score;
                        leave = Some(p);
                    }
                }
            }
            let Some(r) = leave else {
                return Outcome::Optimal;
            };
            if self.iterations.is_multiple_of(1000) {
                trace!("dual iteration {} worst infeasibility {worst:e} objective {:e}", self.iterations, self.objective());
            }
            let below = self.x_b[r] < 0.0;
            let mut e = vec![0.0; self.m];
            e[r] = 1.0;
            let rho = self.btran(e);
            let row = self.pivot_row(&rho, &mut acc, &mut mark);

            let eligible = |a: f64| if below { a < -PIVOT_TOL } else { a > PIVOT_TOL };
            let tol = self.opts.tol_dual;
            let theta_max = row
                .iter()
                .filter(|&&(_, a)| eligible(a))
                .map(|&(j, a)| (d[j].max(0.0) + tol) / a.abs())
                .fold(f64::INFINITY, f64::min);
            if theta_max == f64::INFINITY {
                // row r proves infeasibility unless eta drift is to blame
                if !self.etas.is_empty() {
                    if !self.refactor() {
                        return Outcome::Numerical;
                    }
                    d = self.reduced_costs();
                    continue;
                }
                self.farkas = Some(self.farkas_from_row(&rho, below));
                return Outcome::Infeasible;
            }
            let mut pick: Option<(usize, f64)> = None;
            for &(j, a) in row.iter().filter(|&&(_, a)| eligible(a)) {
                if d[j].max(0.0) / a.abs() <= theta_max {
                    match pick {
                        Some((_, pa)) if pa.abs() >= a.abs() => {}
                        _ => pick = Some((j, a)),
                    }
                }
            }
            let (q, a_rq) = pick.expect("finite ratio has a candidate");
            let alpha = self.ftran(q);
            if (alpha[r] - a_rq).abs() > 1e-7 * (1.0 + a_rq.abs()) {
                retries += 1;
                if retries > 3 || !self.refactor() {
                    return Outcome::Numerical;
                }
                d = self.reduced_costs();
                continue;
            }

            let theta_d = d[q] / a_rq;
            for &(j, a) in &row {
                d[j] -= theta_d * a;
            }
            let leaving = self.basis[r];
            d[q] = 0.0;
            d[leaving] = -theta_d;

            let w_r = rho.iter().map(|v| v * v).sum::<f64>();
            let tau = self.ftran_dense(rho);
            let a_r = alpha[r];
            for (p, wp) in w.iter_mut().enumerate() {
                if p == r || alpha[p] == 0.0 {
                    continue;
                }
                let ratio = alpha[p] / a_r;
                *wp = (*wp + ratio * (ratio * w_r - 2.0 * tau[p])).max(ratio * ratio).max(1e-8);
            }
            w[r] = (w_r / (a_r * a_r)).max(1e-8);

            let theta = self.x_b[r] / a_r;
            self.pivot(r, q, &alpha, theta);
            if self.etas.is_empty() {
                d = self.reduced_costs();
                if self.basis[r] != q {
                    w.iter_mut().for_each(|x| *x = 1.0);
                }
            }
        }
    }

    fn into_solution(self, lp: &LinearProgram, outcome: Outcome) -> LpSolution {
        let status = match outcome {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Infeasible => LpStatus::Infeasible,
            Outcome::Unbounded => LpStatus::Unbounded,
            Outcome::IterationLimit => LpStatus::IterationLimit,
            Outcome::Numerical => LpStatus::NumericalFailure,
        };
        let mut primal = vec![0.0; self.n];
        let mut dual = vec![0.0; self.m];
        let mut objective = f64::NAN;
        let mut basis = None;
        match status {
            LpStatus::Optimal => {
                for (p, &j) in self.basis.iter().enumerate() {
                    if j < self.n {
                        primal[j] = self.x_b[p].max(0.0);
                    }
                }
                dual = self.duals();
                for (i, yi) in dual.iter_mut().enumerate() {
                    if !self.row_is_eq[i] && *yi < 0.0 && *yi > -self.opts.tol_dual {
                        *yi = 0.0;
                    }
                }
                objective = primal.iter().zip(&self.cost).map(|(x, c)| x * c).sum();
                basis = Some(self.export_basis());
            }
            LpStatus::Infeasible => {
                if self.phase == Phase::Two {
                    basis = Some(self.export_basis());
                }
                dual = self.farkas.clone().unwrap_or_default();
                if dual.len() != self.m {
                    dual = vec![0.0; self.m];
                }
            }
            _ => {}
        }
        let mut sol = LpSolution { status, objective, primal, dual, iterations: self.iterations, basis };
        if sol.status == LpStatus::Optimal {
            let dual_obj = lp.dual_objective(&sol.dual);
            let gap = (sol.objective - dual_obj).abs();
            if gap > self.opts.tol_gap * (1.0 + sol.objective.abs()) {
                debug!("duality gap {gap:e} exceeds tolerance");
                sol.status = LpStatus::NumericalFailure;
            }
        }
        debug!(
            "lp {}x{} nnz {} -> {} in {} iterations (lu nnz {})",
            self.m,
            self.n,
            lp.num_nonzeros(),
            sol.status,
            sol.iterations,
            self.lu.nonzeros()
        );
        sol
    }

    fn export_basis(&self) -> Basis {
        Basis(
            self.basis
                .iter()
                .map(|&j| {
                    if j < self.n {
                        BasisVar::Column(j)
                    } else if j < self.n + self.m {
                        BasisVar::Logical(j - self.n)
                    } else {
                        BasisVar::Artificial(j - self.n - self.m)
                    }
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-7 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn single_variable_lower_bound() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(1.0);
        lp.add_row(vec![(x, 1.0)], RowSense::Ge, 3.0).unwrap();
        let sol = solve_lp(&lp, None);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(close(sol.objective, 3.0));
        assert!(close(sol.dual[0], 1.0));
        // new column with cost 2 and coefficient 1 prices at 2 - 1
        assert!(close(reduced_cost_of_column(&sol, 2.0, &[(0, 1.0)]), 1.0));
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(0.0);
        lp.add_row(vec![(x, -1.0)], RowSense::Ge, 1.0).unwrap();
        let sol = solve_lp(&lp, None);
        assert_eq!(sol.status, LpStatus::Infeasible);
        // Farkas: y^T a <= 0 for the column and b^T y > 0
        assert!(sol.dual[0] > 0.0);
        assert!(-sol.dual[0] <= 1e-12);
    }

    #[test]
    fn equality_rows_and_free_duals() {
        // min 2x + 3y s.t. x + y = 4, x - y >= -2 ; optimum x=4,y=0 -> 8
        let mut lp = LinearProgram::new();
        let x = lp.add_column(2.0);
        let y = lp.add_column(3.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], RowSense::Eq, 4.0).unwrap();
        lp.add_row(vec![(x, 1.0), (y, -1.0)], RowSense::Ge, -2.0).unwrap();
        let sol = solve_lp(&lp, None);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(close(sol.objective, 8.0));
        assert!(close(lp.dual_objective(&sol.dual), 8.0));
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(-1.0);
        lp.add_row(vec![(x, 1.0)], RowSense::Ge, 0.0).unwrap();
        assert_eq!(solve_lp(&lp, None).status, LpStatus::Unbounded);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(1.0);
        assert!(matches!(
            lp.add_row(vec![(x, 1.0), (x, 2.0)], RowSense::Ge, 0.0),
            Err(LpError::DuplicateEntry { .. })
        ));
        assert!(matches!(lp.add_row(vec![(7, 1.0)], RowSense::Ge, 0.0), Err(LpError::UnknownColumn { .. })));
        assert!(matches!(lp.add_row(vec![(x, f64::NAN)], RowSense::Ge, 0.0), Err(LpError::NonFinite { .. })));
    }

    #[test]
    fn warm_start_after_adding_a_row_uses_dual_simplex() {
        // min x + y s.t. x + 2y >= 2, 2x + y >= 2  -> (2/3, 2/3), 4/3
        let mut lp = LinearProgram::new();
        let x = lp.add_column(1.0);
        let y = lp.add_column(1.0);
        lp.add_row(vec![(x, 1.0), (y, 2.0)], RowSense::Ge, 2.0).unwrap();
        lp.add_row(vec![(x, 2.0), (y, 1.0)], RowSense::Ge, 2.0).unwrap();
        let first = solve_lp(&lp, None);
        assert!(close(first.objective, 4.0 / 3.0));
        lp.add_row(vec![(x, 1.0)], RowSense::Ge, 1.0).unwrap();
        let warm = solve_lp(&lp, first.basis.as_ref());
        let cold = solve_lp(&lp, None);
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!(close(warm.objective, cold.objective));
        assert!(close(warm.objective, 1.5));
    }

    #[test]
    fn warm_start_detects_infeasibility_with_a_certificate() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(1.0);
        let y = lp.add_column(2.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], RowSense::Ge, 3.0).unwrap();
        lp.add_row(vec![(x, 1.0), (y, -1.0)], RowSense::Eq, 1.0).unwrap();
        let first = solve_lp(&lp, None);
        assert_eq!(first.status, LpStatus::Optimal);
        // x + y <= 2 written as -x - y >= -2
        lp.add_row(vec![(x, -1.0), (y, -1.0)], RowSense::Ge, -2.0).unwrap();
        let warm = solve_lp(&lp, first.basis.as_ref());
        assert_eq!(warm.status, LpStatus::Infeasible);
        let f = &warm.dual;
        assert!(f[0] >= 0.0 && f[2] >= 0.0);
        for j in [x, y] {
            let col: f64 = lp.rows().iter().zip(f).map(|(r, yi)| yi * r.coeffs.iter().find(|c| c.0 == j).map_or(0.0, |c| c.1)).sum();
            assert!(col <= 1e-9, "column {j}: {col}");
        }
        let yb: f64 = lp.rows().iter().zip(f).map(|(r, yi)| yi * r.rhs).sum();
        assert!(yb > 1e-6);
    }

    #[test]
    fn warm_start_with_new_rows_and_columns() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(1.0);
        let y = lp.add_column(1.0);
        lp.add_row(vec![(x, 1.0), (y, 2.0)], RowSense::Ge, 2.0).unwrap();
        lp.add_row(vec![(x, 2.0), (y, 1.0)], RowSense::Ge, 2.0).unwrap();
        let first = solve_lp(&lp, None);
        // the new row cuts off the optimum, the new column prices out negative
        lp.add_row(vec![(x, 1.0)], RowSense::Ge, 1.0).unwrap();
        let z = lp.add_column(-1.0);
        lp.add_row(vec![(z, -1.0)], RowSense::Ge, -3.0).unwrap();
        let warm = solve_lp(&lp, first.basis.as_ref());
        let cold = solve_lp(&lp, None);
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!(close(warm.objective, cold.objective), "{} vs {}", warm.objective, cold.objective);
        assert!(close(warm.objective, -1.5));
        assert!(lp.max_violation(&warm.primal) < 1e-9);
    }

    #[test]
    fn garbage_warm_start_falls_back() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(1.0);
        lp.add_row(vec![(x, 1.0)], RowSense::Ge, 3.0).unwrap();
        let bad = Basis(vec![BasisVar::Column(5), BasisVar::Logical(0)]);
        let sol = solve_lp(&lp, Some(&bad));
        assert!(sol.is_optimal());
        assert!(close(sol.objective, 3.0));
    }
}
