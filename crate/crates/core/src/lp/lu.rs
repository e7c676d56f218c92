//! Right-looking sparse LU of a basis matrix with Markowitz pivot choice
//! and threshold pivoting, plus the product-form eta file used between
//! refactorizations. Simplex bases are mostly slack and singleton columns,
//! which the pivot order picks off before any fill can occur.

const NONE: usize = usize::MAX;
const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;
/// Columns inspected per Markowitz search.
const SEARCH_COLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Singular {
    /// Basis position whose column could not be pivoted.
    pub position: usize,
}

/// `L^{-1} B` is upper triangular in pivot order. Step `k` pivots on row
/// `pivot_row[k]` of basis column `pivot_pos[k]`; `l_cols[k]` holds the
/// multipliers applied to later rows and `u_rows[k]` the remaining entries
/// of the pivot row, keyed by basis position.
#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    m: usize,
    pivot_row: Vec<usize>,
    pivot_pos: Vec<usize>,
    l_cols: Vec<Vec<(usize, f64)>>,
    u_rows: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
}

struct Active {
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Vec<usize>>,
    col_done: Vec<bool>,
    row_done: Vec<bool>,
    /// Columns by current length; stale entries are skipped on read.
    col_bucket: Vec<Vec<usize>>,
    row_singletons: Vec<usize>,
}

impl Active {
    fn file_col(&mut self, p: usize) {
        let n = self.cols[p].len();
        if n >= self.col_bucket.len() {
            self.col_bucket.resize_with(n + 1, Vec::new);
        }
        self.col_bucket[n].push(p);
    }

    fn col_max(&self, p: usize) -> f64 {
        self.cols[p].iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()))
    }

    /// Returns `(row, column)` of the next pivot.
    fn choose(&mut self) -> Result<(usize, usize), Singular> {
        // a column singleton needs no elimination at all
        if let Some(b) = self.col_bucket.get_mut(1) {
            while let Some(p) = b.pop() {
                if !self.col_done[p] && self.cols[p].len() == 1 {
                    let (r, v) = self.cols[p][0];
                    if v.abs() < SINGULAR_TOL {
                        return Err(Singular { position: p });
                    }
                    return Ok((r, p));
                }
            }
        }
        // a row singleton creates no fill
        while let Some(r) = self.row_singletons.pop() {
            if self.row_done[r] || self.rows[r].len() != 1 {
                continue;
            }
            let p = self.rows[r][0];
            let v = self.cols[p].iter().find(|e| e.0 == r).map_or(0.0, |e| e.1);
            if v.abs() >= PIVOT_THRESHOLD * self.col_max(p) && v.abs() >= SINGULAR_TOL {
                return Ok((r, p));
            }
        }
        let mut best: Option<(usize, usize, usize)> = None;
        let mut seen = 0;
        'search: for n in 0..self.col_bucket.len() {
            let mut i = 0;
            while i < self.col_bucket[n].len() {
                let p = self.col_bucket[n][i];
                if self.col_done[p] || self.cols[p].len() != n {
                    self.col_bucket[n].swap_remove(i);
                    continue;
                }
                i += 1;
                let amax = self.col_max(p);
                if amax < SINGULAR_TOL {
                    return Err(Singular { position: p });
                }
                for &(r, v) in &self.cols[p] {
                    if v.abs() >= PIVOT_THRESHOLD * amax {
                        let cost = (self.rows[r].len() - 1) * (n - 1);
                        if best.is_none_or(|b| cost < b.0) {
                            best = Some((cost, r, p));
                        }
                    }
                }
                seen += 1;
                if seen >= SEARCH_COLS || best.is_some_and(|b| b.0 == 0) {
                    break 'search;
                }
            }
        }
        match best {
            Some((_, r, p)) => Ok((r, p)),
            None => {
                let p = (0..self.cols.len()).find(|&p| !self.col_done[p]).unwrap_or(0);
                Err(Singular { position: p })
            }
        }
    }
}

impl LuFactors {
    /// Factors the square matrix whose `p`-th column is `columns[p]`.
    pub(crate) fn factor(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        Self::factor_inner(m, columns, None).map(|(lu, _)| lu)
    }

    /// Like [`factor`](Self::factor), but positions that cannot be pivoted
    /// are given the unit column `sign(r) e_r` of a row `r` left without a
    /// pivot. Returns the `(position, row)` substitutions made.
    pub(crate) fn factor_with_repair(
        m: usize,
        columns: &[Vec<(usize, f64)>],
        sign: impl Fn(usize) -> f64,
    ) -> (Self, Vec<(usize, usize)>) {
        Self::factor_inner(m, columns, Some(&sign)).expect("repair never fails")
    }

    fn factor_inner(
        m: usize,
        columns: &[Vec<(usize, f64)>],
        repair: Option<&dyn Fn(usize) -> f64>,
    ) -> Result<(Self, Vec<(usize, usize)>), Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut act = Active {
            cols: Vec::with_capacity(m),
            rows: vec![Vec::new(); m],
            col_done: vec![false; m],
            row_done: vec![false; m],
            col_bucket: Vec::new(),
            row_singletons: Vec::new(),
        };
        let mut w = vec![0.0f64; m];
        let mut mark = vec![NONE; m];
        for (p, col) in columns.iter().enumerate() {
            // merge duplicates and drop zeros
            let mut out = Vec::with_capacity(col.len());
            for &(i, v) in col {
                if mark[i] != p {
                    mark[i] = p;
                    w[i] = 0.0;
                    out.push(i);
                }
                w[i] += v;
            }
            let entries: Vec<(usize, f64)> = out.into_iter().filter(|&i| w[i] != 0.0).map(|i| (i, w[i])).collect();
            for &(i, _) in &entries {
                act.rows[i].push(p);
            }
            act.cols.push(entries);
            act.file_col(p);
        }
        for r in 0..m {
            if act.rows[r].len() == 1 {
                act.row_singletons.push(r);
            }
        }
        w.iter_mut().for_each(|x| *x = 0.0);
        mark.iter_mut().for_each(|x| *x = NONE);

        let mut lu = LuFactors {
            m,
            pivot_row: Vec::with_capacity(m),
            pivot_pos: Vec::with_capacity(m),
            l_cols: Vec::with_capacity(m),
            u_rows: Vec::with_capacity(m),
            u_diag: Vec::with_capacity(m),
        };
        let mut rejected = Vec::new();
        while lu.pivot_row.len() + rejected.len() < m {
            let (r, c) = match (act.choose(), repair) {
                (Ok(rc), _) => rc,
                (Err(e), None) => return Err(e),
                (Err(Singular { position: p }), Some(_)) => {
                    act.col_done[p] = true;
                    for (i, _) in std::mem::take(&mut act.cols[p]) {
                        let row = &mut act.rows[i];
                        if let Some(at) = row.iter().position(|&q| q == p) {
                            row.swap_remove(at);
                        }
                        if row.len() == 1 {
                            act.row_singletons.push(i);
                        }
                    }
                    rejected.push(p);
                    continue;
                }
            };
            let pcol = std::mem::take(&mut act.cols[c]);
            let pivot = pcol.iter().find(|e| e.0 == r).expect("pivot entry").1;
            let lcol: Vec<(usize, f64)> = pcol.iter().filter(|e| e.0 != r).map(|&(i, v)| (i, v / pivot)).collect();
            act.col_done[c] = true;
            act.row_done[r] = true;
            for &(i, _) in &lcol {
                let row = &mut act.rows[i];
                if let Some(at) = row.iter().position(|&q| q == c) {
                    row.swap_remove(at);
                }
                if row.len() == 1 {
                    act.row_singletons.push(i);
                }
            }
            let others = std::mem::take(&mut act.rows[r]);
            let mut urow = Vec::with_capacity(others.len());
            for &j in &others {
                if j == c {
                    continue;
                }
                let col = std::mem::take(&mut act.cols[j]);
                let mut a_rj = 0.0;
                let mut kept = Vec::with_capacity(col.len() + lcol.len());
                for (i, v) in col {
                    if i == r {
                        a_rj = v;
                    } else {
                        mark[i] = j;
                        w[i] = v;
                        kept.push(i);
                    }
                }
                urow.push((j, a_rj));
                if a_rj != 0.0 {
                    for &(i, l) in &lcol {
                        if mark[i] != j {
                            mark[i] = j;
                            w[i] = 0.0;
                            kept.push(i);
                            act.rows[i].push(j);
                        }
                        w[i] -= l * a_rj;
                    }
                }
                let mut entries = Vec::with_capacity(kept.len());
                for i in kept {
                    if w[i].abs() > DROP_TOL {
                        entries.push((i, w[i]));
                    } else {
                        let row = &mut act.rows[i];
                        if let Some(at) = row.iter().position(|&q| q == j) {
                            row.swap_remove(at);
                        }
                        if row.len() == 1 {
                            act.row_singletons.push(i);
                        }
                    }
                    w[i] = 0.0;
                    mark[i] = NONE;
                }
                act.cols[j] = entries;
                act.file_col(j);
            }
            lu.pivot_row.push(r);
            lu.pivot_pos.push(c);
            lu.l_cols.push(lcol);
            lu.u_rows.push(urow);
            lu.u_diag.push(pivot);
        }
        // rows without a pivot take the rejected positions; their unit
        // columns are untouched by the eliminations so far
        let free_rows = (0..m).filter(|&r| !act.row_done[r]);
        let swaps: Vec<(usize, usize)> = rejected.into_iter().zip(free_rows).collect();
        if let Some(sign) = repair {
            if !swaps.is_empty() {
                let mut gone = vec![false; m];
                swaps.iter().for_each(|&(p, _)| gone[p] = true);
                for row in &mut lu.u_rows {
                    row.retain(|&(p, _)| !gone[p]);
                }
            }
            for &(p, r) in &swaps {
                lu.pivot_row.push(r);
                lu.pivot_pos.push(p);
                lu.l_cols.push(Vec::new());
                lu.u_rows.push(Vec::new());
                lu.u_diag.push(sign(r));
            }
        }
        Ok((lu, swaps))
    }

    /// Solves `B z = a`; `a` is indexed by row, the result by basis position.
    pub(crate) fn solve(&self, a: &mut [f64], z: &mut [f64]) {
        for k in 0..self.m {
            let v = a[self.pivot_row[k]];
            if v != 0.0 {
                for &(i, l) in &self.l_cols[k] {
                    a[i] -= l * v;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut s = a[self.pivot_row[k]];
            for &(p, u) in &self.u_rows[k] {
                s -= u * z[p];
            }
            z[self.pivot_pos[k]] = s / self.u_diag[k];
        }
    }

    /// Solves `B^T y = c`; `c` is indexed by basis position, `y` by row.
    pub(crate) fn solve_transposed(&self, c: &[f64], y: &mut [f64]) {
        let mut rest = c.to_vec();
        let mut v = vec![0.0f64; self.m];
        for k in 0..self.m {
            let vk = rest[self.pivot_pos[k]] / self.u_diag[k];
            v[k] = vk;
            if vk != 0.0 {
                for &(p, u) in &self.u_rows[k] {
                    rest[p] -= u * vk;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut s = v[k];
            for &(i, l) in &self.l_cols[k] {
                s -= l * y[i];
            }
            y[self.pivot_row[k]] = s;
        }
    }

    pub(crate) fn nonzeros(&self) -> usize {
        self.l_cols.iter().map(Vec::len).sum::<usize>() + self.u_rows.iter().map(Vec::len).sum::<usize>() + self.m
    }
}

/// One basis change: position `r` replaced, with `alpha = B^{-1} a_q`.
#[derive(Debug, Clone)]
pub(crate) struct Eta {
    r: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

impl Eta {
    pub(crate) fn new(r: usize, alpha: &[f64]) -> Self {
        let others = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != r && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        Eta { r, pivot: alpha[r], others }
    }

    pub(crate) fn apply(&self, z: &mut [f64]) {
        let v = z[self.r] / self.pivot;
        z[self.r] = v;
        if v != 0.0 {
            for &(i, a) in &self.others {
                z[i] -= a * v;
            }
        }
    }

    pub(crate) fn apply_transposed(&self, c: &mut [f64]) {
        let mut s = c[self.r];
        for &(i, a) in &self.others {
            s -= a * c[i];
        }
        c[self.r] = s / self.pivot;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(cols: &[Vec<(usize, f64)>], z: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (p, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                out[i] += v * z[p];
            }
        }
        out
    }

    #[test]
    fn solves_both_directions() {
        let cols = vec![
            vec![(0, 2.0), (2, 1.0)],
            vec![(1, -1.0)],
            vec![(0, 1.0), (1, 3.0), (2, 4.0)],
        ];
        let lu = LuFactors::factor(3, &cols).unwrap();
        let rhs = [1.0, 2.0, 3.0];
        let mut a = rhs;
        let mut z = [0.0; 3];
        lu.solve(&mut a, &mut z);
        let back = dense_mul(&cols, &z, 3);
        for i in 0..3 {
            assert!((back[i] - rhs[i]).abs() < 1e-12);
        }
        let c = [1.0, -2.0, 0.5];
        let mut y = [0.0; 3];
        lu.solve_transposed(&c, &mut y);
        for (p, col) in cols.iter().enumerate() {
            let dot: f64 = col.iter().map(|&(i, v)| v * y[i]).sum();
            assert!((dot - c[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn random_sparse_bases() {
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for trial in 0..200 {
            let m = 1 + (next() % 30) as usize;
            // identity-like columns with random fill, as in simplex bases
            let cols: Vec<Vec<(usize, f64)>> = (0..m)
                .map(|p| {
                    let mut c = vec![(p, 1.0 + (next() % 5) as f64)];
                    for _ in 0..(next() % 4) {
                        let v = (next() % 7) as f64 - 3.0;
                        c.push(((next() % m as u64) as usize, v));
                    }
                    c
                })
                .collect();
            let Ok(lu) = LuFactors::factor(m, &cols) else { continue };
            let rhs: Vec<f64> = (0..m).map(|i| (i as f64 * 0.7 + trial as f64).sin()).collect();
            let mut a = rhs.clone();
            let mut z = vec![0.0; m];
            lu.solve(&mut a, &mut z);
            let back = dense_mul(&cols, &z, m);
            let scale = 1.0 + z.iter().fold(0.0f64, |x, v| x.max(v.abs()));
            for i in 0..m {
                assert!((back[i] - rhs[i]).abs() < 1e-9 * scale, "trial {trial}");
            }
            let mut y = vec![0.0; m];
            lu.solve_transposed(&rhs, &mut y);
            let scale = 1.0 + y.iter().fold(0.0f64, |x, v| x.max(v.abs()));
            for (p, col) in cols.iter().enumerate() {
                let dot: f64 = col.iter().map(|&(i, v)| v * y[i]).sum();
                assert!((dot - rhs[p]).abs() < 1e-9 * scale, "trial {trial}");
            }
        }
    }

    #[test]
    fn detects_singular() {
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)]];
        assert!(LuFactors::factor(2, &cols).is_err());
    }

    #[test]
    fn repair_swaps_in_unit_columns() {
        let mut cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)], vec![]];
        let (lu, swaps) = LuFactors::factor_with_repair(3, &cols, |_| -1.0);
        assert_eq!(swaps.len(), 2);
        for &(p, r) in &swaps {
            cols[p] = vec![(r, -1.0)];
        }
        let rhs = [1.0, 2.0, 3.0];
        let mut a = rhs;
        let mut z = [0.0; 3];
        lu.solve(&mut a, &mut z);
        let back = dense_mul(&cols, &z, 3);
        for i in 0..3 {
            assert!((back[i] - rhs[i]).abs() < 1e-12);
        }
    }
}
