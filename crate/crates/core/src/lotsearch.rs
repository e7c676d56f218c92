//! Lot-level pricing for lot-types outside the pool.
//!
//! A lot-type `l` is worth opening when `sum_b max(0, -rc0_b(l))` exceeds
//! the reduced cost of `y_l`, where `rc0_b(l)` is the best reduced cost of
//! `x_{b,l,m}` over `m` without a binding-row dual. The sum is maximised by
//! a depth-first search over sizes; each branch contributes an optimistic
//! completion bound taken from per-`(b, m)` suffix tables, and branches
//! whose bound is no longer negative drop out of the subtree.

use rayon::prelude::*;

use crate::model::{Instance, LotType};

pub(crate) struct LotSearch<'a> {
    ns: usize,
    min_c: u32,
    max_c: u32,
    min_t: u32,
    max_t: u32,
    ms: Vec<u32>,
    width: usize,
    /// `w[((b * nm + mi) * ns + s) * width + v - min_c]`
    w: Vec<f64>,
    /// Best completion of sizes `s..` given prefix total `t0`:
    /// `rm[((b * nm + mi) * (ns + 1) + s) * (max_t + 1) + t0]`.
    rm: Vec<f64>,
    alpha: Vec<f64>,
    branches: Vec<usize>,
    skip: &'a (dyn Fn(&LotType) -> bool + Sync),
}

pub(crate) struct Found {
    pub score: f64,
    pub lot: LotType,
}

impl<'a> LotSearch<'a> {
    /// `weight` scales the deviation cost (0 in Farkas mode); `branches`
    /// lists the branches that may take a new lot-type.
    pub(crate) fn new(
        inst: &Instance,
        alpha: &[f64],
        delta: f64,
        weight: i64,
        branches: Vec<usize>,
        skip: &'a (dyn Fn(&LotType) -> bool + Sync),
    ) -> Self {
        let p = inst.params();
        let ns = p.num_sizes;
        let ms = inst.multiplicities().to_vec();
        let nm = ms.len();
        let width = (p.max_c - p.min_c + 1) as usize;
        let tw = p.max_t as usize + 1;
        let nb = inst.num_branches();
        let mut w = vec![0.0; nb * nm * ns * width];
        let mut rm = vec![f64::INFINITY; nb * nm * (ns + 1) * tw];
        let mut suf = vec![f64::INFINITY; (ns + 1) * tw];
        for &b in &branches {
            let d = inst.demand(b);
            for (mi, &m) in ms.iter().enumerate() {
                let combo = b * nm + mi;
                let mult = i64::from(m) * inst.scale();
                for s in 0..ns {
                    for v in p.min_c..=p.max_c {
                        let c = weight * (d[s] - mult * i64::from(v)).abs();
                        w[(combo * ns + s) * width + (v - p.min_c) as usize] =
                            c as f64 - delta * f64::from(m * v);
                    }
                }
                suf.fill(f64::INFINITY);
                suf[ns * tw] = 0.0;
                for s in (0..ns).rev() {
                    for t in 0..tw {
                        let mut best = f64::INFINITY;
                        for v in p.min_c..=p.max_c.min(t as u32) {
                            let rest = suf[(s + 1) * tw + t - v as usize];
                            if rest < f64::INFINITY {
                                best = best.min(w[(combo * ns + s) * width + (v - p.min_c) as usize] + rest);
                            }
                        }
                        suf[s * tw + t] = best;
                    }
                }
                for s in 0..=ns {
                    for t0 in 0..tw {
                        let lo = (p.min_t as usize).saturating_sub(t0);
                        let hi = p.max_t as usize - t0;
                        let best = (lo..=hi).map(|t| suf[s * tw + t]).fold(f64::INFINITY, f64::min);
                        rm[(combo * (ns + 1) + s) * tw + t0] = best;
                    }
                }
            }
        }
        LotSearch {
            ns,
            min_c: p.min_c,
            max_c: p.max_c,
            min_t: p.min_t,
            max_t: p.max_t,
            ms,
            width,
            w,
            rm,
            alpha: alpha.to_vec(),
            branches,
            skip,
        }
    }

    /// Up to `limit` lot-types with score above `threshold`, best first.
    pub(crate) fn top(&self, threshold: f64, limit: usize) -> Vec<Found> {
        if limit == 0 || self.branches.is_empty() {
            return Vec::new();
        }
        let nm = self.ms.len();
        let nb = self.alpha.len();
        let firsts: Vec<u32> = (self.min_c..=self.max_c).collect();
        let mut all: Vec<Found> = firsts
            .par_iter()
            .flat_map_iter(|&v0| {
                let mut st = Dfs {
                    search: self,
                    prefix: vec![vec![0.0; nb * nm]; self.ns + 1],
                    entries: vec![0; self.ns],
                    threshold,
                    limit,
                    found: Vec::new(),
                };
                let active = self.branches.clone();
                st.visit(0, 0, v0, &active);
                st.found
            })
            .collect();
        sort_found(&mut all);
        all.truncate(limit);
        all
    }
}

fn sort_found(v: &mut [Found]) {
    v.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.lot.cmp(&b.lot)));
}

struct Dfs<'s, 'a> {
    search: &'s LotSearch<'a>,
    prefix: Vec<Vec<f64>>,
    entries: Vec<u32>,
    threshold: f64,
    limit: usize,
    found: Vec<Found>,
}

impl Dfs<'_, '_> {
    fn bar(&self) -> f64 {
        if self.found.len() >= self.limit {
            self.found.iter().map(|f| f.score).fold(f64::INFINITY, f64::min).max(self.threshold)
        } else {
            self.threshold
        }
    }

    /// Fixes size `s` to `v` on top of a prefix with total `t0`.
    fn visit(&mut self, s: usize, t0: u32, v: u32, active: &[usize]) {
        let se = self.search;
        let ns = se.ns;
        let t = t0 + v;
        let rest = (ns - s - 1) as u32;
        if t + rest * se.min_c > se.max_t || t + rest * se.max_c < se.min_t {
            return;
        }
        self.entries[s] = v;
        let nm = se.ms.len();
        let tw = se.max_t as usize + 1;
        let (head, tail) = self.prefix.split_at_mut(s + 1);
        let (parent, child) = (&head[s], &mut tail[0]);
        let mut next = Vec::with_capacity(active.len());
        let mut ub = 0.0;
        for &b in active {
            let mut best = f64::INFINITY;
            for mi in 0..nm {
                let combo = b * nm + mi;
                let p = parent[combo] + se.w[(combo * ns + s) * se.width + (v - se.min_c) as usize];
                child[combo] = p;
                best = best.min(p + se.rm[(combo * (ns + 1) + s + 1) * tw + t as usize]);
            }
            let gain = se.alpha[b] - best;
            if gain > 0.0 {
                ub += gain;
                next.push(b);
            }
        }
        if ub <= self.bar() {
            return;
        }
        if s + 1 == ns {
            let lot = LotType::new(self.entries.clone());
            if (se.skip)(&lot) {
                return;
            }
            self.found.push(Found { score: ub, lot });
            if self.found.len() > self.limit {
                sort_found(&mut self.found);
                self.found.truncate(self.limit);
            }
            return;
        }
        for v2 in se.min_c..=se.max_c {
            self.visit(s + 1, t, v2, &next);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_applicable_lot_types, validate_instance, RawDemand, RawInstance, RawLotBounds, RawSupply};

    fn brute(inst: &Instance, alpha: &[f64], delta: f64, weight: i64, skip: &dyn Fn(&LotType) -> bool) -> Vec<(f64, LotType)> {
        let mut out = Vec::new();
        for lot in enumerate_applicable_lot_types(inst.params(), 1_000_000).unwrap() {
            if skip(&lot) {
                continue;
            }
            let score: f64 = (0..inst.num_branches())
                .map(|b| {
                    let best = inst
                        .multiplicities()
                        .iter()
                        .map(|&m| {
                            let c = weight * crate::model::cost(inst, b, &lot, m);
                            c as f64 - delta * f64::from(m) * lot.size() as f64
                        })
                        .fold(f64::INFINITY, f64::min);
                    (alpha[b] - best).max(0.0)
                })
                .sum();
            out.push((score, lot));
        }
        out
    }

    #[test]
    fn matches_enumeration() {
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = move |n: u64| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state % n
        };
        let mut hits = 0;
        for case in 0..150 {
            let ns = 1 + next(4) as usize;
            let nb = 1 + next(5) as usize;
            let min_c = next(2) as i64;
            let max_c = min_c + 1 + next(3) as i64;
            let min_t = next(3) as i64;
            let max_t = (min_t + 1 + next(8) as i64).min(max_c * ns as i64).max(min_t);
            let mults: Vec<i64> = match next(3) {
                0 => vec![1],
                1 => vec![1, 2],
                _ => vec![2, 3, 4],
            };
            let raw = RawInstance {
                sizes: (0..ns).map(|i| format!("s{i}")).collect(),
                branches: (0..nb).map(|i| format!("b{i}")).collect(),
                demand: (0..nb)
                    .map(|_| (0..ns).map(|_| RawDemand::Text(format!("{}.{}", next(8), next(10)))).collect())
                    .collect(),
                multiplicities: mults,
                lot_bounds: RawLotBounds { min_c, max_c, min_t, max_t },
                supply: RawSupply { lo: 0, hi: 1000 },
                k: 1,
            };
            let Ok(inst) = validate_instance(&raw) else { continue };
            let alpha: Vec<f64> = (0..nb).map(|_| next(300) as f64 - 50.0).collect();
            let delta = (next(40) as f64 - 20.0) / 4.0;
            let weight = i64::from(case % 5 != 0);
            let pool: Vec<LotType> = enumerate_applicable_lot_types(inst.params(), 1_000_000).unwrap().step_by(3).collect();
            let skip = |l: &LotType| pool.contains(l);
            let want = brute(&inst, &alpha, delta, weight, &skip);
            let thr = next(100) as f64;
            let limit = 1 + next(6) as usize;
            let branches: Vec<usize> = (0..nb).collect();
            let got = LotSearch::new(&inst, &alpha, delta, weight, branches, &skip).top(thr, limit);
            let mut above: Vec<&(f64, LotType)> = want.iter().filter(|w| w.0 > thr + 1e-9).collect();
            above.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            let expect = above.len().min(limit);
            assert_eq!(got.len(), expect, "case {case}");
            hits += usize::from(expect > 0);
            for (g, w) in got.iter().zip(&above) {
                assert!((g.score - w.0).abs() < 1e-6, "case {case}: score {} vs {}", g.score, w.0);
                assert!(!skip(&g.lot));
            }
        }
        assert!(hits > 30, "only {hits} cases with improving lot-types");
    }
}
