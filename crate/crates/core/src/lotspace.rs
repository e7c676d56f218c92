//! Implicit search over the applicable lot-type space.
//!
//! Every objective used here is separable over sizes except for a linear
//! term in the lot total `|l|`. A suffix table `W[s][r]` holds the cheapest
//! way to fill sizes `s..` with exactly `r` pieces; per total `t`, lot-types
//! are then produced in increasing `(cost, lexicographic)` order by a
//! best-first search whose heuristic is `W` itself (exact, so complete
//! vectors pop in order). Streams for the different totals are merged on
//! `cost - delta * m * t`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::model::{Instance, LotType, LotTypeParams};

const INF: i64 = i64::MAX;

/// Per-size integer cost of each admissible entry value.
#[derive(Clone, Debug)]
pub(crate) struct LotCosts {
    min_c: u32,
    per_size: Vec<Vec<i64>>,
}

impl LotCosts {
    /// `weight * |d_{b,s} - m * v|` for every size and entry value `v`.
    pub(crate) fn deviation(inst: &Instance, b: usize, m: u32, weight: i64) -> Self {
        let p = inst.params();
        let mult = i64::from(m) * inst.scale();
        let per_size = inst
            .demand(b)
            .iter()
            .map(|&d| (p.min_c..=p.max_c).map(|v| weight * (d - mult * i64::from(v)).abs()).collect())
            .collect();
        LotCosts { min_c: p.min_c, per_size }
    }

    #[inline]
    fn at(&self, s: usize, v: u32) -> i64 {
        self.per_size[s][(v - self.min_c) as usize]
    }

    /// Integer cost of a complete lot-type.
    pub(crate) fn of(&self, lot: &LotType) -> i64 {
        lot.entries().iter().enumerate().map(|(s, &v)| self.at(s, v)).sum()
    }
}

/// `W[s][r]`: cheapest cost of sizes `s..n` summing to exactly `r`.
#[derive(Clone, Debug)]
struct SuffixTable {
    width: usize,
    cells: Vec<i64>,
}

impl SuffixTable {
    fn build(params: &LotTypeParams, costs: &LotCosts) -> Self {
        let n = params.num_sizes;
        let width = params.max_t as usize + 1;
        let mut cells = vec![INF; (n + 1) * width];
        cells[n * width] = 0;
        for s in (0..n).rev() {
            for r in 0..width {
                let mut best = INF;
                for v in params.min_c..=params.max_c {
                    let v_us = v as usize;
                    if v_us > r {
                        break;
                    }
                    let rest = cells[(s + 1) * width + r - v_us];
                    if rest == INF {
                        continue;
                    }
                    let c = costs.at(s, v) + rest;
                    if c < best {
                        best = c;
                    }
                }
                cells[s * width + r] = best;
            }
        }
        SuffixTable { width, cells }
    }

    #[inline]
    fn get(&self, s: usize, r: usize) -> i64 {
        self.cells[s * self.width + r]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Partial {
    bound: i64,
    prefix: Vec<u32>,
    cost: i64,
    sum: u32,
}

impl Ord for Partial {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.bound, &self.prefix).cmp(&(other.bound, &other.prefix))
    }
}

impl PartialOrd for Partial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lot-types with total exactly `total`, in increasing `(cost, lex)` order.
#[derive(Clone, Debug)]
struct ExactTotalStream {
    total: u32,
    open: BinaryHeap<Reverse<Partial>>,
}

impl ExactTotalStream {
    fn new(total: u32, table: &SuffixTable) -> Self {
        let mut open = BinaryHeap::new();
        let bound = table.get(0, total as usize);
        if bound != INF {
            open.push(Reverse(Partial { bound, prefix: Vec::new(), cost: 0, sum: 0 }));
        }
        ExactTotalStream { total, open }
    }

    fn next(&mut self, params: &LotTypeParams, costs: &LotCosts, table: &SuffixTable) -> Option<(LotType, i64)> {
        let n = params.num_sizes;
        while let Some(Reverse(node)) = self.open.pop() {
            let j = node.prefix.len();
            if j == n {
                return Some((LotType::new(node.prefix), node.cost));
            }
            for v in params.min_c..=params.max_c {
                let sum = node.sum + v;
                if sum > self.total {
                    break;
                }
                let rest = table.get(j + 1, (self.total - sum) as usize);
                if rest == INF {
                    continue;
                }
                let cost = node.cost + costs.at(j, v);
                let mut prefix = Vec::with_capacity(n);
                prefix.extend_from_slice(&node.prefix);
                prefix.push(v);
                self.open.push(Reverse(Partial { bound: cost + rest, prefix, cost, sum }));
            }
        }
        None
    }
}

#[derive(Clone, Debug)]
struct Head {
    value: f64,
    lot: LotType,
    cost: i64,
    total: u32,
    seeded: bool,
}

impl PartialEq for Head {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Head {}

impl Ord for Head {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.total_cmp(&other.value).then_with(|| self.lot.cmp(&other.lot))
    }
}

impl PartialOrd for Head {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The value `cost - delta * (m * total)` that ranks a lot-type in pricing.
#[inline]
pub(crate) fn priced_value(cost: i64, delta: f64, m: u32, total: u64) -> f64 {
    cost as f64 - delta * (u64::from(m) * total) as f64
}

/// Applicable lot-types in increasing `(value, lex)` order, where
/// `value = cost(l) - delta * m * |l|` and `cost` is separable over sizes.
#[derive(Clone, Debug)]
pub(crate) struct OrderedLotTypes {
    params: LotTypeParams,
    costs: LotCosts,
    table: SuffixTable,
    delta: f64,
    m: u32,
    heads: BinaryHeap<Reverse<Head>>,
    streams: Vec<Option<ExactTotalStream>>,
}

impl OrderedLotTypes {
    /// Plain cost order (`delta = 0`).
    pub(crate) fn new(params: &LotTypeParams, costs: LotCosts, delta: f64) -> Self {
        Self::priced(params, costs, delta, 1)
    }

    pub(crate) fn priced(params: &LotTypeParams, costs: LotCosts, delta: f64, m: u32) -> Self {
        let table = SuffixTable::build(params, &costs);
        let mut heads = BinaryHeap::new();
        let n_totals = params.max_t as usize + 1;
        if params.min_c <= params.max_c && params.min_t <= params.max_t {
            for t in params.min_t..=params.max_t {
                let cost = table.get(0, t as usize);
                if cost == INF {
                    continue;
                }
                let lot = Self::lex_smallest_optimal(params, &costs, &table, t);
                heads.push(Reverse(Head {
                    value: priced_value(cost, delta, m, u64::from(t)),
                    lot,
                    cost,
                    total: t,
                    seeded: true,
                }));
            }
        }
        OrderedLotTypes {
            params: *params,
            costs,
            table,
            delta,
            m,
            heads,
            streams: vec![None; n_totals],
        }
    }

    fn lex_smallest_optimal(params: &LotTypeParams, costs: &LotCosts, table: &SuffixTable, total: u32) -> LotType {
        let mut rem = total as usize;
        let mut entries = Vec::with_capacity(params.num_sizes);
        for s in 0..params.num_sizes {
            let target = table.get(s, rem);
            let mut chosen = None;
            for v in params.min_c..=params.max_c {
                let v_us = v as usize;
                if v_us > rem {
                    break;
                }
                let rest = table.get(s + 1, rem - v_us);
                if rest != INF && costs.at(s, v) + rest == target {
                    chosen = Some(v);
                    break;
                }
            }
            let v = chosen.expect("suffix table is consistent");
            entries.push(v);
            rem -= v as usize;
        }
        LotType::new(entries)
    }

    /// Next lot-type with its integer cost and priced value.
    pub(crate) fn next_priced(&mut self) -> Option<(LotType, i64, f64)> {
        let Reverse(head) = self.heads.pop()?;
        let t = head.total as usize;
        if head.seeded {
            let mut stream = ExactTotalStream::new(head.total, &self.table);
            let first = stream.next(&self.params, &self.costs, &self.table);
            debug_assert_eq!(first.as_ref().map(|f| &f.0), Some(&head.lot));
            self.streams[t] = Some(stream);
        }
        if let Some(stream) = self.streams[t].as_mut() {
            if let Some((lot, cost)) = stream.next(&self.params, &self.costs, &self.table) {
                self.heads.push(Reverse(Head {
                    value: priced_value(cost, self.delta, self.m, u64::from(head.total)),
                    lot,
                    cost,
                    total: head.total,
                    seeded: false,
                }));
            }
        }
        Some((head.lot, head.cost, head.value))
    }

    /// Next lot-type with its integer cost; only meaningful for `delta = 0`.
    pub(crate) fn next_integer(&mut self) -> Option<(LotType, i64)> {
        self.next_priced().map(|(l, c, _)| (l, c))
    }

    /// Integer cost of an arbitrary lot-type under this stream's costs.
    #[allow(dead_code)]
    pub(crate) fn cost_of(&self, lot: &LotType) -> i64 {
        self.costs.of(lot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_applicable_lot_types, validate_instance, RawDemand, RawInstance, RawLotBounds, RawSupply};

    fn instance(demand: &[&str], bounds: (i64, i64, i64, i64), mults: &[i64]) -> Instance {
        validate_instance(&RawInstance {
            sizes: (0..demand.len()).map(|i| format!("s{i}")).collect(),
            branches: vec!["b".into()],
            demand: vec![demand.iter().map(|s| RawDemand::Text(s.to_string())).collect()],
            multiplicities: mults.to_vec(),
            lot_bounds: RawLotBounds { min_c: bounds.0, max_c: bounds.1, min_t: bounds.2, max_t: bounds.3 },
            supply: RawSupply { lo: 0, hi: 100 },
            k: 1,
        })
        .unwrap()
    }

    #[test]
    fn stream_matches_sorted_enumeration() {
        let inst = instance(&["1.3", "0.2", "2.7"], (0, 2, 2, 4), &[1, 2]);
        for &m in inst.multiplicities() {
            for delta in [0.0, 3.5, -2.0, 10.0] {
                let costs = LotCosts::deviation(&inst, 0, m, 1);
                let mut expected: Vec<(f64, LotType)> = enumerate_applicable_lot_types(inst.params(), 1000)
                    .unwrap()
                    .map(|l| {
                        let c: i64 = l
                            .entries()
                            .iter()
                            .zip(inst.demand(0))
                            .map(|(&v, &d)| (d - i64::from(m) * inst.scale() * i64::from(v)).abs())
                            .sum();
                        (c as f64 - delta * (u64::from(m) * l.size()) as f64, l)
                    })
                    .collect();
                expected.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                let mut stream = OrderedLotTypes::priced(inst.params(), costs, delta, m);
                let mut got = Vec::new();
                while let Some((l, _, v)) = stream.next_priced() {
                    got.push((v, l));
                }
                assert_eq!(got, expected, "m={m} delta={delta}");
            }
        }
    }

    #[test]
    fn zero_weight_orders_lexicographically_within_total() {
        let inst = instance(&["1", "1"], (0, 1, 1, 2), &[1]);
        let mut stream = OrderedLotTypes::new(inst.params(), LotCosts::deviation(&inst, 0, 1, 0), 0.0);
        let mut got = Vec::new();
        while let Some((l, c)) = stream.next_integer() {
            assert_eq!(c, 0);
            got.push(l.entries().to_vec());
        }
        assert_eq!(got, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
    }
}
