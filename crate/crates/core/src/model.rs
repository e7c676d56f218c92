//! Problem data for lot-type design: instances, lot-types, the per-branch
//! deviation cost and the closed-form size formulas of the full model.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::lotspace::{LotCosts, OrderedLotTypes};
use crate::ModelError;

/// Largest number of decimal places accepted for demand values.
pub const MAX_DEMAND_DECIMALS: u32 = 6;

/// A lot-type: pieces per size, indexed parallel to [`Instance::sizes`].
///
/// Ordering is lexicographic over the entries, which is also the canonical
/// order used for every set of lot-types in the solver.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LotType(Vec<u32>);

impl LotType {
    pub fn new(entries: Vec<u32>) -> Self {
        LotType(entries)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn num_sizes(&self) -> usize {
        self.0.len()
    }

    /// Total number of pieces in one lot.
    pub fn size(&self) -> u64 {
        self.0.iter().map(|&v| u64::from(v)).sum()
    }
}

impl fmt::Display for LotType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Returns `|l|`, the number of pieces in one lot of `lot`.
pub fn lot_size(lot: &LotType) -> u64 {
    lot.size()
}

/// Bounds describing the applicable lot-type space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LotTypeParams {
    pub num_sizes: usize,
    pub min_c: u32,
    pub max_c: u32,
    pub min_t: u32,
    pub max_t: u32,
}

impl LotTypeParams {
    pub fn new(num_sizes: usize, min_c: u32, max_c: u32, min_t: u32, max_t: u32) -> Self {
        LotTypeParams { num_sizes, min_c, max_c, min_t, max_t }
    }

    /// Lists every violated bound relation; empty when the space is non-empty.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.min_c > self.max_c {
            out.push("min_c > max_c".to_string());
        }
        if self.min_t > self.max_t {
            out.push("min_t > max_t".to_string());
        }
        let n = self.num_sizes as u64;
        if u64::from(self.max_t) < n * u64::from(self.min_c) {
            out.push(format!(
                "max_t ({}) < |S|*min_c ({}): no applicable lot-type",
                self.max_t,
                n * u64::from(self.min_c)
            ));
        }
        if u64::from(self.min_t) > n * u64::from(self.max_c) {
            out.push(format!(
                "min_t ({}) > |S|*max_c ({}): no applicable lot-type",
                self.min_t,
                n * u64::from(self.max_c)
            ));
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }

    pub fn contains(&self, lot: &LotType) -> bool {
        lot.num_sizes() == self.num_sizes
            && lot.entries().iter().all(|&v| v >= self.min_c && v <= self.max_c)
            && (u64::from(self.min_t)..=u64::from(self.max_t)).contains(&lot.size())
    }

    fn entry_range(&self) -> std::ops::RangeInclusive<u32> {
        self.min_c..=self.max_c
    }
}

/// Exact count of applicable lot-types, by a convolution over sizes whose
/// state is the partial total (totals above `max_t` are dropped).
pub fn count_applicable_lot_types(params: &LotTypeParams) -> BigUint {
    if params.min_c > params.max_c || params.min_t > params.max_t {
        return BigUint::from(0u32);
    }
    let cap = params.max_t as usize;
    let mut ways = vec![BigUint::from(0u32); cap + 1];
    ways[0] = BigUint::from(1u32);
    for _ in 0..params.num_sizes {
        let mut next = vec![BigUint::from(0u32); cap + 1];
        for (t, w) in ways.iter().enumerate() {
            if w == &BigUint::from(0u32) {
                continue;
            }
            for v in params.entry_range() {
                let nt = t + v as usize;
                if nt > cap {
                    break;
                }
                next[nt] += w;
            }
        }
        ways = next;
    }
    ways[params.min_t as usize..=cap].iter().sum()
}

/// Lexicographic stream of all applicable lot-types.
#[derive(Clone, Debug)]
pub struct ApplicableLotTypes {
    params: LotTypeParams,
    current: Option<Vec<u32>>,
    started: bool,
}

impl ApplicableLotTypes {
    fn new(params: LotTypeParams) -> Self {
        ApplicableLotTypes { params, current: None, started: false }
    }

    /// Whether a prefix with total `sum` and `rest` open positions can still
    /// be completed to an applicable lot-type.
    fn completable(&self, sum: u64, rest: usize) -> bool {
        let p = &self.params;
        let rest = rest as u64;
        sum + rest * u64::from(p.min_c) <= u64::from(p.max_t)
            && sum + rest * u64::from(p.max_c) >= u64::from(p.min_t)
    }

    /// Fills positions `from..` with the lexicographically smallest completion.
    fn fill_smallest(&self, entries: &mut Vec<u32>, from: usize) -> bool {
        let p = &self.params;
        let n = p.num_sizes;
        entries.truncate(from);
        let mut sum: u64 = entries.iter().map(|&v| u64::from(v)).sum();
        if !self.completable(sum, n - from) {
            return false;
        }
        for j in from..n {
            let after = (n - j - 1) as u64;
            let need = i64::from(p.min_t) - sum as i64 - (after * u64::from(p.max_c)) as i64;
            let v = (need.max(i64::from(p.min_c))) as u32;
            entries.push(v);
            sum += u64::from(v);
        }
        true
    }
}

impl Iterator for ApplicableLotTypes {
    type Item = LotType;

    fn next(&mut self) -> Option<LotType> {
        let n = self.params.num_sizes;
        if self.params.min_c > self.params.max_c {
            return None;
        }
        if !self.started {
            self.started = true;
            let mut first = Vec::with_capacity(n);
            if !self.fill_smallest(&mut first, 0) {
                return None;
            }
            self.current = Some(first.clone());
            return Some(LotType(first));
        }
        let mut cur = self.current.take()?;
        for i in (0..n).rev() {
            let prefix: u64 = cur[..i].iter().map(|&x| u64::from(x)).sum();
            let rest = n - i - 1;
            for v in cur[i] + 1..=self.params.max_c {
                let sum = prefix + u64::from(v);
                if sum + rest as u64 * u64::from(self.params.min_c) > u64::from(self.params.max_t) {
                    break;
                }
                if self.completable(sum, rest) {
                    cur[i] = v;
                    self.fill_smallest(&mut cur, i + 1);
                    self.current = Some(cur.clone());
                    return Some(LotType(cur));
                }
            }
        }
        None
    }
}

/// Enumerates the applicable lot-types in lexicographic order, refusing when
/// their number exceeds `cap`.
pub fn enumerate_applicable_lot_types(
    params: &LotTypeParams,
    cap: u64,
) -> Result<ApplicableLotTypes, ModelError> {
    let count = count_applicable_lot_types(params);
    if count > BigUint::from(cap) {
        return Err(ModelError::EnumerationCap { count: count.to_string(), cap });
    }
    Ok(ApplicableLotTypes::new(*params))
}

/// Variable and constraint counts of the complete integer program over all
/// applicable lot-types.
pub fn complete_ilp_dimensions(
    num_branches: u128,
    num_lot_types: u128,
    num_multiplicities: u128,
) -> (u128, u128) {
    let variables = num_branches * num_lot_types * num_multiplicities + num_lot_types;
    // assignment rows, k-row, two supply rows, binding rows
    let constraints = num_branches + 1 + 2 + num_branches * num_lot_types;
    (variables, constraints)
}

/// Demand entry in its raw form: a decimal string or a JSON number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawDemand {
    Text(String),
    Number(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawLotBounds {
    pub min_c: i64,
    pub max_c: i64,
    pub min_t: i64,
    pub max_t: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSupply {
    pub lo: i64,
    pub hi: i64,
}

/// Unvalidated instance description, field-for-field the on-disk JSON layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawInstance {
    pub sizes: Vec<String>,
    pub branches: Vec<String>,
    pub demand: Vec<Vec<RawDemand>>,
    pub multiplicities: Vec<i64>,
    pub lot_bounds: RawLotBounds,
    pub supply: RawSupply,
    pub k: i64,
}

/// Every invariant an instance description violates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// A validated lot-type design instance. Demand is held as exact integers in
/// units of `10^-scale_exp` pieces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    branches: Vec<String>,
    sizes: Vec<String>,
    demand: Vec<Vec<i64>>,
    scale_exp: u32,
    multiplicities: Vec<u32>,
    params: LotTypeParams,
    supply_lo: u64,
    supply_hi: u64,
    k: usize,
}

/// A parsed decimal `mantissa * 10^-decimals`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Decimal {
    mantissa: i128,
    decimals: u32,
}

fn parse_decimal(text: &str) -> Result<Decimal, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    let (body, exp) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = s[pos + 1..].parse().map_err(|_| format!("bad exponent in {s:?}"))?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (neg, body) = match body.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, body.strip_prefix('+').unwrap_or(body)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("not a number: {s:?}"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(format!("not a decimal number: {s:?}"));
    }
    let frac_trimmed = frac_part.trim_end_matches('0');
    let digits = format!("{int_part}{frac_trimmed}");
    let mut mantissa: i128 = if digits.is_empty() {
        0
    } else {
        digits.parse().map_err(|_| format!("number out of range: {s:?}"))?
    };
    let mut decimals = frac_trimmed.len() as i64 - i64::from(exp);
    if decimals < 0 {
        let factor = 10i128
            .checked_pow((-decimals) as u32)
            .ok_or_else(|| format!("number out of range: {s:?}"))?;
        mantissa = mantissa.checked_mul(factor).ok_or_else(|| format!("number out of range: {s:?}"))?;
        decimals = 0;
    }
    if mantissa == 0 {
        decimals = 0;
    }
    if neg && mantissa != 0 {
        mantissa = -mantissa;
    }
    Ok(Decimal { mantissa, decimals: decimals as u32 })
}

fn raw_demand_text(d: &RawDemand) -> String {
    match d {
        RawDemand::Text(s) => s.clone(),
        RawDemand::Number(x) => format!("{x}"),
    }
}

/// Validates a raw description, rescaling demand to exact integers.
pub fn validate_instance(raw: &RawInstance) -> Result<Instance, ValidationReport> {
    let mut errors = Vec::new();

    let nb = raw.branches.len();
    let ns = raw.sizes.len();
    if nb == 0 {
        errors.push("no branches".to_string());
    }
    if ns == 0 {
        errors.push("no sizes".to_string());
    }
    let distinct: BTreeSet<&String> = raw.branches.iter().collect();
    if distinct.len() != nb {
        errors.push("duplicate branch identifiers".to_string());
    }
    let distinct: BTreeSet<&String> = raw.sizes.iter().collect();
    if distinct.len() != ns {
        errors.push("duplicate size labels".to_string());
    }

    let b = &raw.lot_bounds;
    for (name, v) in [("min_c", b.min_c), ("max_c", b.max_c), ("min_t", b.min_t), ("max_t", b.max_t)] {
        if v < 0 {
            errors.push(format!("{name} < 0"));
        } else if v > i64::from(u32::MAX) {
            errors.push(format!("{name} too large"));
        }
    }
    let bounds_ok = [b.min_c, b.max_c, b.min_t, b.max_t]
        .iter()
        .all(|&v| (0..=i64::from(u32::MAX)).contains(&v));
    let params = LotTypeParams::new(ns, b.min_c as u32, b.max_c as u32, b.min_t as u32, b.max_t as u32);
    if bounds_ok {
        errors.extend(params.violations());
    }

    if raw.supply.lo < 0 {
        errors.push("supply lo < 0".to_string());
    }
    if raw.supply.lo > raw.supply.hi {
        errors.push("supply lo > supply hi".to_string());
    }
    if raw.k < 1 {
        errors.push("k < 1".to_string());
    }

    if raw.multiplicities.is_empty() {
        errors.push("multiplicity set is empty".to_string());
    }
    let mut mults = BTreeSet::new();
    for &m in &raw.multiplicities {
        if m < 1 {
            errors.push(format!("multiplicity {m} < 1"));
        } else if m > i64::from(u32::MAX) {
            errors.push(format!("multiplicity {m} too large"));
        } else if !mults.insert(m as u32) {
            errors.push(format!("duplicate multiplicity {m}"));
        }
    }

    let mut parsed: Vec<Vec<Decimal>> = Vec::with_capacity(nb);
    if raw.demand.len() != nb {
        errors.push(format!("demand has {} rows, expected {nb}", raw.demand.len()));
    }
    for (bi, row) in raw.demand.iter().enumerate() {
        if row.len() != ns {
            errors.push(format!("demand row {bi} has {} entries, expected {ns}", row.len()));
        }
        let mut prow = Vec::with_capacity(row.len());
        for (si, d) in row.iter().enumerate() {
            if let RawDemand::Number(x) = d {
                if !x.is_finite() {
                    errors.push(format!("demand[{bi}][{si}] is not finite"));
                    continue;
                }
            }
            match parse_decimal(&raw_demand_text(d)) {
                Ok(dec) if dec.mantissa < 0 => errors.push(format!("demand[{bi}][{si}] is negative")),
                Ok(dec) if dec.decimals > MAX_DEMAND_DECIMALS => errors.push(format!(
                    "demand[{bi}][{si}] has {} decimal places, at most {MAX_DEMAND_DECIMALS} supported",
                    dec.decimals
                )),
                Ok(dec) => prow.push(dec),
                Err(e) => errors.push(format!("demand[{bi}][{si}]: {e}")),
            }
        }
        parsed.push(prow);
    }

    if !errors.is_empty() {
        return Err(ValidationReport { errors });
    }

    let scale_exp = parsed.iter().flatten().map(|d| d.decimals).max().unwrap_or(0);
    let mut demand = Vec::with_capacity(nb);
    for (bi, row) in parsed.iter().enumerate() {
        let mut out = Vec::with_capacity(ns);
        for (si, d) in row.iter().enumerate() {
            let v = d.mantissa * 10i128.pow(scale_exp - d.decimals);
            match i64::try_from(v) {
                Ok(v) if v < (1i64 << 52) => out.push(v),
                _ => errors.push(format!("demand[{bi}][{si}] out of range")),
            }
        }
        demand.push(out);
    }
    if !errors.is_empty() {
        return Err(ValidationReport { errors });
    }

    Ok(Instance {
        branches: raw.branches.clone(),
        sizes: raw.sizes.clone(),
        demand,
        scale_exp,
        multiplicities: mults.into_iter().collect(),
        params,
        supply_lo: raw.supply.lo as u64,
        supply_hi: raw.supply.hi as u64,
        k: raw.k as usize,
    })
}

impl Instance {
    pub fn branches(&self) -> &[String] {
        &self.branches
    }

    pub fn sizes(&self) -> &[String] {
        &self.sizes
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn num_sizes(&self) -> usize {
        self.sizes.len()
    }

    /// Scaled demand row of branch `b`.
    pub fn demand(&self, b: usize) -> &[i64] {
        &self.demand[b]
    }

    /// Decimal exponent `p` of the demand scale `10^p`.
    pub fn scale_exp(&self) -> u32 {
        self.scale_exp
    }

    pub fn scale(&self) -> i64 {
        10i64.pow(self.scale_exp)
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.multiplicities
    }

    pub fn params(&self) -> &LotTypeParams {
        &self.params
    }

    pub fn supply_lo(&self) -> u64 {
        self.supply_lo
    }

    pub fn supply_hi(&self) -> u64 {
        self.supply_hi
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Soft warnings: supply windows no assignment can possibly meet.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let nb = self.branches.len() as u64;
        let m_min = u64::from(*self.multiplicities.first().unwrap_or(&1));
        let m_max = u64::from(*self.multiplicities.last().unwrap_or(&1));
        let least = nb * u64::from(self.params.min_t) * m_min;
        let most = nb * u64::from(self.params.max_t) * m_max;
        if least > self.supply_hi {
            out.push(format!("smallest possible supply {least} exceeds supply hi {}", self.supply_hi));
        }
        if most < self.supply_lo {
            out.push(format!("largest possible supply {most} is below supply lo {}", self.supply_lo));
        }
        out
    }

    /// Formats a scaled demand/cost value as a decimal string.
    pub fn format_scaled(&self, value: i64) -> String {
        format_scaled(value, self.scale_exp)
    }

    /// The raw description this instance was validated from, with demand
    /// written as decimal strings at the instance scale.
    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            sizes: self.sizes.clone(),
            branches: self.branches.clone(),
            demand: self
                .demand
                .iter()
                .map(|row| row.iter().map(|&v| RawDemand::Text(self.format_scaled(v))).collect())
                .collect(),
            multiplicities: self.multiplicities.iter().map(|&m| i64::from(m)).collect(),
            lot_bounds: RawLotBounds {
                min_c: i64::from(self.params.min_c),
                max_c: i64::from(self.params.max_c),
                min_t: i64::from(self.params.min_t),
                max_t: i64::from(self.params.max_t),
            },
            supply: RawSupply { lo: self.supply_lo as i64, hi: self.supply_hi as i64 },
            k: self.k as i64,
        }
    }
}

pub fn format_scaled(value: i64, scale_exp: u32) -> String {
    if scale_exp == 0 {
        return value.to_string();
    }
    let scale = 10i64.pow(scale_exp);
    let sign = if value < 0 { "-" } else { "" };
    let v = value.unsigned_abs();
    let s = scale as u64;
    format!("{sign}{}.{:0width$}", v / s, v % s, width = scale_exp as usize)
}

/// Deviation `sum_s |d_{b,s} - m * l_s|` in scaled units.
pub fn cost(inst: &Instance, b: usize, lot: &LotType, m: u32) -> i64 {
    let scale = inst.scale();
    let mult = i64::from(m) * scale;
    inst.demand[b]
        .iter()
        .zip(lot.entries())
        .map(|(&d, &l)| (d - mult * i64::from(l)).abs())
        .sum()
}

/// The multiplicity minimizing the deviation of `lot` at branch `b`,
/// smallest on ties.
pub fn best_multiplicity(inst: &Instance, b: usize, lot: &LotType) -> u32 {
    let mut best = (i64::MAX, 0u32);
    for &m in &inst.multiplicities {
        let c = cost(inst, b, lot, m);
        if c < best.0 {
            best = (c, m);
        }
    }
    best.1
}

/// `min_m cost(b, lot, m)`.
pub fn fit(inst: &Instance, b: usize, lot: &LotType) -> i64 {
    inst.multiplicities.iter().map(|&m| cost(inst, b, lot, m)).min().unwrap_or(i64::MAX)
}

/// The `n` best fitting lot-types for branch `b` by `fit`, ties broken
/// lexicographically, found without enumerating the lot-type space.
pub fn top_n_lot_types(inst: &Instance, b: usize, n: usize) -> Result<Vec<(LotType, i64)>, ModelError> {
    if !inst.params.is_valid() {
        return Err(ModelError::EmptyLotTypeSpace);
    }
    let mut streams: Vec<OrderedLotTypes> = inst
        .multiplicities
        .iter()
        .map(|&m| OrderedLotTypes::new(&inst.params, LotCosts::deviation(inst, b, m, 1), 0.0))
        .collect();
    // heads ordered by (fit, lot); each lot-type surfaces first at its best m
    let mut heads: std::collections::BTreeSet<(i64, LotType, usize)> = BTreeSet::new();
    for (i, s) in streams.iter_mut().enumerate() {
        if let Some((lot, c)) = s.next_integer() {
            heads.insert((c, lot, i));
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let Some((c, lot, i)) = heads.pop_first() else { break };
        if seen.insert(lot.clone()) {
            out.push((lot, c));
        }
        if let Some((next, nc)) = streams[i].next_integer() {
            heads.insert((nc, next, i));
        }
    }
    if out.is_empty() {
        return Err(ModelError::EmptyLotTypeSpace);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(demand: &[&[&str]], mults: &[i64], bounds: (i64, i64, i64, i64)) -> RawInstance {
        let ns = demand.first().map_or(0, |r| r.len());
        RawInstance {
            sizes: (0..ns).map(|i| format!("s{i}")).collect(),
            branches: (0..demand.len()).map(|i| format!("b{i}")).collect(),
            demand: demand
                .iter()
                .map(|r| r.iter().map(|s| RawDemand::Text(s.to_string())).collect())
                .collect(),
            multiplicities: mults.to_vec(),
            lot_bounds: RawLotBounds { min_c: bounds.0, max_c: bounds.1, min_t: bounds.2, max_t: bounds.3 },
            supply: RawSupply { lo: 0, hi: 1000 },
            k: 2,
        }
    }

    fn one_branch(d: &[&str], mults: &[i64]) -> Instance {
        validate_instance(&raw(&[d], mults, (0, 5, 0, 30))).unwrap()
    }

    #[test]
    fn rejects_inverted_piece_bounds() {
        let err = validate_instance(&raw(&[&["1", "2"]], &[1], (1, 0, 0, 4))).unwrap_err();
        assert!(err.errors.iter().any(|e| e == "min_c > max_c"), "{err}");
    }

    #[test]
    fn reports_every_violation() {
        let mut r = raw(&[&["1", "-2"]], &[0, 1, 1], (0, 2, 0, 4));
        r.k = 0;
        r.supply = RawSupply { lo: 10, hi: 5 };
        let err = validate_instance(&r).unwrap_err();
        let text = err.to_string();
        for needle in ["k < 1", "supply lo > supply hi", "multiplicity 0 < 1", "duplicate multiplicity 1", "negative"] {
            assert!(text.contains(needle), "missing {needle:?} in {text}");
        }
    }

    #[test]
    fn scale_is_max_decimals() {
        let inst = one_branch(&["1.1", "2", "1.8", "0.9"], &[1]);
        assert_eq!(inst.scale_exp(), 1);
        assert_eq!(inst.demand(0), &[11, 20, 18, 9]);
        let inst = one_branch(&["1.25", "2", "1.8", "0.900"], &[1]);
        assert_eq!(inst.scale_exp(), 2);
        assert_eq!(inst.demand(0), &[125, 200, 180, 90]);
    }

    #[test]
    fn too_many_decimals_is_rejected() {
        let err = validate_instance(&raw(&[&["0.1234567"]], &[1], (0, 2, 0, 2))).unwrap_err();
        assert!(err.to_string().contains("decimal places"));
    }

    #[test]
    fn numbers_and_exponents_parse() {
        assert_eq!(parse_decimal("1e-3").unwrap(), Decimal { mantissa: 1, decimals: 3 });
        assert_eq!(parse_decimal("2.50E1").unwrap(), Decimal { mantissa: 25, decimals: 0 });
        assert_eq!(parse_decimal("0.000").unwrap(), Decimal { mantissa: 0, decimals: 0 });
        assert!(parse_decimal("1,5").is_err());
        assert!(parse_decimal("abc").is_err());
    }

    #[test]
    fn table_one_instance_five_shape_is_accepted() {
        let mut r = raw(&vec![&["1"; 12][..]; 682], &[1, 2, 3], (0, 5, 12, 30));
        r.supply = RawSupply { lo: 15_500, hi: 16_200 };
        r.k = 5;
        let inst = validate_instance(&r).unwrap();
        assert_eq!(inst.num_branches(), 682);
        assert_eq!(inst.num_sizes(), 12);
        assert!(inst.warnings().is_empty());
    }

    #[test]
    fn unreachable_supply_window_warns() {
        let mut r = raw(&[&["1", "1"]], &[1], (0, 2, 1, 4));
        r.supply = RawSupply { lo: 100, hi: 200 };
        let inst = validate_instance(&r).unwrap();
        assert_eq!(inst.warnings().len(), 1);
    }

    #[test]
    fn lot_sizes() {
        assert_eq!(lot_size(&LotType::new(vec![1, 2, 2, 1])), 6);
        assert_eq!(lot_size(&LotType::new(vec![0, 0, 0])), 0);
        assert_eq!(lot_size(&LotType::new(vec![5; 6])), 30);
    }

    #[test]
    fn cost_examples() {
        let l = LotType::new(vec![1, 2, 2, 1]);
        let inst = one_branch(&["1.1", "2.0", "1.8", "0.9"], &[1, 2, 3]);
        assert_eq!(cost(&inst, 0, &l, 1), 4);
        let inst = one_branch(&["2", "4", "4", "2"], &[1, 2, 3]);
        assert_eq!(cost(&inst, 0, &l, 2), 0);
        let inst = one_branch(&["0", "0", "0", "0"], &[1, 2, 3]);
        assert_eq!(cost(&inst, 0, &l, 3), 18);
    }

    #[test]
    fn lot_type_count_from_large_space() {
        let p = LotTypeParams::new(12, 0, 5, 12, 30);
        assert_eq!(count_applicable_lot_types(&p), BigUint::from(1_159_533_584u64));
    }

    #[test]
    fn lot_type_count_small_cases() {
        assert_eq!(count_applicable_lot_types(&LotTypeParams::new(4, 3, 3, 12, 12)), BigUint::from(1u32));
        assert_eq!(count_applicable_lot_types(&LotTypeParams::new(2, 0, 1, 0, 2)), BigUint::from(4u32));
        assert_eq!(count_applicable_lot_types(&LotTypeParams::new(2, 2, 1, 0, 2)), BigUint::from(0u32));
    }

    #[test]
    fn enumeration_examples() {
        let all: Vec<_> = enumerate_applicable_lot_types(&LotTypeParams::new(2, 0, 1, 0, 2), 100)
            .unwrap()
            .map(|l| l.entries().to_vec())
            .collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let all: Vec<_> = enumerate_applicable_lot_types(&LotTypeParams::new(1, 2, 3, 2, 3), 100)
            .unwrap()
            .map(|l| l.entries().to_vec())
            .collect();
        assert_eq!(all, vec![vec![2], vec![3]]);
        let none = enumerate_applicable_lot_types(&LotTypeParams::new(2, 0, 1, 3, 4), 100).unwrap();
        assert_eq!(none.count(), 0);
    }

    #[test]
    fn enumeration_cap() {
        let p = LotTypeParams::new(12, 0, 5, 12, 30);
        assert!(matches!(enumerate_applicable_lot_types(&p, 1_000_000), Err(ModelError::EnumerationCap { .. })));
    }

    #[test]
    fn ilp_dimensions() {
        assert_eq!(complete_ilp_dimensions(10, 50, 3), (1550, 513));
        assert_eq!(complete_ilp_dimensions(1328, 1290, 3), (5_140_650, 1_714_451));
        assert_eq!(complete_ilp_dimensions(1, 1, 1), (2, 5));
    }

    #[test]
    fn best_multiplicity_examples() {
        let l = LotType::new(vec![1, 2, 2, 1]);
        let inst = one_branch(&["2", "4", "4", "2"], &[1, 2, 3]);
        assert_eq!(best_multiplicity(&inst, 0, &l), 2);
        let inst = one_branch(&["0.6", "1.2", "1.2", "0.6"], &[1, 2]);
        assert_eq!(cost(&inst, 0, &l, 1), 24);
        assert_eq!(cost(&inst, 0, &l, 2), 84);
        assert_eq!(best_multiplicity(&inst, 0, &l), 1);
        let inst = one_branch(&["0", "0", "0", "0"], &[1, 2, 3]);
        assert_eq!(best_multiplicity(&inst, 0, &l), 1);
    }

    #[test]
    fn top_n_single_size() {
        let inst = validate_instance(&raw(&[&["1.0"]], &[1], (0, 2, 0, 2))).unwrap();
        let got = top_n_lot_types(&inst, 0, 3).unwrap();
        let want = vec![
            (LotType::new(vec![1]), 0),
            (LotType::new(vec![0]), 1),
            (LotType::new(vec![2]), 1),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn top_n_finds_zero_cost_fit() {
        let inst = validate_instance(&raw(&[&["2", "4", "4", "2"]], &[1, 2, 3], (0, 5, 4, 20))).unwrap();
        let got = top_n_lot_types(&inst, 0, 1).unwrap();
        assert_eq!(got[0].1, 0);
        assert_eq!(got[0].0, LotType::new(vec![1, 2, 2, 1]));
    }

    #[test]
    fn top_n_short_when_space_is_small() {
        let inst = validate_instance(&raw(&[&["1"]], &[1, 2], (2, 3, 2, 3))).unwrap();
        assert_eq!(top_n_lot_types(&inst, 0, 5).unwrap().len(), 2);
    }

    #[test]
    fn raw_round_trip() {
        let inst = one_branch(&["1.10", "2", "0.05", "0"], &[3, 1]);
        let back = validate_instance(&inst.to_raw()).unwrap();
        assert_eq!(inst, back);
        assert_eq!(inst.format_scaled(5), "0.05");
        assert_eq!(format_scaled(-1234, 3), "-1.234");
    }
}
