//! Seeded synthetic instances. Branch volumes are lognormal, size shares
//! follow a bell-shaped curve over the sizes with per-branch noise, and the
//! volumes are rescaled so total demand sits in the middle of the supply
//! window.

use lottype_core::model::{validate_instance, Instance, RawDemand, RawInstance, RawLotBounds, RawSupply};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("unknown preset {0:?} (expected t1-i1 .. t1-i5)")]
    UnknownPreset(String),
    #[error("contradictory parameters: {0}")]
    Contradictory(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub branches: usize,
    pub sizes: usize,
    pub min_c: u32,
    pub max_c: u32,
    pub min_t: u32,
    pub max_t: u32,
    pub multiplicities: Vec<u32>,
    pub k: usize,
    pub supply_lo: u64,
    pub supply_hi: u64,
}

impl GeneratorParams {
    /// Structural parameters of the five published instances. Lot bounds
    /// are chosen to reproduce the published lot-type counts.
    pub fn preset(name: &str) -> Result<Self, GenerateError> {
        let (k, branches, sizes, (min_c, max_c, min_t, max_t), (supply_lo, supply_hi)) = match name {
            "t1-i1" => (3, 10, 4, (0, 2, 4, 8), (54, 66)),
            "t1-i2" => (5, 10, 4, (0, 5, 3, 15), (54, 66)),
            "t1-i3" => (5, 1303, 4, (0, 5, 3, 15), (11_900, 12_100)),
            "t1-i4" => (4, 1328, 7, (0, 2, 7, 14), (9702, 9898)),
            "t1-i5" => (5, 682, 12, (0, 5, 12, 30), (15_500, 16_200)),
            other => return Err(GenerateError::UnknownPreset(other.to_string())),
        };
        Ok(GeneratorParams {
            branches,
            sizes,
            min_c,
            max_c,
            min_t,
            max_t,
            multiplicities: vec![1, 2, 3],
            k,
            supply_lo,
            supply_hi,
        })
    }

    /// A window of +-2% around `branches * mid-lot-total * mid-multiplicity`.
    pub fn default_supply(&mut self) {
        let mut ms = self.multiplicities.clone();
        ms.sort_unstable();
        let m_mid = ms.get(ms.len() / 2).copied().unwrap_or(1) as f64;
        let center = self.branches as f64 * f64::from(self.min_t + self.max_t) / 2.0 * m_mid;
        self.supply_lo = (center * 0.98).floor() as u64;
        self.supply_hi = (center * 1.02).ceil() as u64;
    }

    fn check(&self) -> Result<(), GenerateError> {
        let bad = |m: &str| Err(GenerateError::Contradictory(m.to_string()));
        if self.branches == 0 || self.sizes == 0 {
            return bad("at least one branch and one size are required");
        }
        if self.min_c > self.max_c || self.min_t > self.max_t {
            return bad("lower lot bound above upper lot bound");
        }
        if self.supply_lo > self.supply_hi {
            return bad("supply lo above supply hi");
        }
        if self.k == 0 || self.multiplicities.is_empty() || self.multiplicities.contains(&0) {
            return bad("k and all multiplicities must be positive");
        }
        Ok(())
    }
}

/// Unimodal size curve peaking slightly below the middle size.
fn size_curve(n: usize) -> Vec<f64> {
    let peak = (n as f64 - 1.0) * 0.45;
    let width = (n as f64 / 3.0).max(0.8);
    (0..n).map(|s| (-0.5 * ((s as f64 - peak) / width).powi(2)).exp()).collect()
}

pub fn generate(params: &GeneratorParams, seed: u64) -> Result<Instance, GenerateError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let volume = LogNormal::new(0.0, 0.5).expect("valid lognormal");
    let noise = LogNormal::new(0.0, 0.25).expect("valid lognormal");
    let curve = size_curve(params.sizes);

    let volumes: Vec<f64> = (0..params.branches).map(|_| volume.sample(&mut rng)).collect();
    let target = (params.supply_lo + params.supply_hi) as f64 / 2.0;
    let scale = target / volumes.iter().sum::<f64>();
    let demand: Vec<Vec<RawDemand>> = volumes
        .iter()
        .map(|&v| {
            let shares: Vec<f64> = curve.iter().map(|&c| c * noise.sample(&mut rng)).collect();
            let total: f64 = shares.iter().sum();
            shares
                .iter()
                .map(|&sh| {
                    let tenths = (v * scale * sh / total * 10.0).round().max(0.0) as u64;
                    RawDemand::Text(format!("{}.{}", tenths / 10, tenths % 10))
                })
                .collect()
        })
        .collect();

    let raw = RawInstance {
        sizes: (1..=params.sizes).map(|s| format!("S{s:02}")).collect(),
        branches: (1..=params.branches).map(|b| format!("B{b:04}")).collect(),
        demand,
        multiplicities: params.multiplicities.iter().map(|&m| i64::from(m)).collect(),
        lot_bounds: RawLotBounds {
            min_c: params.min_c.into(),
            max_c: params.max_c.into(),
            min_t: params.min_t.into(),
            max_t: params.max_t.into(),
        },
        supply: RawSupply { lo: params.supply_lo as i64, hi: params.supply_hi as i64 },
        k: params.k as i64,
    };
    validate_instance(&raw).map_err(|r| GenerateError::Contradictory(r.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use lottype_core::model::count_applicable_lot_types;

    #[test]
    fn presets_match_published_parameters() {
        let p5 = GeneratorParams::preset("t1-i5").unwrap();
        assert_eq!((p5.branches, p5.sizes, p5.k, p5.supply_lo, p5.supply_hi), (682, 12, 5, 15_500, 16_200));
        let p1 = GeneratorParams::preset("t1-i1").unwrap();
        assert_eq!((p1.branches, p1.sizes, p1.k, p1.supply_lo, p1.supply_hi), (10, 4, 3, 54, 66));
        let counts = [("t1-i1", 50u64), ("t1-i2", 1211), ("t1-i3", 1211), ("t1-i4", 1290), ("t1-i5", 1_159_533_584)];
        for (name, want) in counts {
            let inst = generate(&GeneratorParams::preset(name).unwrap(), 1).unwrap();
            assert_eq!(count_applicable_lot_types(inst.params()), want.into(), "{name}");
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let p = GeneratorParams::preset("t1-i2").unwrap();
        assert_eq!(generate(&p, 9).unwrap(), generate(&p, 9).unwrap());
        assert_ne!(generate(&p, 9).unwrap(), generate(&p, 10).unwrap());
    }

    #[test]
    fn contradictions_are_rejected() {
        let mut p = GeneratorParams::preset("t1-i1").unwrap();
        p.supply_lo = 100;
        assert!(matches!(generate(&p, 0), Err(GenerateError::Contradictory(_))));
        assert!(matches!(GeneratorParams::preset("t9"), Err(GenerateError::UnknownPreset(_))));
    }
}
