use lottype_core::controller::{solve, verify_certificate, Conclusion, SolverConfig};
use lottype_core::model::{
    count_applicable_lot_types, validate_instance, Instance, LotTypeParams, RawDemand, RawInstance, RawLotBounds,
    RawSupply,
};
use lottype_core::subsolver::{brute_force_oracle, ORACLE_BUDGET};
use lottype_core::SubsolverError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    loop {
        let nb = rng.random_range(1..=5);
        let ns = rng.random_range(1..=3);
        let min_c = rng.random_range(0..=1);
        let max_c = rng.random_range(min_c.max(1)..=3);
        let min_t = rng.random_range(0..=ns as u32 * max_c);
        let max_t = rng.random_range(min_t..=ns as u32 * max_c);
        let params = LotTypeParams::new(ns, min_c, max_c, min_t, max_t);
        if !params.is_valid() {
            continue;
        }
        let count = count_applicable_lot_types(&params);
        if count > 50u32.into() || count == 0u32.into() {
            continue;
        }
        let mut mults: Vec<i64> = (1..=3).filter(|_| rng.random_bool(0.6)).collect();
        if mults.is_empty() {
            mults.push(1);
        }
        let demand: Vec<Vec<RawDemand>> = (0..nb)
            .map(|_| {
                (0..ns).map(|_| RawDemand::Text(format!("{:.1}", rng.random_range(0..=60) as f64 / 10.0))).collect()
            })
            .collect();
        let total: f64 = demand
            .iter()
            .flatten()
            .map(|d| match d {
                RawDemand::Text(s) => s.parse::<f64>().unwrap(),
                RawDemand::Number(x) => *x,
            })
            .sum();
        let center = total.round() as i64;
        let lo = (center - rng.random_range(0..=6)).max(0);
        let hi = center + rng.random_range(0..=6);
        let raw = RawInstance {
            sizes: (0..ns).map(|i| format!("s{i}")).collect(),
            branches: (0..nb).map(|i| format!("b{i}")).collect(),
            demand,
            multiplicities: mults,
            lot_bounds: RawLotBounds {
                min_c: min_c.into(),
                max_c: max_c.into(),
                min_t: min_t.into(),
                max_t: max_t.into(),
            },
            supply: RawSupply { lo, hi },
            k: rng.random_range(1..=3),
        };
        if let Ok(inst) = validate_instance(&raw) {
            return inst;
        }
    }
}

#[test]
#[ignore]
fn stress_many_seeds() {
    let cfg = SolverConfig::default();
    let (mut cuts, mut nodes, mut with_branch) = (0, 0, 0);
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for case in 0..100 {
            let inst = random_instance(&mut rng);
            let report = solve(&inst, &cfg).unwrap_or_else(|e| panic!("seed {seed} case {case}: {e}"));
            let want = brute_force_oracle(&inst, ORACLE_BUDGET).ok().map(|a| a.total_cost);
            assert_eq!(report.certificate.incumbent_cost, want, "seed {seed} case {case}");
            assert!(report.certificate.conclusion.is_proven(), "seed {seed} case {case}");
            let v = verify_certificate(&inst, &report);
            assert!(v.passed(), "seed {seed} case {case}: {:?}", v.reasons);
            cuts += report.counters.cover_cuts;
            nodes += report.counters.nodes;
            with_branch += usize::from(report.counters.nodes > 1);
        }
    }
    eprintln!("cuts {cuts} nodes {nodes} branched {with_branch}");
}

#[test]
fn randomized_instances_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = SolverConfig::default();
    let mut infeasible = 0;
    for case in 0..150 {
        let inst = random_instance(&mut rng);
        let report = solve(&inst, &cfg).unwrap_or_else(|e| panic!("case {case}: {e}"));
        match brute_force_oracle(&inst, ORACLE_BUDGET) {
            Ok(best) => {
                assert_eq!(report.certificate.conclusion, Conclusion::ProvenOptimal, "case {case}");
                assert_eq!(report.assignment.as_ref().unwrap().total_cost, best.total_cost, "case {case}");
            }
            Err(SubsolverError::Infeasible) => {
                infeasible += 1;
                assert_eq!(report.certificate.conclusion, Conclusion::ProvenInfeasible, "case {case}");
            }
            Err(e) => panic!("case {case}: oracle {e}"),
        }
        let v = verify_certificate(&inst, &report);
        assert!(v.passed(), "case {case}: {:?}", v.reasons);
    }
    assert!(infeasible < 150);
}
