mod common;

use common::*;
use emac_core::availability::{endpoint, plan_interval};
use emac_core::model::{BoundMode, DomainMap, JourneyExpr};
use proptest::prelude::*;

fn instance(seed: u64) -> Instance {
    random_instance(&mut rng(seed), &GenConfig::default())
}

fn leaves_of(n: usize) -> Vec<JourneyExpr> {
    (0..n).map(|i| JourneyExpr::Leaf(format!("L{i}"))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn interval_is_ordered(seed in any::<u64>()) {
        let iv = plan_interval(&instance(seed).plan()).unwrap().interval;
        prop_assert!(iv.lo <= iv.hi);
        prop_assert!((0.0..=1.0).contains(&iv.lo) && (0.0..=1.0).contains(&iv.hi));
    }

    #[test]
    fn endpoints_rise_with_leaf_availability(seed in any::<u64>(), pick in any::<prop::sample::Index>(), u in 0.0f64..=1.0) {
        let inst = instance(seed);
        let before = plan_interval(&inst.plan()).unwrap().interval;
        let mut better = inst.clone();
        let name = pick.get(&inst.leaves.keys().cloned().collect::<Vec<_>>()).clone();
        let leaf = better.leaves.get_mut(&name).unwrap();
        leaf.availability += (1.0 - leaf.availability) * u;
        let after = plan_interval(&better.plan()).unwrap().interval;
        prop_assert!(after.pessimistic >= before.pessimistic - 1e-12);
        prop_assert!(after.optimistic >= before.optimistic - 1e-12);
    }

    #[test]
    fn singleton_domains_leave_only_evidence_width(seed in any::<u64>()) {
        let mut inst = instance(seed);
        inst.domains = DomainMap::new();
        let plan = inst.plan();
        let iv = plan_interval(&plan).unwrap().interval;
        if plan.timeouts.is_empty() && plan.conds.iter().all(|c| !c.is_free()) {
            prop_assert!(iv.width() < 1e-12, "width {}", iv.width());
        }
    }

    #[test]
    fn kofn_extremes_are_race_and_parallel(seed in any::<u64>(), n in 2usize..=6) {
        let mut inst = instance(seed);
        let template = inst.leaves.values().next().unwrap().clone();
        inst.leaves = (0..n).map(|i| {
            let mut l = template.clone();
            l.availability = 0.5 + (i as f64 + 1.0) / (2.0 * n as f64 + 2.0);
            (format!("L{i}"), l)
        }).collect();
        inst.probs.clear();
        let names: Vec<String> = inst.leaves.keys().cloned().collect();
        inst.domains = random_domains(&mut rng(seed ^ 1), &names);
        let value = |expr: JourneyExpr, mode| {
            let i = Instance { expr, ..inst.clone() };
            endpoint(&i.plan(), mode).unwrap().value
        };
        for mode in [BoundMode::Pessimistic, BoundMode::Optimistic] {
            let race = value(JourneyExpr::Race(leaves_of(n)), mode);
            let one = value(JourneyExpr::KofN { k: 1, children: leaves_of(n) }, mode);
            let par = value(JourneyExpr::Parallel(leaves_of(n)), mode);
            let all = value(JourneyExpr::KofN { k: n, children: leaves_of(n) }, mode);
            prop_assert!((race - one).abs() < 1e-12);
            prop_assert!((par - all).abs() < 1e-12);
        }
    }
}
