mod common;

use common::*;
use emac_core::availability::endpoint;
use emac_core::latency::compose_plan;
use emac_core::model::BoundMode;
use emac_core::oracle::{run_world, SimConfig};
use emac_core::plan::{Coupling, LatencyBasis};

/// Both endpoints and both latency compositions against exact enumeration,
/// including KofN nodes whose children can fail.
#[test]
fn analytic_matches_enumeration_on_random_trees() {
    let mut rng = rng(0xA11CE);
    let cfg = GenConfig {
        max_support: 4,
        ..GenConfig::default()
    };
    let mut checked = 0;
    let mut operators = 0;
    while checked < 150 {
        let inst = random_instance(&mut rng, &cfg);
        let plan = inst.plan();
        for (mode, coupling) in [
            (BoundMode::Optimistic, Coupling::Independent),
            (BoundMode::Pessimistic, Coupling::Comonotone),
        ] {
            let ep = endpoint(&plan, mode).unwrap();
            let world = inst.world(&plan, &ep.probs);
            let exact = match run_world(&world, &SimConfig::enumerate(coupling)) {
                Ok(r) => r,
                Err(e) => panic!("{e}"),
            };
            assert!(
                (ep.value - exact.availability).abs() < 1e-9,
                "{mode:?} {} vs {} for {}",
                ep.value,
                exact.availability,
                inst.expr
            );
            for (q, t) in ep.q.iter().zip(&exact.timeouts) {
                assert!((q - t.q).abs() < 1e-9, "q {q} vs {} for {}", t.q, inst.expr);
            }
            let analytic = plan
                .evaluate_with(&plan.availabilities(), &ep.probs, LatencyBasis::Point, coupling, true)
                .unwrap()
                .latency
                .unwrap();
            if let Some(sim) = exact.latency_dist() {
                assert!(
                    same_dist(&analytic, &sim, 1e-12),
                    "{coupling:?} latency for {}:\n{:?}\n{:?}",
                    inst.expr,
                    analytic.support(),
                    sim.support()
                );
            }
            if coupling == Coupling::Independent {
                let composed = compose_plan(&plan, LatencyBasis::Point, &ep.probs).unwrap();
                assert_eq!(composed.dist, analytic);
            }
        }
        operators += inst.expr.operator_count();
        checked += 1;
    }
    assert!(operators > 300, "generator produced too few operators: {operators}");
}
