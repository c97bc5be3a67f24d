use grv_core::attack::{
    attack_topology, budget_from_fraction, enumerate_flip_sets, worst_case_attack, AttackBudget, Recovery,
};
use grv_core::encoder::init_params;
use grv_core::graph::{flip_distance, slot_count, RelaxedAdjacency};
use grv_core::objective::{mi_value, negative_sample};
use grv_core::toy::PlantedPartition;
use proptest::prelude::*;

fn toy(nodes: usize, seed: u64) -> grv_core::Graph {
    let spec = PlantedPartition { nodes, attributes: 3, p_in: 0.5, p_out: 0.2, ..Default::default() };
    spec.generate(seed).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_attack_stays_inside_the_budget(
        nodes in 4usize..10,
        frac in 0.0f64..0.6,
        epsilon in 0.0f64..0.3,
        seed in any::<u64>(),
    ) {
        let graph = toy(nodes, seed);
        let delta = budget_from_fraction(graph.num_edges().max(1), frac).unwrap().min(slot_count(nodes));
        let budget = AttackBudget { topo_steps: 3, feat_steps: 3, ..AttackBudget::training(delta, epsilon) };
        let params = init_params(3, 4, seed ^ 1).unwrap();
        let neg = negative_sample(&graph, seed ^ 2).unwrap();
        let out = worst_case_attack(&graph, &params, &neg, &budget, seed ^ 3).unwrap();
        prop_assert!(out.flips_used <= delta);
        prop_assert!(out.feat_linf_used <= epsilon + 1e-12);
        prop_assert!(out.grv() >= 0.0);
        prop_assert_eq!(flip_distance(graph.adjacency(), out.perturbed.adjacency()).unwrap(), out.flips_used);
    }
}

/// On four nodes (six slots) exhaustive recovery reaches the discrete minimum
/// found by scoring every flip set independently.
#[test]
fn exhaustive_recovery_matches_brute_force() {
    for seed in 0..8u64 {
        let graph = toy(4, seed);
        let params = init_params(3, 4, seed + 10).unwrap();
        let neg = negative_sample(&graph, seed + 20).unwrap();
        for delta in 1..=3 {
            let budget = AttackBudget { recovery: Recovery::Exhaustive, ..AttackBudget::training(delta, 0.0) };
            let got = attack_topology(&graph, &params, &neg, &budget, seed).unwrap();
            let zero = RelaxedAdjacency::zero(graph.adjacency(), delta);
            let mut best = mi_value(graph.adjacency(), graph.attributes(), &params, &neg).unwrap();
            for s in enumerate_flip_sets(6, delta).unwrap() {
                let adj = zero.materialize(&s).unwrap();
                best = best.min(mi_value(&adj, graph.attributes(), &params, &neg).unwrap());
            }
            assert_eq!(got.objective, best, "seed {seed} delta {delta}");
            assert!(got.flips <= delta);
        }
    }
}
