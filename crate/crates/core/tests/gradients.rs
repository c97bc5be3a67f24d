use grv_core::encoder::init_params;
use grv_core::graph::{slot_count, RelaxedAdjacency};
use grv_core::objective::{gradient_check, negative_sample, GRAD_STEP};
use grv_core::toy::PlantedPartition;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Analytic gradients of the objective agree with central differences on
/// small random graphs, at an interior point of the relaxed flip box.
#[test]
fn analytic_gradients_match_central_differences() {
    for seed in 0..10u64 {
        let spec = PlantedPartition { nodes: 8, attributes: 3, p_in: 0.5, p_out: 0.2, ..Default::default() };
        let (graph, _) = spec.generate(seed).unwrap();
        let params = init_params(3, 4, seed + 100).unwrap();
        let neg = negative_sample(&graph, seed + 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 300);
        let perturb: Array1<f64> = (0..slot_count(8)).map(|_| rng.random_range(0.05..0.3)).collect();
        let relaxed = RelaxedAdjacency { base: graph.adjacency().clone(), perturb, budget: 28 };
        let check = gradient_check(&relaxed, graph.attributes(), &params, &neg, GRAD_STEP).unwrap();
        println!("seed {seed}: {check:?}");
        assert!(check.max() < 1e-5, "seed {seed}: {check:?}");
    }
}
