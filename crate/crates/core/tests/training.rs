use grv_core::attack::{budget_from_fraction, empirical_grv, AttackBudget};
use grv_core::encoder::init_params;
use grv_core::trainer::{train, Branch, TrainConfig};
use grv_core::toy::PlantedPartition;

/// Robust training lowers the measured vulnerability relative to the
/// untrained initialization it starts from.
#[test]
fn robust_training_lowers_vulnerability() {
    let spec = PlantedPartition { nodes: 20, ..Default::default() };
    let mut lower = 0;
    for seed in 0..5u64 {
        let (graph, _) = spec.generate(seed).unwrap();
        let edges = graph.num_edges();
        let config = TrainConfig {
            hidden: 16,
            learning_rate: 1e-2,
            max_epochs: 100,
            budget: AttackBudget::training(budget_from_fraction(edges, 0.4).unwrap(), 0.1),
            seed,
            ..Default::default()
        };
        let eval = AttackBudget::evaluation(budget_from_fraction(edges, 0.2).unwrap(), 0.1);
        let untrained = init_params(graph.num_attributes(), 16, seed).unwrap();
        let (trained, log) = train(&graph, &config).unwrap();
        assert!(!log.records.is_empty());
        let before = empirical_grv(&graph, &untrained, &eval, 99).unwrap();
        let after = empirical_grv(&graph, &trained, &eval, 99).unwrap();
        println!("seed {seed}: untrained {before:.4} trained {after:.4}");
        lower += usize::from(after < before);
    }
    assert_eq!(lower, 5, "trained encoder was less vulnerable on only {lower}/5 seeds");
}

#[test]
fn zero_budget_log_is_all_benign_with_zero_vulnerability() {
    let (graph, _) = PlantedPartition::default().generate(2).unwrap();
    let config = TrainConfig { hidden: 8, max_epochs: 10, learning_rate: 1e-2, ..Default::default() };
    let (_, log) = train(&graph, &config).unwrap();
    for r in &log.records {
        assert_eq!((r.branch, r.grv), (Branch::Benign, 0.0));
    }
    let csv = log.to_csv(&[("seed", "0".into())]);
    assert_eq!(csv.lines().filter(|l| l.ends_with(",benign")).count(), log.records.len());
}
