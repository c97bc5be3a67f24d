use grv_core::attack::{budget_from_fraction, AttackBudget};
use grv_core::downstream::{ProbeOptions, SplitSpec};
use grv_core::pipeline::risk_bound_row;
use grv_core::toy::PlantedPartition;
use grv_core::trainer::{train, TrainConfig};

/// The measured adversarial risk of the trained toy encoders never falls
/// below the lower bound implied by their MI proxy and vulnerability.
#[test]
fn measured_risk_respects_the_lower_bound() {
    let (graph, labels) = PlantedPartition::default().generate(0).unwrap();
    let edges = graph.num_edges();
    for robust in [false, true] {
        let budget = if robust {
            AttackBudget::training(budget_from_fraction(edges, 0.4).unwrap(), 0.1)
        } else {
            AttackBudget::zero()
        };
        let config = TrainConfig { hidden: 64, max_epochs: 300, budget, ..Default::default() };
        let (params, _) = train(&graph, &config).unwrap();
        for frac in [0.1, 0.2, 0.4] {
            let budget = AttackBudget::evaluation(budget_from_fraction(edges, frac).unwrap(), 0.1);
            for seed in 0..3 {
                let split = SplitSpec::stratified(&labels, 0.1, 0.8, seed).unwrap();
                let (row, risk) =
                    risk_bound_row("toy", &graph, &labels, &split, &params, &budget, &ProbeOptions::default(), seed)
                        .unwrap();
                println!(
                    "robust={robust} frac={frac} seed={seed}: mi {:.4} grv {:.4} bound {:.4} risk clean {:.4} adv {:.4}",
                    row.mi_estimate, row.grv, row.bound.raw, risk.clean, risk.adversarial
                );
                assert!(row.pass, "{row:?}");
            }
        }
    }
}
