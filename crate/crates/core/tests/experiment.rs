//! End-to-end behaviour of the experiment driver on small grids.

use hfedf_core::data::SyntheticSpec;
use hfedf_core::federation::{
    grid, run_cell, run_experiment, Algorithm, CellData, CellKey, ExperimentPlan, RunOptions,
};

fn small_plan(rounds: usize) -> ExperimentPlan {
    let mut plan = ExperimentPlan {
        data: SyntheticSpec {
            samples_per_domain: 120,
            feature_dim: 6,
            ..SyntheticSpec::default()
        },
        n_clients: 3,
        domains_per_client: 1,
        client_hidden: vec![8],
        eval_interval: 2,
        ..ExperimentPlan::default()
    };
    plan.hfedf.rounds = rounds;
    plan.hfedf.batch_size = 16;
    plan.hfedf.client_lr = 0.05;
    plan.baseline.client_lr = 0.05;
    plan
}

#[test]
fn zero_rounds_sit_at_chance_level() {
    let mut plan = small_plan(0);
    plan.data.samples_per_domain = 2000;
    let (table, _) = run_experiment(
        &plan,
        &[Algorithm::Fedavg, Algorithm::Hfedf],
        &[0, 1, 2],
        RunOptions::default(),
    )
    .unwrap();
    assert!(table.rows.iter().all(|r| r.round == 0));
    // An untrained model is still a fixed function of the features, so
    // its hits are not independent coin flips; allow more than the
    // binomial 3σ (about 0.01 here).
    let chance = 1.0 / plan.data.n_classes as f64;
    for s in table.final_summary() {
        assert!(
            (s.mean_ood - chance).abs() < 0.06,
            "{}: {}",
            s.algorithm,
            s.mean_ood
        );
        assert!(
            (s.mean_id - chance).abs() < 0.06,
            "{}: {}",
            s.algorithm,
            s.mean_id
        );
    }
}

#[test]
fn stronger_shift_lowers_ood_accuracy() {
    let seeds: Vec<u64> = (0..10).collect();
    let mut ood = Vec::new();
    for shift in [0.0, 0.5, 1.0] {
        let mut plan = small_plan(10);
        plan.data.shift_strength = shift;
        let (table, _) =
            run_experiment(&plan, &[Algorithm::Central], &seeds, RunOptions::default()).unwrap();
        ood.push(table.final_for("central").unwrap().mean_ood);
    }
    assert!(ood[0] >= ood[1] && ood[1] >= ood[2], "{ood:?}");
}

#[test]
fn identical_seeds_give_identical_tables() {
    let plan = small_plan(4);
    let algs = [Algorithm::Hfedf, Algorithm::Fedprox, Algorithm::Local];
    let a = run_experiment(&plan, &algs, &[7], RunOptions::default()).unwrap();
    let b = run_experiment(&plan, &algs, &[7], RunOptions::default()).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

#[test]
fn grid_covers_every_cell_in_order() {
    let mut plan = small_plan(3);
    plan.data.n_domains = 3;
    plan.n_clients = 2;
    let algs = [Algorithm::Fedavg, Algorithm::Hfedf];
    let keys = grid(&plan, &algs, &[1, 2, 3]);
    assert_eq!(keys.len(), 3 * 3 * 2);
    let (table, cells) = run_experiment(&plan, &algs, &[1, 2, 3], RunOptions::default()).unwrap();
    assert_eq!(cells.len(), 18);
    // Rounds 0, 2 and the final round 3.
    assert_eq!(table.rows.len(), 18 * 3);
    assert!(cells.iter().map(|c| c.key).eq(keys));
}

#[test]
fn collected_outputs_have_expected_shapes() {
    let plan = small_plan(3);
    let opts = RunOptions {
        collect_traces: true,
        collect_confidences: true,
    };
    let key = CellKey {
        algorithm: Algorithm::Hfedf,
        seed: 0,
        target_domain: 1,
    };
    let cell = run_cell(&plan, key, opts).unwrap();
    assert_eq!(cell.traces.len(), 3);
    for t in &cell.traces {
        let s: f64 = t.weights_theta.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(t.cos_theta.iter().all(|c| (-1.0..=1.0).contains(c)));
    }
    let data = CellData::prepare(&plan, 0, 1).unwrap();
    let expected: usize = data.val.iter().map(|v| v.len() + data.ood.len()).sum();
    assert_eq!(cell.confidences.len(), expected);
    assert_eq!(cell.divergence.unwrap().layers.len(), 2);
}

#[test]
fn diverging_cell_is_flagged_not_fatal() {
    let mut plan = small_plan(30);
    plan.hfedf.server_lr = 1e6;
    let key = CellKey {
        algorithm: Algorithm::Hfedf,
        seed: 0,
        target_domain: 0,
    };
    let cell = run_cell(&plan, key, RunOptions::default()).unwrap();
    assert!(cell.aborted.is_some());
    assert_eq!(cell.rows[0].round, 0);
}

#[test]
fn invalid_plans_name_the_field() {
    let mut plan = small_plan(2);
    plan.domains_per_client = 0;
    let err = plan.validate().unwrap_err().to_string();
    assert!(err.contains("`d`"), "{err}");
    let mut plan = small_plan(2);
    plan.data.n_domains = 6;
    plan.n_clients = 2;
    plan.domains_per_client = 2;
    let err = plan.validate().unwrap_err().to_string();
    assert!(err.contains("n_clients * d"), "{err}");
}
