//! Central-difference gradient check on random small instances.

use jkpe::model::{LossConfig, Objective};
use jkpe::train::{grad_check, random_instance};

fn main() -> jkpe::Result<()> {
    for objective in [Objective::Joint, Objective::Rank, Objective::Chunk] {
        let cfg = LossConfig {
            objective,
            ..LossConfig::default()
        };
        let mut worst = 0.0f64;
        for seed in 0..20 {
            let (doc, params) = random_instance(seed);
            let report = grad_check(&doc, &params, None, 1e-4, 1e-4, &cfg)?;
            assert!(report.pass, "{objective:?} seed {seed}: {report:?}");
            worst = worst.max(report.max_rel_err());
        }
        println!("{objective:?}: 20 instances pass, worst relative error {worst:.2e}");
    }

    let (doc, params) = random_instance(7);
    let report = grad_check(&doc, &params, None, 1e-4, 1e-4, &LossConfig::default())?;
    for t in &report.tensors {
        println!("{:<16} checked {:>3} skipped {:>2} max {:.2e}", t.name, t.checked, t.skipped, t.max_rel_err);
    }
    Ok(())
}
