use std::time::Instant;
use tactile_core::eval::{cross_validate, Dataset, EvalConfig, Modality};
use tactile_core::pipeline::TrainConfig;
use tactile_core::synth::default_suite;

fn main() {
    for seed in [1u64, 2] {
        let suite = default_suite(seed);
        let t0 = Instant::now();
        let dataset = Dataset::from_suite(&suite).unwrap();
        println!("seed {seed}: dataset generated in {:?}", t0.elapsed());
        let cfg = EvalConfig {
            train: TrainConfig {
                seed,
                ..Default::default()
            },
            folds: suite.folds,
            ..Default::default()
        };
        for modality in [Modality::VibrationOnly, Modality::MultiModal] {
            let t = Instant::now();
            let report = cross_validate(&dataset, modality, &cfg).unwrap();
            println!(
                "  {} ({:?}): overall err {:.4} mean {:?} std {:?}",
                report.modality,
                t.elapsed(),
                report.overall.error_rate,
                report.overall.mean_time_s,
                report.overall.std_time_s
            );
            for m in &report.per_material {
                println!(
                    "    {:12} sessions {:4} mis {:4} err {:.4} mean {:?}",
                    m.material, m.sessions, m.misclassified, m.error_rate, m.mean_time_s
                );
            }
        }
    }
}
