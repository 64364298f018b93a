//! ER (K=1), repeated rehearsal (K=10) and RAR (K=10, P=1, Q=14) on the
//! same five-task synthetic stream.
//!
//! `cargo run --release --example rehearsal_dilemma [seed]`

use ocl_core::analysis::compute_metrics;
use ocl_core::augment::{AugPolicy, AugTarget, TransformOp};
use ocl_core::nn::{Activation, MlpSpec, Model};
use ocl_core::rehearsal::{run_stream, NoHooks, RehearsalConfig};
use ocl_core::stream::{make_synthetic_stream, SyntheticSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ocl_core::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = SyntheticSpec {
        num_tasks: 5,
        input_dim: 50,
        class_separation: 3.0,
        seed,
        ..SyntheticSpec::default()
    };
    let base = RehearsalConfig {
        lr: 0.03,
        memory_capacity: 100,
        ..RehearsalConfig::default()
    };
    let rar_aug = AugPolicy::new(TransformOp::vector_ops(), 1, 14.0, AugTarget::Both)?;
    let runs = [
        ("ER  K=1 ", RehearsalConfig { k: 1, ..base.clone() }),
        ("RER K=10", RehearsalConfig { k: 10, ..base.clone() }),
        (
            "RAR K=10",
            RehearsalConfig {
                k: 10,
                aug: rar_aug,
                ..base.clone()
            },
        ),
    ];
    for (name, cfg) in runs {
        let mut stream = make_synthetic_stream(&spec)?;
        println!("lambda = {}", stream.lambda_ratio(0, cfg.memory_capacity)?);
        let model = Model::init(
            MlpSpec::new(vec![50, 64, 10], Activation::Relu)?,
            &mut ChaCha8Rng::seed_from_u64(seed),
        );
        let r = run_stream(&mut stream, model, &cfg, seed, &mut NoHooks)?;
        let m = compute_metrics(&r.accuracy);
        println!(
            "{name}: A_T {:.3}  F_T {:.3}  memory gap {:.3}",
            m.average_accuracy,
            m.forgetting.unwrap_or(0.0),
            r.mean_memory_gap().unwrap_or(0.0)
        );
    }
    Ok(())
}
