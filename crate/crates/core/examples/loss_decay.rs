//! Incoming vs memory loss across the K inner iterations, with and without
//! augmentation, on task 2 of a synthetic image stream.

use ocl_core::analysis::{loss_decay, summarize_by_iteration};
use ocl_core::augment::{AugPolicy, AugTarget, TransformOp};
use ocl_core::nn::{Activation, MlpSpec, Model};
use ocl_core::rehearsal::{run_stream, NoHooks, RehearsalConfig};
use ocl_core::stream::{make_synthetic_stream, SyntheticSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ocl_core::Result<()> {
    let spec = SyntheticSpec {
        num_tasks: 2,
        input_dim: 64,
        image_side: Some(8),
        class_separation: 3.0,
        ..SyntheticSpec::default()
    };
    let rer = RehearsalConfig::default();
    let rar = RehearsalConfig {
        aug: AugPolicy::new(TransformOp::image_ops(), 1, 30.0, AugTarget::Both)?,
        ..rer.clone()
    };
    for (name, cfg) in [("RER", rer), ("RAR", rar)] {
        let mut stream = make_synthetic_stream(&spec)?;
        let task2_start = (stream.tasks()[0].train.len() / cfg.incoming_batch_size) as u64;
        let model = Model::init(
            MlpSpec::new(vec![64, 64, 4], Activation::Relu)?,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let r = run_stream(&mut stream, model, &cfg, 0, &mut NoHooks)?;
        let d = loss_decay(&r.trace, task2_start)?;
        println!(
            "{name}: L_in(10)/L_in(1) = {:.3}, L_mem(10)/L_mem(1) = {:.3}, gap {:.3}",
            d.incoming_ratio,
            d.memory_ratio,
            d.gap()
        );
        for s in summarize_by_iteration(&r.trace).iter().step_by(3) {
            println!(
                "  k={:2} incoming {:.4} memory {:.4}",
                s.k,
                s.incoming_loss,
                s.memory_loss.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
