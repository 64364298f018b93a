//! (P, Q) augmentation on a synthetic image and orbit-averaged losses
//! under the flip and rotation groups.

use ocl_core::augment::{group_orbit_losses, rand_augment_batch, AugPolicy, AugTarget, FiniteGroup, TransformOp};
use ocl_core::nn::{Activation, LossKind, MlpSpec, Model};
use ocl_core::stream::{make_synthetic_stream, SyntheticSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(features: &[f64], side: usize) {
    for row in features.chunks(side) {
        let line: String = row
            .iter()
            .map(|&p| [' ', '.', ':', '*', '#'][((p * 4.99) as usize).min(4)])
            .collect();
        println!("  |{line}|");
    }
}

fn main() -> ocl_core::Result<()> {
    let side = 8;
    let stream = make_synthetic_stream(&SyntheticSpec {
        num_tasks: 1,
        input_dim: side * side,
        image_side: Some(side),
        class_separation: 6.0,
        ..SyntheticSpec::default()
    })?;
    let sample = stream.tasks()[0].train[0].clone();
    println!("original (class {})", sample.label);
    show(&sample.features, side);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (p, q) in [(1, 5.0), (2, 14.0), (3, 30.0)] {
        let policy = AugPolicy::new(TransformOp::image_ops(), p, q, AugTarget::Both)?;
        let out = rand_augment_batch(std::slice::from_ref(&sample), &policy, &mut rng)?;
        println!("P = {p}, Q = {q}");
        show(&out[0].features, side);
    }

    let model = Model::init(MlpSpec::new(vec![side * side, 3], Activation::Relu)?, &mut rng);
    for (name, group) in [
        ("flip", FiniteGroup::horizontal_flips(side, side)),
        ("rot4", FiniteGroup::rotations(side)),
    ] {
        let o = group_orbit_losses(&model, &sample, &group, LossKind::CrossEntropy)?;
        println!("{name}: orbit losses {:.4?}, mean {:.4}", o.losses, o.mean);
    }
    Ok(())
}
