//! Backprop against central differences for each loss, then a few SGD
//! steps on a toy problem.

use ocl_core::nn::{check_gradient, sgd_step, Activation, Batch, LossKind, MlpSpec, Model, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ocl_core::Result<()> {
    let mut model = Model::init(
        MlpSpec::new(vec![3, 5, 4, 2], Activation::Tanh)?,
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    let inputs = Tensor::from_rows(&[vec![0.5, -1.0, 2.0], vec![-0.3, 0.8, 0.1], vec![1.2, 0.0, -0.7]])?;
    let batch = Batch::new(inputs.clone(), vec![0, 1, 1])?;
    let logits = Tensor::from_rows(&[vec![0.2, -0.1], vec![1.0, 0.5], vec![-0.4, 0.3]])?;
    for (name, b, kind) in [
        ("cross entropy", batch.clone(), LossKind::CrossEntropy),
        ("squared error", batch.clone(), LossKind::SquaredError),
        (
            "distillation",
            batch.clone().with_targets(logits)?,
            LossKind::distillation(0.3)?,
        ),
    ] {
        let c = check_gradient(&model, &b, kind, 1e-5)?;
        println!("{name:14} max relative error {:.2e}", c.max_rel_error);
    }
    for step in 0..5 {
        let (loss, grad) = model.loss_and_grad(&batch, LossKind::CrossEntropy)?;
        println!("step {step}: loss {loss:.4}");
        model.set_params(sgd_step(model.params(), &grad, 0.5)?)?;
    }
    println!("accuracy {:.3}", model.accuracy(&inputs, batch.labels())?);
    Ok(())
}
