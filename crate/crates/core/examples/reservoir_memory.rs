//! Reservoir inclusion frequencies and MIR retrieval.

use ocl_core::harness::reservoir_inclusion;
use ocl_core::memory::ReservoirMemory;
use ocl_core::nn::{Activation, LossKind, MlpSpec, Model};
use ocl_core::stream::{FeatureShape, Sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ocl_core::Result<()> {
    let freq = reservoir_inclusion(2, 4, 200_000, 0)?;
    println!("M=2, N=4 inclusion: {freq:.4?} (expected 0.5 each)");

    let shape = FeatureShape::Vector(2);
    let items: Vec<Sample> = (0..50)
        .map(|i| Sample::new(i, vec![(i % 7) as f64 / 7.0, (i % 3) as f64], shape, i % 2, i / 25))
        .collect();
    let mut mem = ReservoirMemory::new(10, 42)?;
    mem.update(&items);
    println!("memory holds {} of {} seen", mem.len(), mem.n_seen());
    mem.write_dump_csv(std::io::stdout().lock()).expect("stdout");

    let model = Model::init(
        MlpSpec::new(vec![2, 4, 2], Activation::Tanh)?,
        &mut ChaCha8Rng::seed_from_u64(1),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let random = mem.retrieve_random(3, &mut rng);
    let mir = mem.retrieve_mir(&model, &items[45..], 0.5, 10, 3, LossKind::CrossEntropy, &mut rng)?;
    println!("random ids {:?}", random.iter().map(|s| s.id).collect::<Vec<_>>());
    println!("MIR ids    {:?}", mir.iter().map(|s| s.id).collect::<Vec<_>>());
    Ok(())
}
