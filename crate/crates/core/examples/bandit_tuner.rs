//! Bootstrapped policy gradient over (K, P, Q) on a short stream, then the
//! same policy on a stationary bandit whose best arm is K = 5.

use ocl_core::harness::{execute, RunConfig, StreamSource};
use ocl_core::stream::SyntheticSpec;
use ocl_core::tuner::{write_tuner_csv, ActionSpace, AugArm, BanditPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ocl_core::Result<()> {
    let space = ActionSpace::new((1..=20).collect(), vec![AugArm { p: 1, q: 5.0 }])?;
    let mut policy = BanditPolicy::new(space, 0.5, 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..500 {
        let a = policy.sample_action(&mut rng);
        let acc = 0.5 + 0.2 * (a.k as f64 - 5.0).signum();
        policy.update(&a, acc)?;
    }
    let probs = policy.iteration_policy().probabilities();
    println!(
        "stationary bandit: mass on K in 4..=6 = {:.3}",
        probs[3..6].iter().sum::<f64>()
    );

    let mut cfg = RunConfig::default();
    cfg.stream.source = StreamSource::Synthetic(SyntheticSpec {
        num_tasks: 2,
        train_per_class: 100,
        ..SyntheticSpec::default()
    });
    cfg.tuner.enabled = true;
    let out = execute(&cfg)?;
    println!(
        "tuned run: A_T = {:.3}, {} policy updates",
        out.metrics.average_accuracy,
        out.tuner_log.len()
    );
    let mut csv = Vec::new();
    write_tuner_csv(&out.tuner_log, &cfg.tuner.space, &mut csv).expect("in-memory write");
    for line in String::from_utf8_lossy(&csv).lines().take(4) {
        println!("{}", &line[..line.len().min(100)]);
    }
    Ok(())
}
