//! Ranks (K, P, Q) on a two-task validation prefix with offline passes.

use ocl_core::harness::{make_grid, sweep, write_sweep_csv, RunConfig, StreamSource};
use ocl_core::stream::SyntheticSpec;
use ocl_core::tuner::AugArm;

fn main() -> ocl_core::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.stream.source = StreamSource::Synthetic(SyntheticSpec {
        train_per_class: 100,
        ..SyntheticSpec::default()
    });
    cfg.rehearsal.memory_capacity = 20;
    let grid = make_grid(&[1, 5, 10], &[AugArm { p: 1, q: 5.0 }, AugArm { p: 2, q: 14.0 }]);
    let ranked = sweep(&cfg, &grid, 2, 3)?;
    write_sweep_csv(&ranked, std::io::stdout().lock()).expect("stdout");
    let best = ranked[0].point;
    println!("winner: K = {}, {:?}", best.k, best.aug);
    Ok(())
}
