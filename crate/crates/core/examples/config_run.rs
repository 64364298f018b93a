//! A run driven by a dotted-key config, written to a run directory.
//!
//! `cargo run --release --example config_run [out_dir]`

use std::time::Instant;

use ocl_core::harness::{execute, write_run, RunConfig};

const CONFIG: &str = "
stream.num_tasks = 3
stream.train_per_class = 100
stream.test_per_class = 50
stream.seed = 7
model.hidden = 32
rehearsal.k = 10
rehearsal.memory_capacity = 50
aug.p = 1
aug.q = 14
aug.target = both
";

fn main() -> ocl_core::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "run_out".into());
    let started = Instant::now();
    let cfg = RunConfig::parse_with_overrides(CONFIG, &[format!("output.dir = {out}")])?;
    print!("{}", cfg.to_text());
    let run = execute(&cfg)?;
    let manifest = write_run(&cfg.output.dir, &cfg, &run, started)?;
    println!("A_T = {:.3}", run.metrics.average_accuracy);
    println!("config hash {}", manifest.config_hash);
    println!("artifacts: {}", manifest.artifacts.join(", "));
    Ok(())
}
