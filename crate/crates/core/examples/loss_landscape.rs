//! Loss landscape through w1, w2 (RER) and w2ft (finetune) on a two-task
//! stream; writes the grid and checkpoints to a directory.
//!
//! `cargo run --release --example loss_landscape [out_dir]`

use std::path::PathBuf;

use ocl_core::augment::AugPolicy;
use ocl_core::harness::{landscape_experiment, write_landscape, RunConfig, StreamSource};
use ocl_core::stream::SyntheticSpec;

fn main() -> ocl_core::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "landscape_out".into()).into();
    let mut cfg = RunConfig::default();
    cfg.stream.source = StreamSource::Synthetic(SyntheticSpec {
        num_tasks: 2,
        input_dim: 50,
        class_separation: 3.0,
        ..SyntheticSpec::default()
    });
    cfg.rehearsal.lr = 0.03;
    cfg.rehearsal.aug = AugPolicy::disabled();
    let res = landscape_experiment(&cfg, 41)?;
    let s = &res.summary;
    println!("w2   at ({:.3}, {:.3}), residual {:.1e}", s.w2.a, s.w2.b, s.w2.residual);
    println!(
        "w2ft at ({:.3}, {:.3}), residual {:.1e}",
        s.w2ft.a, s.w2ft.b, s.w2ft.residual
    );
    println!(
        "task-1 test - memory loss at the CL cell: {:.4}",
        s.cl_cell_gap.unwrap_or(f64::NAN)
    );
    write_landscape(&out, &res)?;
    println!("wrote {}", out.display());
    Ok(())
}
