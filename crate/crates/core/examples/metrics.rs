//! Accuracy matrix metrics and their CSV / JSON forms.

use ocl_core::analysis::{compute_metrics, metrics_json, AccuracyMatrix};

fn main() -> ocl_core::Result<()> {
    let m = AccuracyMatrix::new(vec![vec![0.95], vec![0.70, 0.93], vec![0.55, 0.74, 0.91]])?;
    let r = compute_metrics(&m);
    let t = r.num_tasks as f64;
    println!("A_T = {:.4}", r.average_accuracy);
    println!(
        "plasticity + (T-1)/T * B_T = {:.4}",
        r.plasticity + (t - 1.0) / t * r.backward_transfer.unwrap_or(0.0)
    );
    m.write_csv(std::io::stdout().lock()).expect("stdout");
    println!("{}", metrics_json(&m, &r)?);
    Ok(())
}
