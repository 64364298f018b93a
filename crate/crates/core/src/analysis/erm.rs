use crate::error::{Error, Result};

/// `beta_t = 1 / (1 + 2 N_cur / N_past)`.
pub fn beta_t(n_cur: u64, n_past: u64) -> Result<f64> {
    if n_past == 0 {
        return Err(Error::precondition("beta_t is undefined without past samples"));
    }
    Ok(1.0 / (1.0 + 2.0 * n_cur as f64 / n_past as f64))
}

/// Memory weight `beta_t * lambda` with `lambda = task_size / mem_capacity`.
pub fn memory_weight(n_cur: u64, n_past: u64, task_size: usize, mem_capacity: usize) -> Result<f64> {
    let lambda = crate::stream::lambda_ratio(task_size, mem_capacity)?;
    Ok(beta_t(n_cur, n_past)? * lambda)
}
