use super::loss::{Batch, LossKind};
use super::mlp::Model;
use crate::error::Result;

/// Result of comparing backprop against central differences.
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: usize,
}

/// Central finite differences of the mean batch loss, one coordinate at a
/// time. Only uses loss evaluation, never the backward pass.
pub fn finite_difference_grad(model: &Model, batch: &Batch, kind: LossKind, step: f64) -> Result<Vec<f64>> {
    let mut probe = model.clone();
    let mut grad = vec![0.0; model.params().len()];
    for (i, g) in grad.iter_mut().enumerate() {
        let orig = model.params()[i];
        probe.params_mut()[i] = orig + step;
        let up = probe.loss(batch, kind)?;
        probe.params_mut()[i] = orig - step;
        let down = probe.loss(batch, kind)?;
        probe.params_mut()[i] = orig;
        *g = (up - down) / (2.0 * step);
    }
    Ok(grad)
}

/// Relative error `|a - n| / max(|a| + |n|, floor)` per coordinate; the floor
/// keeps near-zero coordinates from dominating.
pub fn check_gradient(model: &Model, batch: &Batch, kind: LossKind, step: f64) -> Result<GradCheck> {
    let (_, analytic) = model.loss_and_grad(batch, kind)?;
    let numeric = finite_difference_grad(model, batch, kind, step)?;
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let rel = (a - n).abs() / (a.abs() + n.abs()).max(1e-6);
        if rel > out.max_rel_error {
            out = GradCheck {
                max_rel_error: rel,
                worst_index: i,
            };
        }
    }
    Ok(out)
}
