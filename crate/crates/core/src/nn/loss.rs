use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Alpha used for logit distillation on memory samples unless configured.
pub const DEFAULT_DISTILLATION_ALPHA: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// Softmax cross-entropy on integer labels, via a max-shifted log-sum-exp.
    CrossEntropy,
    /// `sum_c (z_c - t_c)^2` against dense targets, or the one-hot label when
    /// the batch carries none.
    SquaredError,
    /// `alpha * mean_c (z_c - t_c)^2` against stored logits.
    DistillationMse { alpha: f64 },
}

impl LossKind {
    pub fn distillation(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::contract(format!(
                "distillation alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(LossKind::DistillationMse { alpha })
    }

    pub(crate) fn sample_loss(&self, z: &[f64], batch: &Batch, i: usize) -> Result<f64> {
        Ok(match *self {
            LossKind::CrossEntropy => {
                let y = batch.labels[i];
                log_sum_exp(z) - z[y]
            }
            LossKind::SquaredError => {
                let mut s = 0.0;
                for (c, &zc) in z.iter().enumerate() {
                    let d = zc - batch.dense_target(i, c);
                    s += d * d;
                }
                s
            }
            LossKind::DistillationMse { alpha } => {
                let t = batch.stored_target(i)?;
                let s: f64 = z.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                alpha * s / z.len() as f64
            }
        })
    }

    /// Writes `scale * dL/dz` for sample `i` into `out`.
    pub(crate) fn logit_grad(&self, z: &[f64], batch: &Batch, i: usize, scale: f64, out: &mut [f64]) -> Result<()> {
        match *self {
            LossKind::CrossEntropy => {
                let y = batch.labels[i];
                let lse = log_sum_exp(z);
                for (c, (o, &zc)) in out.iter_mut().zip(z).enumerate() {
                    let p = (zc - lse).exp();
                    *o = scale * (p - if c == y { 1.0 } else { 0.0 });
                }
            }
            LossKind::SquaredError => {
                for (c, (o, &zc)) in out.iter_mut().zip(z).enumerate() {
                    *o = scale * 2.0 * (zc - batch.dense_target(i, c));
                }
            }
            LossKind::DistillationMse { alpha } => {
                let t = batch.stored_target(i)?;
                let k = scale * 2.0 * alpha / z.len() as f64;
                for ((o, &zc), &tc) in out.iter_mut().zip(z).zip(t) {
                    *o = k * (zc - tc);
                }
            }
        }
        Ok(())
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Inputs with labels and, optionally, one dense target row per sample
/// (regression targets or stored logits).
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    inputs: Tensor,
    labels: Vec<usize>,
    targets: Option<Tensor>,
}

impl Batch {
    pub fn new(inputs: Tensor, labels: Vec<usize>) -> Result<Self> {
        if inputs.shape().len() != 2 || inputs.rows() != labels.len() {
            return Err(Error::contract(format!(
                "batch inputs {:?} do not match {} labels",
                inputs.shape(),
                labels.len()
            )));
        }
        Ok(Batch {
            inputs,
            labels,
            targets: None,
        })
    }

    pub fn with_targets(mut self, targets: Tensor) -> Result<Self> {
        if targets.rows() != self.labels.len() || targets.shape().len() != 2 {
            return Err(Error::contract(format!(
                "targets {:?} do not match batch of {}",
                targets.shape(),
                self.labels.len()
            )));
        }
        self.targets = Some(targets);
        Ok(self)
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn targets(&self) -> Option<&Tensor> {
        self.targets.as_ref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn dense_target(&self, i: usize, c: usize) -> f64 {
        match &self.targets {
            Some(t) => t.row(i)[c],
            None => {
                if self.labels[i] == c {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn stored_target(&self, i: usize) -> Result<&[f64]> {
        self.targets
            .as_ref()
            .map(|t| t.row(i))
            .ok_or_else(|| Error::contract("distillation loss needs stored logits on every sample"))
    }
}
