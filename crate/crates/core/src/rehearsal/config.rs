use serde::{Deserialize, Serialize};

use crate::augment::AugPolicy;
use crate::error::{Error, Result};
use crate::memory::{RetrievalPolicy, DEFAULT_MEMORY_BATCH};
use crate::nn::LossKind;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_LR: f64 = 0.1;
pub const DEFAULT_INCOMING_BATCH: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RehearsalConfig {
    /// Inner iterations per incoming batch.
    pub k: usize,
    pub lr: f64,
    pub incoming_batch_size: usize,
    pub memory_batch_size: usize,
    /// Zero disables the memory (plain finetuning).
    pub memory_capacity: usize,
    /// Memory-term loss. Distillation keeps cross-entropy on incoming data.
    pub loss: LossKind,
    /// Reweighted gradient `2 ((1 - alpha) g_in + alpha g_mem)`.
    pub alpha_rw: Option<f64>,
    pub aug: AugPolicy,
    pub retrieval: RetrievalPolicy,
    /// Total passes over each task; `None` is the online single pass.
    pub offline_epochs: Option<usize>,
}

impl Default for RehearsalConfig {
    /// ER with K = 10 inner iterations and no augmentation.
    fn default() -> Self {
        RehearsalConfig {
            k: DEFAULT_K,
            lr: DEFAULT_LR,
            incoming_batch_size: DEFAULT_INCOMING_BATCH,
            memory_batch_size: DEFAULT_MEMORY_BATCH,
            memory_capacity: 100,
            loss: LossKind::CrossEntropy,
            alpha_rw: None,
            aug: AugPolicy::disabled(),
            retrieval: RetrievalPolicy::UniformRandom,
            offline_epochs: None,
        }
    }
}

impl RehearsalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::contract("K must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::contract(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.incoming_batch_size == 0 || self.memory_batch_size == 0 {
            return Err(Error::contract("batch sizes must be positive"));
        }
        if let Some(a) = self.alpha_rw {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::contract(format!("alpha_rw must lie in (0, 1), got {a}")));
            }
        }
        if let RetrievalPolicy::Mir { candidates } = self.retrieval {
            if candidates < self.memory_batch_size {
                return Err(Error::contract(format!(
                    "MIR needs at least {} candidates, got {candidates}",
                    self.memory_batch_size
                )));
            }
        }
        if self.offline_epochs == Some(0) {
            return Err(Error::contract("offline mode needs at least one epoch"));
        }
        if let LossKind::DistillationMse { alpha } = self.loss {
            LossKind::distillation(alpha)?;
        }
        Ok(())
    }

    pub fn incoming_loss(&self) -> LossKind {
        match self.loss {
            LossKind::DistillationMse { .. } => LossKind::CrossEntropy,
            other => other,
        }
    }

    pub fn memory_loss(&self) -> LossKind {
        self.loss
    }

    pub fn uses_distillation(&self) -> bool {
        matches!(self.loss, LossKind::DistillationMse { .. })
    }
}
