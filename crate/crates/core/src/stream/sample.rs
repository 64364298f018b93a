use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Batch, Tensor};

/// How a flat feature row is laid out; images are row-major `rows x cols`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureShape {
    Vector(usize),
    Image { rows: usize, cols: usize },
}

impl FeatureShape {
    pub fn len(&self) -> usize {
        match *self {
            FeatureShape::Vector(d) => d,
            FeatureShape::Image { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_image(&self) -> bool {
        matches!(self, FeatureShape::Image { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Stream-unique identifier, used to audit single-pass consumption.
    pub id: usize,
    pub features: Vec<f64>,
    pub shape: FeatureShape,
    /// Global class id (single-head labelling).
    pub label: usize,
    pub task_id: usize,
    /// Logits recorded when the sample entered memory (distillation replay).
    pub stored_logits: Option<Vec<f64>>,
}

impl Sample {
    pub fn new(id: usize, features: Vec<f64>, shape: FeatureShape, label: usize, task_id: usize) -> Self {
        debug_assert_eq!(features.len(), shape.len());
        Sample {
            id,
            features,
            shape,
            label,
            task_id,
            stored_logits: None,
        }
    }
}

/// Stacks samples into a labelled batch.
pub fn to_batch(samples: &[Sample]) -> Result<Batch> {
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
    let inputs = if rows.is_empty() {
        Tensor::new(vec![0, 0], vec![])?
    } else {
        Tensor::from_rows(&rows)?
    };
    Batch::new(inputs, samples.iter().map(|s| s.label).collect())
}

/// Like [`to_batch`] but with each sample's stored logits as dense targets.
pub fn to_distillation_batch(samples: &[Sample]) -> Result<Batch> {
    let targets = samples
        .iter()
        .map(|s| {
            s.stored_logits
                .as_deref()
                .ok_or_else(|| Error::contract(format!("sample {} has no stored logits", s.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    to_batch(samples)?.with_targets(Tensor::from_rows(&targets)?)
}
