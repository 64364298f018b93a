use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::{TransformOp, MAX_MAGNITUDE};
use crate::error::{Error, Result};
use crate::stream::{FeatureShape, Sample};

pub const DEFAULT_P: usize = 1;
pub const DEFAULT_Q: f64 = 14.0;

/// Which part of the rehearsal batch gets augmented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugTarget {
    None,
    MemoryOnly,
    IncomingOnly,
    Both,
}

impl AugTarget {
    pub fn name(self) -> &'static str {
        match self {
            AugTarget::None => "none",
            AugTarget::MemoryOnly => "memory_only",
            AugTarget::IncomingOnly => "incoming_only",
            AugTarget::Both => "both",
        }
    }

    pub fn augments_memory(self) -> bool {
        matches!(self, AugTarget::MemoryOnly | AugTarget::Both)
    }

    pub fn augments_incoming(self) -> bool {
        matches!(self, AugTarget::IncomingOnly | AugTarget::Both)
    }
}

impl fmt::Display for AugTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => AugTarget::None,
            "memory_only" => AugTarget::MemoryOnly,
            "incoming_only" => AugTarget::IncomingOnly,
            "both" => AugTarget::Both,
            other => return Err(Error::contract(format!("unknown augmentation target `{other}`"))),
        })
    }
}

/// Random (P, Q) policy: each sample gets `p` distinct ops from `ops`, all
/// at magnitude `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugPolicy {
    ops: Vec<TransformOp>,
    p: usize,
    q: f64,
    target: AugTarget,
}

impl AugPolicy {
    pub fn new(ops: Vec<TransformOp>, p: usize, q: f64, target: AugTarget) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::contract("augmentation policy needs at least one op"));
        }
        if p == 0 || p > ops.len() {
            return Err(Error::contract(format!("P = {p} must lie in [1, {}]", ops.len())));
        }
        if !(0.0..=MAX_MAGNITUDE).contains(&q) {
            return Err(Error::contract(format!("Q = {q} outside [0, {MAX_MAGNITUDE}]")));
        }
        Ok(AugPolicy { ops, p, q, target })
    }

    /// All ops valid for `shape`, `P = 1`, `Q = 14`, augmenting both parts.
    pub fn default_for(shape: FeatureShape) -> Self {
        let ops = if shape.is_image() {
            TransformOp::image_ops()
        } else {
            TransformOp::vector_ops()
        };
        AugPolicy {
            ops,
            p: DEFAULT_P,
            q: DEFAULT_Q,
            target: AugTarget::Both,
        }
    }

    pub fn disabled() -> Self {
        AugPolicy {
            ops: vec![TransformOp::Identity],
            p: 1,
            q: 0.0,
            target: AugTarget::None,
        }
    }

    pub fn ops(&self) -> &[TransformOp] {
        &self.ops
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn target(&self) -> AugTarget {
        self.target
    }

    pub fn with_pq(&self, p: usize, q: f64) -> Result<Self> {
        AugPolicy::new(self.ops.clone(), p, q, self.target)
    }

    pub fn with_target(&self, target: AugTarget) -> Self {
        AugPolicy { target, ..self.clone() }
    }
}

/// Augmented copies of `batch`; the inputs are left untouched.
pub fn rand_augment_batch<R: Rng + ?Sized>(batch: &[Sample], policy: &AugPolicy, rng: &mut R) -> Result<Vec<Sample>> {
    batch
        .iter()
        .map(|s| {
            if let Some(op) = policy.ops.iter().find(|op| !op.supports(s.shape)) {
                return Err(Error::contract(format!(
                    "policy op `{op}` does not apply to sample {} with shape {:?}",
                    s.id, s.shape
                )));
            }
            let mut features = s.features.clone();
            for i in index::sample(rng, policy.ops.len(), policy.p) {
                features = policy.ops[i].apply(&features, s.shape, policy.q, rng)?;
            }
            Ok(Sample { features, ..s.clone() })
        })
        .collect()
}
