//! Fixed-capacity rehearsal memory: reservoir-sampling writes, uniform or
//! maximally-interfered reads.

use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{sgd_step, LossKind, Model};
use crate::stream::{to_batch, Sample};

/// Candidate pool used by MIR unless configured.
pub const DEFAULT_MIR_CANDIDATES: usize = 50;
pub const DEFAULT_MEMORY_BATCH: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RetrievalPolicy {
    UniformRandom,
    /// Draw `candidates` items and keep those whose loss grows most under a
    /// virtual SGD step on the incoming batch.
    Mir {
        candidates: usize,
    },
}

#[derive(Clone, Debug)]
struct Slot {
    sample: Sample,
    inserted_at: u64,
}

#[derive(Clone, Debug)]
pub struct ReservoirMemory {
    capacity: usize,
    slots: Vec<Slot>,
    n_seen: u64,
    rng: ChaCha8Rng,
}

impl ReservoirMemory {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::precondition("memory capacity must be positive"));
        }
        Ok(ReservoirMemory {
            capacity,
            slots: Vec::with_capacity(capacity),
            n_seen: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Stream samples offered so far.
    pub fn n_seen(&self) -> u64 {
        self.n_seen
    }

    pub fn items(&self) -> impl ExactSizeIterator<Item = &Sample> {
        self.slots.iter().map(|s| &s.sample)
    }

    /// Offers each sample in order. Below capacity it is appended; otherwise
    /// it replaces a uniformly chosen slot with probability
    /// `capacity / (n_seen + 1)`.
    pub fn update(&mut self, batch: &[Sample]) {
        for sample in batch {
            let step = self.n_seen;
            if self.slots.len() < self.capacity {
                self.slots.push(Slot {
                    sample: sample.clone(),
                    inserted_at: step,
                });
            } else {
                let j = self.rng.random_range(0..=step);
                if (j as usize) < self.capacity {
                    self.slots[j as usize] = Slot {
                        sample: sample.clone(),
                        inserted_at: step,
                    };
                }
            }
            self.n_seen += 1;
        }
    }

    /// `min(b, len)` items drawn uniformly without replacement.
    pub fn retrieve_random<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Vec<Sample> {
        let amount = b.min(self.slots.len());
        index::sample(rng, self.slots.len(), amount)
            .into_iter()
            .map(|i| self.slots[i].sample.clone())
            .collect()
    }

    /// Maximally interfered retrieval.
    ///
    /// Scores `min(candidates, len)` uniformly drawn items by
    /// `loss(theta') - loss(theta)`, where `theta'` is one SGD step of size
    /// `lr` on `incoming`, and returns the `b` highest. Ties keep draw order.
    /// `model` is not modified.
    #[allow(clippy::too_many_arguments)]
    pub fn retrieve_mir<R: Rng + ?Sized>(
        &self,
        model: &Model,
        incoming: &[Sample],
        lr: f64,
        candidates: usize,
        b: usize,
        kind: LossKind,
        rng: &mut R,
    ) -> Result<Vec<Sample>> {
        if self.slots.is_empty() {
            return Err(Error::precondition("MIR retrieval from an empty memory"));
        }
        let pool: Vec<Sample> = self.retrieve_random(candidates, rng);
        let batch = to_batch(&pool)?;
        let before = model.per_sample_losses(&batch, kind)?;
        let (_, grad) = model.loss_and_grad(&to_batch(incoming)?, kind)?;
        let virtual_model = model.with_params(sgd_step(model.params(), &grad, lr)?)?;
        let after = virtual_model.per_sample_losses(&batch, kind)?;

        let mut ranked: Vec<(usize, f64)> = after.iter().zip(&before).map(|(a, b)| a - b).enumerate().collect();
        // stable sort keeps draw order among equal scores
        ranked.sort_by(|x, y| y.1.total_cmp(&x.1));
        Ok(ranked.into_iter().take(b).map(|(i, _)| pool[i].clone()).collect())
    }

    /// Debug dump: `task_id,label,inserted_at` per retained item.
    pub fn write_dump_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "task_id,label,inserted_at")?;
        for s in &self.slots {
            writeln!(out, "{},{},{}", s.sample.task_id, s.sample.label, s.inserted_at)?;
        }
        Ok(())
    }
}
