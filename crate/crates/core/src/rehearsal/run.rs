use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RehearsalConfig;
use super::step::{rar_step, BatchSummary, Choice, TraceRecord, TrainState};
use crate::analysis::AccuracyMatrix;
use crate::error::{Error, Result};
use crate::memory::ReservoirMemory;
use crate::nn::Model;
use crate::stream::{to_batch, Sample, TaskStream};

/// Observer plugged into [`run_stream`].
pub trait Hooks {
    fn on_task_start(&mut self, _task: usize) {}

    /// Overrides (K, P, Q) for incoming batch `t`.
    fn choose(&mut self, _t: u64) -> Option<Choice> {
        None
    }

    fn after_batch(&mut self, _summary: &BatchSummary) -> Result<()> {
        Ok(())
    }
}

pub struct NoHooks;

impl Hooks for NoHooks {}

/// Accuracy of the memory's past-task items against past-task test data,
/// measured when a task ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryGap {
    pub after_task: usize,
    pub memory_accuracy: f64,
    pub test_accuracy: f64,
}

impl MemoryGap {
    pub fn gap(&self) -> f64 {
        self.memory_accuracy - self.test_accuracy
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub model: Model,
    /// Model after each task.
    pub checkpoints: Vec<Model>,
    pub accuracy: AccuracyMatrix,
    pub trace: Vec<TraceRecord>,
    pub memory: Option<ReservoirMemory>,
    pub memory_gaps: Vec<MemoryGap>,
    pub batches: u64,
}

impl RunResult {
    pub fn mean_memory_gap(&self) -> Option<f64> {
        if self.memory_gaps.is_empty() {
            return None;
        }
        Some(self.memory_gaps.iter().map(MemoryGap::gap).sum::<f64>() / self.memory_gaps.len() as f64)
    }
}

pub fn accuracy_on(model: &Model, samples: &[Sample]) -> Result<f64> {
    let b = to_batch(samples)?;
    model.accuracy(b.inputs(), b.labels())
}

/// Training state plus the random stream that drives retrieval and
/// augmentation.
#[derive(Clone)]
pub struct Learner {
    cfg: RehearsalConfig,
    state: TrainState,
    rng: ChaCha8Rng,
}

impl Learner {
    pub fn new(model: Model, cfg: RehearsalConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let memory_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
        Ok(Learner {
            state: TrainState::new(model, &cfg, memory_seed)?,
            cfg,
            rng,
        })
    }

    pub fn config(&self) -> &RehearsalConfig {
        &self.cfg
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn model(&self) -> &Model {
        &self.state.model
    }

    pub fn observe(&mut self, incoming: &[Sample], choice: Option<Choice>) -> Result<BatchSummary> {
        rar_step(&mut self.state, incoming, &self.cfg, choice, true, &mut self.rng)
    }

    /// Extra offline passes over `train`, reshuffled each epoch, without
    /// memory writes.
    pub fn replay_epochs(&mut self, train: &[Sample], epochs: usize) -> Result<()> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        for _ in 0..epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.cfg.incoming_batch_size) {
                let batch: Vec<Sample> = chunk.iter().map(|&i| train[i].clone()).collect();
                rar_step(&mut self.state, &batch, &self.cfg, None, false, &mut self.rng)?;
            }
        }
        Ok(())
    }

    /// Continues as plain finetuning: the memory is discarded and never
    /// refilled.
    pub fn drop_memory(&mut self) {
        self.state.memory = None;
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }
}

/// Trains on the whole stream from its start and evaluates every seen task
/// after each task.
pub fn run_stream(
    stream: &mut TaskStream,
    model: Model,
    cfg: &RehearsalConfig,
    seed: u64,
    hooks: &mut dyn Hooks,
) -> Result<RunResult> {
    if model.spec().output_size() < stream.num_classes() {
        return Err(Error::precondition(format!(
            "model has {} outputs for {} classes",
            model.spec().output_size(),
            stream.num_classes()
        )));
    }
    if model.spec().input_size() != stream.input_dim() {
        return Err(Error::precondition(format!(
            "model expects {} inputs, stream provides {}",
            model.spec().input_size(),
            stream.input_dim()
        )));
    }
    if let Some(t) = stream.tasks().iter().find(|t| t.test.is_empty()) {
        return Err(Error::precondition(format!("task {} has no test samples", t.id)));
    }
    stream.reset();
    let mut learner = Learner::new(model, cfg.clone(), seed)?;
    let tasks = stream.tasks().to_vec();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut checkpoints = Vec::new();
    let mut gaps = Vec::new();
    let mut next_task = 0usize;

    let mut finish = |learner: &mut Learner, upto: usize, rows: &mut Vec<Vec<f64>>| -> Result<()> {
        while rows.len() < upto {
            let i = rows.len();
            if let Some(e) = learner.cfg.offline_epochs {
                learner.replay_epochs(&tasks[i].train, e - 1)?;
            }
            let model = learner.model();
            let row = tasks[..=i]
                .iter()
                .map(|t| accuracy_on(model, &t.test))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
            checkpoints.push(model.clone());
            if i > 0 {
                if let Some(mem) = &learner.state.memory {
                    let past: Vec<Sample> = mem.items().filter(|s| s.task_id < i).cloned().collect();
                    if !past.is_empty() {
                        let test: Vec<Sample> = tasks[..i].iter().flat_map(|t| t.test.iter().cloned()).collect();
                        gaps.push(MemoryGap {
                            after_task: i,
                            memory_accuracy: accuracy_on(model, &past)?,
                            test_accuracy: accuracy_on(model, &test)?,
                        });
                    }
                }
            }
        }
        Ok(())
    };

    while let Some(batch) = stream.next_batch() {
        if batch.task >= next_task {
            finish(&mut learner, batch.task, &mut rows)?;
            hooks.on_task_start(batch.task);
            next_task = batch.task + 1;
        }
        let choice = hooks.choose(learner.state.t);
        let summary = learner.observe(&batch.samples, choice)?;
        hooks.after_batch(&summary)?;
    }
    finish(&mut learner, tasks.len(), &mut rows)?;

    let batches = learner.state.t;
    let state = learner.into_state();
    Ok(RunResult {
        model: state.model,
        checkpoints,
        accuracy: AccuracyMatrix::new(rows)?,
        trace: state.trace,
        memory: state.memory,
        memory_gaps: gaps,
        batches,
    })
}
