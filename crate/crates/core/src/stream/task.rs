use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sample::Sample;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub id: usize,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub classes: BTreeSet<usize>,
}

/// Batch handed to the learner by [`TaskStream::next_batch`].
#[derive(Clone, Debug)]
pub struct IncomingBatch {
    pub samples: Vec<Sample>,
    pub task: usize,
    /// Set on the first batch of every task.
    pub starts_task: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Cursor {
    pub task: usize,
    pub offset: usize,
}

/// An ordered sequence of class-disjoint tasks consumed once, batch by batch.
#[derive(Clone, Debug)]
pub struct TaskStream {
    tasks: Vec<Task>,
    batch_size: usize,
    seed: u64,
    cursor: Cursor,
    order: Vec<usize>,
    num_classes: usize,
}

impl TaskStream {
    pub fn new(tasks: Vec<Task>, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::precondition("batch size must be positive"));
        }
        if tasks.is_empty() {
            return Err(Error::precondition("a stream needs at least one task"));
        }
        let mut seen = BTreeSet::new();
        for task in &tasks {
            for s in task.train.iter().chain(&task.test) {
                if !task.classes.contains(&s.label) {
                    return Err(Error::contract(format!(
                        "task {} holds label {} outside its class set",
                        task.id, s.label
                    )));
                }
            }
            for &c in &task.classes {
                if !seen.insert(c) {
                    return Err(Error::contract(format!("class {c} appears in more than one task")));
                }
            }
        }
        let num_classes = seen.iter().next_back().map_or(0, |c| c + 1);
        let mut stream = TaskStream {
            tasks,
            batch_size,
            seed,
            cursor: Cursor::default(),
            order: Vec::new(),
            num_classes,
        };
        stream.reset();
        Ok(stream)
    }

    /// Rewinds to the beginning; the shuffled order is a function of the seed.
    pub fn reset(&mut self) {
        self.cursor = Cursor::default();
        self.order = self.shuffled_order(0);
    }

    fn shuffled_order(&self, task: usize) -> Vec<usize> {
        let Some(t) = self.tasks.get(task) else {
            return Vec::new();
        };
        let mut order: Vec<usize> = (0..t.train.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(task as u64 + 1);
        order.shuffle(&mut rng);
        order
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cursor(&self) -> Cursor {
        self.cursor
    }

    /// One past the largest class id.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.tasks
            .iter()
            .flat_map(|t| t.train.first())
            .map(|s| s.features.len())
            .next()
            .unwrap_or(0)
    }

    /// Next `<= batch_size` samples of the current task, in shuffled order;
    /// `None` once every task is exhausted.
    pub fn next_batch(&mut self) -> Option<IncomingBatch> {
        loop {
            let task = self.tasks.get(self.cursor.task)?;
            if self.cursor.offset < task.train.len() {
                let start = self.cursor.offset;
                let end = (start + self.batch_size).min(task.train.len());
                let samples = self.order[start..end].iter().map(|&i| task.train[i].clone()).collect();
                self.cursor.offset = end;
                return Some(IncomingBatch {
                    samples,
                    task: self.cursor.task,
                    starts_task: start == 0,
                });
            }
            self.cursor = Cursor {
                task: self.cursor.task + 1,
                offset: 0,
            };
            self.order = self.shuffled_order(self.cursor.task);
        }
    }

    /// `|train set of task| / memory_capacity`.
    pub fn lambda_ratio(&self, task_index: usize, memory_capacity: usize) -> Result<f64> {
        lambda_ratio(
            self.tasks
                .get(task_index)
                .ok_or_else(|| Error::precondition(format!("no task {task_index}")))?
                .train
                .len(),
            memory_capacity,
        )
    }

    /// The first `n` tasks as a fresh stream.
    pub fn prefix(&self, n: usize) -> Result<TaskStream> {
        if n == 0 || n > self.tasks.len() {
            return Err(Error::precondition(format!(
                "prefix of {n} tasks from a stream of {}",
                self.tasks.len()
            )));
        }
        TaskStream::new(self.tasks[..n].to_vec(), self.batch_size, self.seed)
    }
}

pub fn lambda_ratio(task_size: usize, memory_capacity: usize) -> Result<f64> {
    if memory_capacity == 0 {
        return Err(Error::precondition("memory capacity must be positive"));
    }
    Ok(task_size as f64 / memory_capacity as f64)
}
