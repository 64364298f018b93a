use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::sample::{FeatureShape, Sample};
use super::task::{Task, TaskStream};
use crate::error::{Error, Result};

/// Parameters of a class-incremental stream of Gaussian blobs.
///
/// Class means are drawn uniformly on the sphere of radius
/// `class_separation`; every class has identity covariance.
///
/// With `image_side` set, samples are `side x side` images in `[0, 1]`
/// instead: each class has a smooth, left-right symmetric prototype and
/// pixels get Gaussian noise of standard deviation `1 / class_separation`
/// before clamping.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub num_tasks: usize,
    pub classes_per_task: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub input_dim: usize,
    pub class_separation: f64,
    pub seed: u64,
    pub batch_size: usize,
    /// Optional per-task override of `train_per_class` (imbalanced streams).
    pub train_per_class_by_task: Option<Vec<usize>>,
    /// Image mode; `input_dim` must then equal `side * side`.
    pub image_side: Option<usize>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_tasks: 5,
            classes_per_task: 2,
            train_per_class: 250,
            test_per_class: 100,
            input_dim: 20,
            class_separation: 4.0,
            seed: 0,
            batch_size: 10,
            train_per_class_by_task: None,
            image_side: None,
        }
    }
}

pub fn make_synthetic_stream(spec: &SyntheticSpec) -> Result<TaskStream> {
    if spec.num_tasks == 0
        || spec.classes_per_task == 0
        || spec.train_per_class == 0
        || spec.test_per_class == 0
        || spec.input_dim == 0
        || spec.batch_size == 0
    {
        return Err(Error::precondition(format!(
            "synthetic stream counts must be positive: {spec:?}"
        )));
    }
    if !(spec.class_separation > 0.0 && spec.class_separation.is_finite()) {
        return Err(Error::precondition(format!(
            "class separation must be positive, got {}",
            spec.class_separation
        )));
    }
    if let Some(sizes) = &spec.train_per_class_by_task {
        if sizes.len() != spec.num_tasks || sizes.contains(&0) {
            return Err(Error::precondition(format!(
                "per-task train sizes {sizes:?} must give one positive count per task"
            )));
        }
    }

    let d = spec.input_dim;
    if let Some(side) = spec.image_side {
        if side * side != d {
            return Err(Error::precondition(format!(
                "image side {side} needs input_dim {}, got {d}",
                side * side
            )));
        }
    }
    let shape = match spec.image_side {
        Some(side) => FeatureShape::Image { rows: side, cols: side },
        None => FeatureShape::Vector(d),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let num_classes = spec.num_tasks * spec.classes_per_task;
    let means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| match spec.image_side {
            Some(side) => image_prototype(side, &mut rng),
            None => {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / norm * spec.class_separation).collect()
            }
        })
        .collect();

    let image = spec.image_side.is_some();
    let noise = if image { 1.0 / spec.class_separation } else { 1.0 };
    let draw = |mean: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        mean.iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                let v = m + noise * z;
                if image {
                    v.clamp(0.0, 1.0)
                } else {
                    v
                }
            })
            .collect()
    };

    let total_train: usize = (0..spec.num_tasks)
        .map(|t| spec.classes_per_task * train_count(spec, t))
        .sum();
    let mut next_train_id = 0;
    let mut next_test_id = total_train;
    let mut tasks = Vec::with_capacity(spec.num_tasks);
    for t in 0..spec.num_tasks {
        let classes: Vec<usize> = (t * spec.classes_per_task..(t + 1) * spec.classes_per_task).collect();
        let mut train = Vec::new();
        let mut test = Vec::new();
        for &c in &classes {
            for _ in 0..train_count(spec, t) {
                train.push(Sample::new(next_train_id, draw(&means[c], &mut rng), shape, c, t));
                next_train_id += 1;
            }
            for _ in 0..spec.test_per_class {
                test.push(Sample::new(next_test_id, draw(&means[c], &mut rng), shape, c, t));
                next_test_id += 1;
            }
        }
        tasks.push(Task {
            id: t,
            train,
            test,
            classes: classes.into_iter().collect(),
        });
    }
    TaskStream::new(tasks, spec.batch_size, spec.seed)
}

/// Uniform noise mirrored left to right, box-smoothed over 3x3 and
/// contrast-stretched around 0.5.
fn image_prototype(side: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand::Rng;
    let mut raw = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side.div_ceil(2) {
            let v: f64 = rng.random();
            raw[r * side + c] = v;
            raw[r * side + side - 1 - c] = v;
        }
    }
    let mut out = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            let (mut s, mut n) = (0.0, 0.0);
            for rr in r.saturating_sub(1)..(r + 2).min(side) {
                for cc in c.saturating_sub(1)..(c + 2).min(side) {
                    s += raw[rr * side + cc];
                    n += 1.0;
                }
            }
            out[r * side + c] = (0.5 + 3.0 * (s / n - 0.5)).clamp(0.0, 1.0);
        }
    }
    out
}

fn train_count(spec: &SyntheticSpec, task: usize) -> usize {
    spec.train_per_class_by_task
        .as_ref()
        .map_or(spec.train_per_class, |v| v[task])
}
