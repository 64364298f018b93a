//! Monte-Carlo checks that rehearsal gradients are unbiased for the weighted
//! and orbit-averaged empirical risks.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::erm::beta_t;
use crate::augment::{group_orbit_losses, FiniteGroup};
use crate::error::{Error, Result};
use crate::nn::{Activation, LossKind, MlpSpec, Model};
use crate::stream::{to_batch, FeatureShape, Sample};

pub const DEFAULT_WEIGHT_TOLERANCE: f64 = 0.02;
pub const DEFAULT_COSINE_THRESHOLD: f64 = 0.999;

/// Fixed number of work chunks so results do not depend on thread count.
const CHUNKS: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    /// The confidence interval is wider than the tolerance.
    Inconclusive,
}

/// Monte-Carlo loss of one sample against its exact orbit average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCheck {
    pub monte_carlo_mean: f64,
    pub exact_mean: f64,
    pub sigma: f64,
    pub within_3_sigma: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErmVerdict {
    pub check: String,
    pub trials: u64,
    /// Predicted ratio of per-sample memory weight to per-sample task weight.
    pub predicted_weight: f64,
    pub empirical_weight: f64,
    /// Three-sigma half width of the empirical weight.
    pub weight_ci_half_width: f64,
    pub weight_rel_error: f64,
    pub cosine: f64,
    pub relative_norm_error: f64,
    pub weight_tolerance: f64,
    pub cosine_threshold: f64,
    pub loss_check: Option<LossCheck>,
    pub status: VerdictStatus,
    pub notes: Vec<String>,
}

impl ErmVerdict {
    pub fn passed(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub weight: f64,
    pub cosine: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            weight: DEFAULT_WEIGHT_TOLERANCE,
            cosine: DEFAULT_COSINE_THRESHOLD,
        }
    }
}

/// Rehearsal on a task `D_T` after the memory was filled from past data.
#[derive(Clone, Debug)]
pub struct Prop1Config {
    pub model: Model,
    /// Memory contents at the task boundary; its size is the capacity.
    pub past_memory: Vec<Sample>,
    pub task: Vec<Sample>,
    /// Past samples the reservoir had seen at the task boundary.
    pub n_past: u64,
    pub incoming_batch: usize,
    pub memory_batch: usize,
    /// Incoming batches absorbed by the reservoir before the gradient draw.
    pub batches_absorbed: usize,
    pub kind: LossKind,
}

impl Prop1Config {
    /// Linear 4 -> 3 model on Gaussian data, batch sizes 2 and 2.
    pub fn tiny(task_size: usize, memory_size: usize, n_past: u64, batches_absorbed: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = tiny_model(4, 3, &mut rng);
        let past_memory = gaussian_samples(memory_size, 4, 3, 0, &mut rng);
        let task = gaussian_samples(task_size, 4, 3, memory_size, &mut rng);
        Prop1Config {
            model,
            past_memory,
            task,
            n_past,
            incoming_batch: 2.min(task_size),
            memory_batch: 2.min(memory_size),
            batches_absorbed,
            kind: LossKind::CrossEntropy,
        }
    }

    /// Samples of the current task absorbed before the draw.
    pub fn n_cur(&self) -> u64 {
        (self.batches_absorbed * self.incoming_batch) as u64
    }

    fn validate(&self) -> Result<()> {
        let m = self.past_memory.len();
        let n = self.task.len();
        if m == 0 || n == 0 {
            return Err(Error::precondition("memory and task must be nonempty"));
        }
        if (self.n_past as usize) < m {
            return Err(Error::precondition(format!(
                "memory of {m} cannot represent only {} past samples",
                self.n_past
            )));
        }
        if self.incoming_batch == 0 || self.incoming_batch > n {
            return Err(Error::precondition("incoming batch must lie in [1, |D_T|]"));
        }
        if self.memory_batch == 0 || self.memory_batch > m {
            return Err(Error::precondition("memory batch must lie in [1, capacity]"));
        }
        if self.n_cur() as usize > n {
            return Err(Error::precondition(format!(
                "{} absorbed batches exceed a task of {n}",
                self.batches_absorbed
            )));
        }
        Ok(())
    }
}

fn tiny_model(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Model {
    let spec = MlpSpec::new(vec![input, output], Activation::Relu).expect("valid spec");
    let params = (0..spec.param_count())
        .map(|_| StandardNormal.sample(&mut *rng))
        .collect();
    Model::new(spec, params).expect("finite params")
}

fn gaussian_samples(n: usize, dim: usize, classes: usize, first_id: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
            Sample::new(
                first_id + i,
                x,
                FeatureShape::Vector(dim),
                rng.random_range(0..classes),
                0,
            )
        })
        .collect()
}

/// Per-sample weight sums and the two per-trial group means used for the
/// ratio confidence interval.
#[derive(Clone)]
struct Accum {
    weights: Vec<f64>,
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
    loss_sum: f64,
    loss_sq: f64,
}

impl Accum {
    fn new(cells: usize) -> Self {
        Accum {
            weights: vec![0.0; cells],
            n: 0.0,
            sx: 0.0,
            sy: 0.0,
            sxx: 0.0,
            syy: 0.0,
            sxy: 0.0,
            loss_sum: 0.0,
            loss_sq: 0.0,
        }
    }

    fn push_ratio(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    fn merge(mut self, o: &Accum) -> Self {
        for (a, b) in self.weights.iter_mut().zip(&o.weights) {
            *a += b;
        }
        self.n += o.n;
        self.sx += o.sx;
        self.sy += o.sy;
        self.sxx += o.sxx;
        self.syy += o.syy;
        self.sxy += o.sxy;
        self.loss_sum += o.loss_sum;
        self.loss_sq += o.loss_sq;
        self
    }

    /// Ratio of means with a delta-method three-sigma half width.
    fn ratio(&self) -> (f64, f64) {
        let n = self.n;
        let (mx, my) = (self.sx / n, self.sy / n);
        let r = mx / my;
        let vx = self.sxx / n - mx * mx;
        let vy = self.syy / n - my * my;
        let cxy = self.sxy / n - mx * my;
        let var = (vx - 2.0 * r * cxy + r * r * vy).max(0.0) / (n * my * my);
        (r, 3.0 * var.sqrt())
    }
}

fn run_chunks<F>(trials: u64, seed: u64, cells: usize, body: F) -> Accum
where
    F: Fn(&mut ChaCha8Rng, &mut Accum) + Sync,
{
    let parts: Vec<Accum> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let count = trials / CHUNKS + u64::from(c < trials % CHUNKS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c + 1);
            let mut acc = Accum::new(cells);
            for _ in 0..count {
                body(&mut rng, &mut acc);
            }
            acc
        })
        .collect();
    parts.iter().fold(Accum::new(cells), |a, p| a.merge(p))
}

fn per_sample_grads(model: &Model, samples: &[Sample], kind: LossKind) -> Result<Vec<Vec<f64>>> {
    samples
        .iter()
        .map(|s| Ok(model.loss_and_grad(&to_batch(std::slice::from_ref(s))?, kind)?.1))
        .collect()
}

fn weighted_sum(grads: &[Vec<f64>], weights: &[f64], scale: f64, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (g, w) in grads.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(g) {
            *o += w * scale * v;
        }
    }
    out
}

fn compare(empirical: &[f64], analytic: &[f64]) -> (f64, f64) {
    let dot: f64 = empirical.iter().zip(analytic).map(|(a, b)| a * b).sum();
    let ne = empirical.iter().map(|v| v * v).sum::<f64>().sqrt();
    let na = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = empirical
        .iter()
        .zip(analytic)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let cosine = if ne == 0.0 || na == 0.0 {
        0.0
    } else {
        (dot / (ne * na)).clamp(-1.0, 1.0)
    };
    (cosine, diff / na.max(f64::MIN_POSITIVE))
}

fn status(rel_err: f64, half_width_rel: f64, cosine: f64, extra_ok: bool, tol: Tolerances) -> VerdictStatus {
    if rel_err <= tol.weight && cosine > tol.cosine && extra_ok {
        VerdictStatus::Pass
    } else if half_width_rel > tol.weight {
        VerdictStatus::Inconclusive
    } else {
        VerdictStatus::Fail
    }
}

/// Simulates independent replicas of: reservoir absorption of
/// `batches_absorbed` incoming batches, then one memory-batch draw and one
/// incoming-batch draw. The mean rehearsal gradient is compared with the
/// gradient of `sum_T l + beta_t lambda sum_M l`, up to its positive scale.
pub fn verify_prop1(cfg: &Prop1Config, trials: u64, seed: u64, tol: Tolerances) -> Result<ErmVerdict> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::precondition("at least one trial is required"));
    }
    let m = cfg.past_memory.len();
    let n = cfg.task.len();
    let absorbed = cfg.n_cur() as usize;
    let (b, bm) = (cfg.incoming_batch, cfg.memory_batch);

    // Cells 0..m hold past items, m..m+n the current task.
    let acc = run_chunks(trials, seed, m + n, |rng, acc| {
        let mut slots: Vec<usize> = (0..m).collect();
        let mut order: Vec<usize> = (0..n).collect();
        for (i, seen) in (0..absorbed).zip(cfg.n_past..) {
            let pick = rng.random_range(i..n);
            order.swap(i, pick);
            let j = rng.random_range(0..=seen);
            if (j as usize) < m {
                slots[j as usize] = m + order[i];
            }
        }
        let (mut x, mut y) = (0.0, 0.0);
        for s in index::sample(rng, m, bm) {
            let cell = slots[s];
            acc.weights[cell] += 1.0 / bm as f64;
            if cell < m {
                x += 1.0 / bm as f64;
            } else {
                y += 1.0 / bm as f64;
            }
        }
        for j in index::sample(rng, n, b) {
            acc.weights[m + j] += 1.0 / b as f64;
            y += 1.0 / b as f64;
        }
        acc.push_ratio(x / m as f64, y / n as f64);
    });

    let (ratio, half) = acc.ratio();
    let beta = beta_t(cfg.n_cur(), cfg.n_past)?;
    let lambda = n as f64 / m as f64;
    let predicted = beta * lambda;

    let dim = cfg.model.params().len();
    let mut grads = per_sample_grads(&cfg.model, &cfg.past_memory, cfg.kind)?;
    grads.extend(per_sample_grads(&cfg.model, &cfg.task, cfg.kind)?);
    let empirical = weighted_sum(&grads, &acc.weights, 1.0 / acc.n, dim);

    let (np, nc) = (cfg.n_past as f64, cfg.n_cur() as f64);
    let scale = (np + 2.0 * nc) / ((np + nc) * n as f64);
    let (_, gm) = cfg.model.loss_and_grad(&to_batch(&cfg.past_memory)?, cfg.kind)?;
    let (_, gt) = cfg.model.loss_and_grad(&to_batch(&cfg.task)?, cfg.kind)?;
    let analytic: Vec<f64> = gt
        .iter()
        .zip(&gm)
        .map(|(t, mm)| scale * (n as f64 * t + predicted * m as f64 * mm))
        .collect();

    let (cosine, rel_norm) = compare(&empirical, &analytic);
    let rel_err = (ratio - predicted).abs() / predicted;
    Ok(ErmVerdict {
        check: if cfg.batches_absorbed == 0 { "prop2" } else { "prop1" }.to_string(),
        trials,
        predicted_weight: predicted,
        empirical_weight: ratio,
        weight_ci_half_width: half,
        weight_rel_error: rel_err,
        cosine,
        relative_norm_error: rel_norm,
        weight_tolerance: tol.weight,
        cosine_threshold: tol.cosine,
        loss_check: None,
        status: status(rel_err, half / predicted, cosine, true, tol),
        notes: vec![format!(
            "reservoir advanced per sample through {} incoming batches of {b} (n_cur = {}, n_past = {}, beta = {beta})",
            cfg.batches_absorbed,
            cfg.n_cur(),
            cfg.n_past
        )],
    })
}

/// Rehearsal with a random group element applied to each drawn batch.
#[derive(Clone, Debug)]
pub struct Prop3Config {
    pub model: Model,
    pub memory: Vec<Sample>,
    pub task: Vec<Sample>,
    pub incoming_batch: usize,
    pub memory_batch: usize,
    pub kind: LossKind,
}

impl Prop3Config {
    /// Linear model on `side x side` images with i.i.d. uniform pixels, whose
    /// distribution is invariant under any pixel permutation.
    pub fn tiny_images(side: usize, task_size: usize, memory_size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = side * side;
        let model = tiny_model(dim, 3, &mut rng);
        let shape = FeatureShape::Image { rows: side, cols: side };
        let mut draw = |count: usize, first: usize| -> Vec<Sample> {
            (0..count)
                .map(|i| {
                    let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                    Sample::new(first + i, x, shape, rng.random_range(0..3), 0)
                })
                .collect()
        };
        let memory = draw(memory_size, 0);
        let task = draw(task_size, memory_size);
        Prop3Config {
            model,
            memory,
            task,
            incoming_batch: 2.min(task_size),
            memory_batch: 2.min(memory_size),
            kind: LossKind::CrossEntropy,
        }
    }
}

/// Mean augmented rehearsal gradient against the gradient of the exactly
/// orbit-averaged risk `mean_T mean_g l(g x) + mean_M mean_g l(g x)`.
pub fn verify_prop3(
    cfg: &Prop3Config,
    group: &FiniteGroup,
    trials: u64,
    seed: u64,
    tol: Tolerances,
) -> Result<ErmVerdict> {
    let (m, n, gsize) = (cfg.memory.len(), cfg.task.len(), group.len());
    if m == 0 || n == 0 {
        return Err(Error::precondition("memory and task must be nonempty"));
    }
    if cfg.incoming_batch == 0 || cfg.incoming_batch > n || cfg.memory_batch == 0 || cfg.memory_batch > m {
        return Err(Error::precondition("batch sizes must fit the datasets"));
    }
    if trials == 0 {
        return Err(Error::precondition("at least one trial is required"));
    }
    if group.dim() != cfg.model.spec().input_size() {
        return Err(Error::contract("group dimension does not match the model input"));
    }
    let (b, bm) = (cfg.incoming_batch, cfg.memory_batch);

    // Exact per-element losses of the probe sample (first memory item).
    let probe = group_orbit_losses(&cfg.model, &cfg.memory[0], group, cfg.kind)?;

    // Cell (i, g) at i * gsize + g; memory items first.
    let acc = run_chunks(trials, seed, (m + n) * gsize, |rng, acc| {
        let g = rng.random_range(0..gsize);
        let (mut x, mut y) = (0.0, 0.0);
        for i in index::sample(rng, m, bm) {
            acc.weights[i * gsize + g] += 1.0 / bm as f64;
            x += 1.0 / bm as f64;
        }
        for j in index::sample(rng, n, b) {
            acc.weights[(m + j) * gsize + g] += 1.0 / b as f64;
            y += 1.0 / b as f64;
        }
        acc.push_ratio(x / m as f64, y / n as f64);
        let l = probe.losses[g];
        acc.loss_sum += l;
        acc.loss_sq += l * l;
    });

    let dim = cfg.model.params().len();
    let mut grads = Vec::with_capacity((m + n) * gsize);
    for s in cfg.memory.iter().chain(&cfg.task) {
        let images: Vec<Sample> = group.elements().iter().map(|e| e.apply_sample(s)).collect();
        grads.extend(per_sample_grads(&cfg.model, &images, cfg.kind)?);
    }
    let empirical = weighted_sum(&grads, &acc.weights, 1.0 / acc.n, dim);

    let (_, gm) = cfg
        .model
        .loss_and_grad(&to_batch(&group.orbit(&cfg.memory))?, cfg.kind)?;
    let (_, gt) = cfg.model.loss_and_grad(&to_batch(&group.orbit(&cfg.task))?, cfg.kind)?;
    let analytic: Vec<f64> = gt.iter().zip(&gm).map(|(t, mm)| t + mm).collect();

    let (cosine, rel_norm) = compare(&empirical, &analytic);
    let (ratio, half) = acc.ratio();
    let predicted = n as f64 / m as f64;
    let rel_err = (ratio - predicted).abs() / predicted;

    let mc = acc.loss_sum / acc.n;
    let sigma = ((acc.loss_sq / acc.n - mc * mc).max(0.0) / acc.n).sqrt();
    let within = (mc - probe.mean).abs() <= 3.0 * sigma + 1e-12;
    let loss_check = LossCheck {
        monte_carlo_mean: mc,
        exact_mean: probe.mean,
        sigma,
        within_3_sigma: within,
    };
    Ok(ErmVerdict {
        check: "prop3".to_string(),
        trials,
        predicted_weight: predicted,
        empirical_weight: ratio,
        weight_ci_half_width: half,
        weight_rel_error: rel_err,
        cosine,
        relative_norm_error: rel_norm,
        weight_tolerance: tol.weight,
        cosine_threshold: tol.cosine,
        loss_check: Some(loss_check),
        status: status(rel_err, half / predicted, cosine, within, tol),
        notes: vec![format!(
            "group of {gsize} elements, one element per trial applied to both batches"
        )],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_of_task_weight_is_lambda() {
        let cfg = Prop1Config::tiny(6, 3, 6, 0, 1);
        let v = verify_prop1(&cfg, 200_000, 7, Tolerances::default()).unwrap();
        assert_eq!(v.predicted_weight, 2.0);
        assert!(v.weight_rel_error < 0.02, "{v:?}");
        assert!(v.cosine > 0.99, "{v:?}");
        assert_eq!(v.check, "prop2");
    }

    #[test]
    fn balanced_end_of_task_weight_is_a_third_of_lambda() {
        let cfg = Prop1Config::tiny(6, 3, 6, 3, 2);
        let v = verify_prop1(
            &cfg,
            200_000,
            8,
            Tolerances {
                weight: 0.03,
                cosine: 0.99,
            },
        )
        .unwrap();
        assert!((v.predicted_weight / 2.0 - 1.0 / 3.0).abs() < 1e-15);
        assert!(v.passed(), "{v:?}");
    }

    #[test]
    fn full_capacity_memory_is_exact_lambda() {
        // capacity covers all past data and nothing is absorbed: the draw is
        // uniform over D_M, so the weight is lambda
        let cfg = Prop1Config::tiny(8, 4, 4, 0, 3);
        let v = verify_prop1(&cfg, 100_000, 9, Tolerances::default()).unwrap();
        assert_eq!(v.predicted_weight, 2.0);
        assert!(v.passed(), "{v:?}");
    }

    #[test]
    fn few_trials_are_inconclusive_not_failing() {
        let cfg = Prop1Config::tiny(6, 3, 6, 3, 2);
        let tol = Tolerances {
            weight: 1e-4,
            cosine: 0.999,
        };
        let v = verify_prop1(&cfg, 50, 1, tol).unwrap();
        assert_eq!(v.status, VerdictStatus::Inconclusive);
    }

    #[test]
    fn same_seed_same_verdict() {
        let cfg = Prop1Config::tiny(6, 3, 6, 1, 4);
        let a = verify_prop1(&cfg, 10_000, 3, Tolerances::default()).unwrap();
        let b = verify_prop1(&cfg, 10_000, 3, Tolerances::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_many_absorbed_batches_rejected() {
        let cfg = Prop1Config::tiny(6, 3, 6, 4, 2);
        assert!(verify_prop1(&cfg, 10, 1, Tolerances::default()).is_err());
    }

    #[test]
    fn trivial_group_matches_plain_rehearsal() {
        let cfg = Prop3Config::tiny_images(3, 6, 3, 5);
        let v = verify_prop3(&cfg, &FiniteGroup::trivial(9), 100_000, 2, Tolerances::default()).unwrap();
        assert!(v.weight_rel_error < 0.02);
        assert!(v.passed(), "{v:?}");
    }

    #[test]
    fn flip_group_gradient_is_unbiased() {
        let cfg = Prop3Config::tiny_images(4, 6, 3, 6);
        let v = verify_prop3(
            &cfg,
            &FiniteGroup::horizontal_flips(4, 4),
            100_000,
            3,
            Tolerances::default(),
        )
        .unwrap();
        assert!(v.passed(), "{v:?}");
        assert!(v.loss_check.unwrap().within_3_sigma);
    }
}
