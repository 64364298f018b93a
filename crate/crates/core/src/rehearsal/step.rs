use std::io::Write;

use rand::Rng;

use super::config::RehearsalConfig;
use crate::augment::{rand_augment_batch, AugTarget};
use crate::error::{Error, Result};
use crate::memory::{ReservoirMemory, RetrievalPolicy};
use crate::nn::{sgd_step, LossKind, Model};
use crate::stream::{to_batch, to_distillation_batch, Sample};

/// (K, P, Q) used for one incoming batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Choice {
    pub k: usize,
    pub p: usize,
    pub q: f64,
}

impl Choice {
    pub fn from_config(cfg: &RehearsalConfig) -> Self {
        Choice {
            k: cfg.k,
            p: cfg.aug.p(),
            q: cfg.aug.q(),
        }
    }
}

/// One inner iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// Incoming batch index.
    pub t: u64,
    /// Inner iteration, starting at 1.
    pub k: usize,
    pub memory_loss: Option<f64>,
    pub incoming_loss: f64,
    pub memory_batch_accuracy: Option<f64>,
    pub k_chosen: usize,
    pub p_chosen: usize,
    pub q_chosen: f64,
    pub incoming_ids: Vec<usize>,
    pub memory_ids: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub model: Model,
    /// `None` when training without memory.
    pub memory: Option<ReservoirMemory>,
    /// Incoming batches processed.
    pub t: u64,
    /// Inner iterations performed on the current batch.
    pub k: usize,
    pub choice: Choice,
    pub trace: Vec<TraceRecord>,
}

impl TrainState {
    pub fn new(model: Model, cfg: &RehearsalConfig, memory_seed: u64) -> Result<Self> {
        let memory = if cfg.memory_capacity == 0 {
            None
        } else {
            Some(ReservoirMemory::new(cfg.memory_capacity, memory_seed)?)
        };
        Ok(TrainState {
            model,
            memory,
            t: 0,
            k: 0,
            choice: Choice::from_config(cfg),
            trace: Vec::new(),
        })
    }

    pub fn memory_len(&self) -> usize {
        self.memory.as_ref().map_or(0, |m| m.len())
    }
}

/// `alpha * mean_c (z - z_stored)^2` over `mem_batch` and its gradient.
pub fn der_memory_loss(model: &Model, mem_batch: &[Sample], alpha: f64) -> Result<(f64, Vec<f64>)> {
    model.loss_and_grad(&to_distillation_batch(mem_batch)?, LossKind::distillation(alpha)?)
}

fn memory_term(model: &Model, mem: &[Sample], kind: LossKind) -> Result<(f64, Vec<f64>, f64)> {
    let (loss, grad) = match kind {
        LossKind::DistillationMse { alpha } => der_memory_loss(model, mem, alpha)?,
        k => model.loss_and_grad(&to_batch(mem)?, k)?,
    };
    let b = to_batch(mem)?;
    let acc = model.accuracy(b.inputs(), b.labels())?;
    Ok((loss, grad, acc))
}

/// One rehearsal update `theta -= lr * (g_in + g_mem)`, or the reweighted
/// form when `alpha_rw` is set. An empty `mem_batch` drops the memory term.
pub fn er_iteration(
    state: &mut TrainState,
    incoming: &[Sample],
    mem_batch: &[Sample],
    cfg: &RehearsalConfig,
) -> Result<()> {
    if incoming.is_empty() {
        return Err(Error::precondition("incoming batch is empty"));
    }
    let (incoming_loss, g_in) = state.model.loss_and_grad(&to_batch(incoming)?, cfg.incoming_loss())?;
    let mem = if mem_batch.is_empty() {
        None
    } else {
        Some(memory_term(&state.model, mem_batch, cfg.memory_loss())?)
    };
    let grad: Vec<f64> = match (&mem, cfg.alpha_rw) {
        (None, None) => g_in,
        (Some((_, g_m, _)), None) => g_in.iter().zip(g_m).map(|(a, b)| a + b).collect(),
        (None, Some(a)) => g_in.iter().map(|g| 2.0 * ((1.0 - a) * g)).collect(),
        (Some((_, g_m, _)), Some(a)) => g_in
            .iter()
            .zip(g_m)
            .map(|(gi, gm)| 2.0 * ((1.0 - a) * gi + a * gm))
            .collect(),
    };
    let params = sgd_step(state.model.params(), &grad, cfg.lr)?;
    state.model.set_params(params)?;
    state.k += 1;
    state.trace.push(TraceRecord {
        t: state.t,
        k: state.k,
        memory_loss: mem.as_ref().map(|m| m.0),
        incoming_loss,
        memory_batch_accuracy: mem.as_ref().map(|m| m.2),
        k_chosen: state.choice.k,
        p_chosen: state.choice.p,
        q_chosen: state.choice.q,
        incoming_ids: incoming.iter().map(|s| s.id).collect(),
        memory_ids: mem_batch.iter().map(|s| s.id).collect(),
    });
    Ok(())
}

/// Outcome of one incoming batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchSummary {
    pub t: u64,
    pub choice: Choice,
    /// Mean memory-batch accuracy over the inner iterations that had memory.
    pub mean_memory_accuracy: Option<f64>,
}

fn retrieve<R: Rng + ?Sized>(
    state: &TrainState,
    incoming: &[Sample],
    cfg: &RehearsalConfig,
    rng: &mut R,
) -> Result<Vec<Sample>> {
    let Some(memory) = state.memory.as_ref().filter(|m| !m.is_empty()) else {
        return Ok(Vec::new());
    };
    match cfg.retrieval {
        RetrievalPolicy::UniformRandom => Ok(memory.retrieve_random(cfg.memory_batch_size, rng)),
        RetrievalPolicy::Mir { candidates } => memory.retrieve_mir(
            &state.model,
            incoming,
            cfg.lr,
            candidates,
            cfg.memory_batch_size,
            cfg.memory_loss(),
            rng,
        ),
    }
}

/// K inner iterations on a fixed incoming batch, each with a fresh memory
/// batch and fresh augmentation, then a reservoir update with the raw
/// incoming samples when `update_memory` is set.
pub fn rar_step<R: Rng + ?Sized>(
    state: &mut TrainState,
    incoming: &[Sample],
    cfg: &RehearsalConfig,
    tuner_choice: Option<Choice>,
    update_memory: bool,
    rng: &mut R,
) -> Result<BatchSummary> {
    let choice = tuner_choice.unwrap_or_else(|| Choice::from_config(cfg));
    if choice.k == 0 {
        return Err(Error::contract("K must be at least 1"));
    }
    // a tuner choice only changes (P, Q) when augmentation is enabled
    let policy = if tuner_choice.is_some() && cfg.aug.target() != AugTarget::None {
        cfg.aug.with_pq(choice.p, choice.q)?
    } else {
        cfg.aug.clone()
    };
    state.k = 0;
    state.choice = choice;
    let (mut acc_sum, mut acc_n) = (0.0, 0usize);
    for _ in 0..choice.k {
        let mem = retrieve(state, incoming, cfg, rng)?;
        let (inc, mem) = match policy.target() {
            AugTarget::None => (incoming.to_vec(), mem),
            AugTarget::MemoryOnly => (incoming.to_vec(), rand_augment_batch(&mem, &policy, rng)?),
            AugTarget::IncomingOnly => (rand_augment_batch(incoming, &policy, rng)?, mem),
            AugTarget::Both => {
                let joint: Vec<Sample> = mem.iter().chain(incoming).cloned().collect();
                let mut aug = rand_augment_batch(&joint, &policy, rng)?;
                let inc = aug.split_off(mem.len());
                (inc, aug)
            }
        };
        er_iteration(state, &inc, &mem, cfg)?;
        if let Some(a) = state.trace.last().and_then(|r| r.memory_batch_accuracy) {
            acc_sum += a;
            acc_n += 1;
        }
    }
    if update_memory {
        let raw = if cfg.uses_distillation() {
            with_logits(&state.model, incoming)?
        } else {
            incoming.to_vec()
        };
        if let Some(memory) = state.memory.as_mut() {
            memory.update(&raw);
        }
    }
    let summary = BatchSummary {
        t: state.t,
        choice,
        mean_memory_accuracy: (acc_n > 0).then(|| acc_sum / acc_n as f64),
    };
    state.t += 1;
    Ok(summary)
}

/// Copies of `samples` carrying the model's current logits.
fn with_logits(model: &Model, samples: &[Sample]) -> Result<Vec<Sample>> {
    let z = model.forward(to_batch(samples)?.inputs())?;
    Ok(samples
        .iter()
        .enumerate()
        .map(|(i, s)| Sample {
            stored_logits: Some(z.row(i).to_vec()),
            ..s.clone()
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns `t,k,memory_loss,incoming_loss,memory_batch_accuracy,k_chosen,p_chosen,q_chosen`;
/// absent memory values are empty fields.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "t,k,memory_loss,incoming_loss,memory_batch_accuracy,k_chosen,p_chosen,q_chosen"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.t,
            r.k,
            opt(r.memory_loss),
            r.incoming_loss,
            opt(r.memory_batch_accuracy),
            r.k_chosen,
            r.p_chosen,
            r.q_chosen
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{AugPolicy, TransformOp};
    use crate::nn::{Activation, MlpSpec};
    use crate::stream::FeatureShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(theta: f64) -> Model {
        Model::new(MlpSpec::new(vec![1, 1], Activation::Relu).unwrap(), vec![theta, 0.0]).unwrap()
    }

    fn pt(id: usize, x: f64) -> Sample {
        Sample::new(id, vec![x], FeatureShape::Vector(1), 0, 0)
    }

    fn sq_cfg() -> RehearsalConfig {
        RehearsalConfig {
            k: 1,
            lr: 0.1,
            loss: LossKind::SquaredError,
            memory_capacity: 0,
            ..RehearsalConfig::default()
        }
    }

    #[test]
    fn hand_computed_update() {
        // Output 0 computes theta x; label 1 makes its squared-error target 0.
        // g_theta = 2 (1)(1) + 2 (2)(2) = 10, so theta' = 1 - 0.1 * 10 = 0.
        let spec = MlpSpec::new(vec![1, 2], Activation::Relu).unwrap();
        let model = Model::new(spec, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let cfg = sq_cfg();
        let mut st = TrainState::new(model, &cfg, 0).unwrap();
        let inc = Sample::new(0, vec![1.0], FeatureShape::Vector(1), 1, 0);
        let mem = Sample::new(1, vec![2.0], FeatureShape::Vector(1), 1, 0);
        er_iteration(&mut st, &[inc], &[mem], &cfg).unwrap();
        assert!(st.model.params()[0].abs() < 1e-15);
        let r = &st.trace[0];
        assert_eq!(r.incoming_loss, 2.0);
        assert_eq!(r.memory_loss, Some(5.0));
    }

    #[test]
    fn empty_memory_is_plain_sgd() {
        let cfg = sq_cfg();
        let mut st = TrainState::new(scalar(0.5), &cfg, 0).unwrap();
        let inc = vec![pt(0, 2.0)];
        let (_, g) = st
            .model
            .loss_and_grad(&to_batch(&inc).unwrap(), LossKind::SquaredError)
            .unwrap();
        let expect = sgd_step(st.model.params(), &g, 0.1).unwrap();
        er_iteration(&mut st, &inc, &[], &cfg).unwrap();
        assert_eq!(st.model.params(), expect.as_slice());
        assert_eq!(st.trace[0].memory_loss, None);
    }

    #[test]
    fn half_reweighting_is_bitwise_unweighted() {
        let model = Model::init(
            MlpSpec::new(vec![3, 4, 2], Activation::Tanh).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        let inc: Vec<Sample> = (0..3)
            .map(|i| Sample::new(i, vec![i as f64, 1.0, -0.5], FeatureShape::Vector(3), i % 2, 0))
            .collect();
        let mem: Vec<Sample> = (3..6)
            .map(|i| {
                Sample::new(
                    i,
                    vec![0.3, i as f64 * 0.1, 2.0],
                    FeatureShape::Vector(3),
                    (i + 1) % 2,
                    0,
                )
            })
            .collect();
        let plain = RehearsalConfig {
            memory_capacity: 0,
            ..RehearsalConfig::default()
        };
        let rw = RehearsalConfig {
            alpha_rw: Some(0.5),
            ..plain.clone()
        };
        let mut a = TrainState::new(model.clone(), &plain, 0).unwrap();
        let mut b = TrainState::new(model, &rw, 0).unwrap();
        er_iteration(&mut a, &inc, &mem, &plain).unwrap();
        er_iteration(&mut b, &inc, &mem, &rw).unwrap();
        assert_eq!(a.model.params(), b.model.params());
    }

    #[test]
    fn empty_incoming_rejected() {
        let cfg = sq_cfg();
        let mut st = TrainState::new(scalar(1.0), &cfg, 0).unwrap();
        assert!(er_iteration(&mut st, &[], &[pt(0, 1.0)], &cfg).is_err());
    }

    #[test]
    fn der_matching_logits_contribute_nothing() {
        let model = Model::init(
            MlpSpec::new(vec![2, 3], Activation::Relu).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(4),
        );
        let mem = with_logits(
            &model,
            &[Sample::new(0, vec![0.4, -1.0], FeatureShape::Vector(2), 1, 0)],
        )
        .unwrap();
        let (l, g) = der_memory_loss(&model, &mem, 0.3).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
        let bare = vec![Sample::new(0, vec![0.4, -1.0], FeatureShape::Vector(2), 1, 0)];
        assert!(der_memory_loss(&model, &bare, 0.3).is_err());
    }

    #[test]
    fn der_alpha_zero_is_finetune() {
        let spec = MlpSpec::new(vec![2, 3], Activation::Relu).unwrap();
        let model = Model::init(spec, &mut ChaCha8Rng::seed_from_u64(4));
        let mut other = model.clone();
        other.params_mut()[0] += 1.0;
        let mem = with_logits(&other, &[Sample::new(9, vec![1.0, 2.0], FeatureShape::Vector(2), 0, 0)]).unwrap();
        let inc = vec![Sample::new(0, vec![0.4, -1.0], FeatureShape::Vector(2), 1, 0)];
        let der = RehearsalConfig {
            loss: LossKind::DistillationMse { alpha: 0.0 },
            memory_capacity: 0,
            ..RehearsalConfig::default()
        };
        let ft = RehearsalConfig {
            memory_capacity: 0,
            ..RehearsalConfig::default()
        };
        let mut a = TrainState::new(model.clone(), &der, 0).unwrap();
        let mut b = TrainState::new(model, &ft, 0).unwrap();
        er_iteration(&mut a, &inc, &mem, &der).unwrap();
        er_iteration(&mut b, &inc, &[], &ft).unwrap();
        assert_eq!(a.model.params(), b.model.params());
    }

    fn stream_samples(n: usize, first: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let x = vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()];
                Sample::new(first + i, x, FeatureShape::Vector(2), i % 2, 0)
            })
            .collect()
    }

    fn small_model() -> Model {
        Model::init(
            MlpSpec::new(vec![2, 5, 2], Activation::Tanh).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(2),
        )
    }

    #[test]
    fn k_one_without_augmentation_is_one_er_iteration() {
        let cfg = RehearsalConfig {
            k: 1,
            memory_capacity: 20,
            ..RehearsalConfig::default()
        };
        let mut st = TrainState::new(small_model(), &cfg, 5).unwrap();
        st.memory.as_mut().unwrap().update(&stream_samples(20, 100));
        let inc = stream_samples(4, 0);
        let mut replay = st.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rng2 = rng.clone();
        rar_step(&mut st, &inc, &cfg, None, true, &mut rng).unwrap();
        let mem = replay
            .memory
            .as_ref()
            .unwrap()
            .retrieve_random(cfg.memory_batch_size, &mut rng2);
        er_iteration(&mut replay, &inc, &mem, &cfg).unwrap();
        assert_eq!(st.model.params(), replay.model.params());
    }

    #[test]
    fn k_three_identity_ops_replays_explicit_iterations() {
        let aug = AugPolicy::new(vec![TransformOp::Identity], 1, 14.0, AugTarget::Both).unwrap();
        let cfg = RehearsalConfig {
            k: 3,
            memory_capacity: 30,
            aug: aug.clone(),
            ..RehearsalConfig::default()
        };
        let mut st = TrainState::new(small_model(), &cfg, 5).unwrap();
        st.memory.as_mut().unwrap().update(&stream_samples(30, 100));
        let inc = stream_samples(5, 0);
        let mut replay = st.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rng2 = rng.clone();
        rar_step(&mut st, &inc, &cfg, None, true, &mut rng).unwrap();
        for _ in 0..3 {
            let mem = replay
                .memory
                .as_ref()
                .unwrap()
                .retrieve_random(cfg.memory_batch_size, &mut rng2);
            let joint: Vec<Sample> = mem.iter().chain(&inc).cloned().collect();
            let mut a = rand_augment_batch(&joint, &aug, &mut rng2).unwrap();
            let i = a.split_off(mem.len());
            er_iteration(&mut replay, &i, &a, &cfg).unwrap();
        }
        assert_eq!(st.model.params(), replay.model.params());
        assert_eq!(st.trace.len(), 3);
    }

    #[test]
    fn same_incoming_fresh_memory_within_a_batch() {
        let cfg = RehearsalConfig {
            k: 10,
            memory_capacity: 50,
            ..RehearsalConfig::default()
        };
        let mut st = TrainState::new(small_model(), &cfg, 5).unwrap();
        st.memory.as_mut().unwrap().update(&stream_samples(50, 100));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        rar_step(&mut st, &stream_samples(10, 0), &cfg, None, true, &mut rng).unwrap();
        let first = &st.trace[0];
        assert!(st
            .trace
            .iter()
            .all(|r| r.incoming_ids == first.incoming_ids && r.t == 0));
        let distinct: std::collections::BTreeSet<_> = st.trace.iter().map(|r| r.memory_ids.clone()).collect();
        assert!(distinct.len() > 1);
        assert_eq!(
            st.trace.iter().map(|r| r.k).collect::<Vec<_>>(),
            (1..=10).collect::<Vec<_>>()
        );
    }

    #[test]
    fn memory_receives_raw_samples_only() {
        let aug = AugPolicy::new(TransformOp::vector_ops(), 2, 30.0, AugTarget::Both).unwrap();
        let cfg = RehearsalConfig {
            k: 3,
            memory_capacity: 1000,
            aug,
            ..RehearsalConfig::default()
        };
        let mut st = TrainState::new(small_model(), &cfg, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = stream_samples(60, 0);
        for chunk in data.chunks(10) {
            rar_step(&mut st, chunk, &cfg, None, true, &mut rng).unwrap();
        }
        for s in st.memory.as_ref().unwrap().items() {
            assert_eq!(s, &data[s.id]);
        }
    }

    #[test]
    fn tuner_choice_overrides_k_and_trace_records_it() {
        let aug = AugPolicy::new(TransformOp::vector_ops(), 1, 14.0, AugTarget::Both).unwrap();
        let cfg = RehearsalConfig {
            k: 10,
            memory_capacity: 20,
            aug,
            ..RehearsalConfig::default()
        };
        let mut st = TrainState::new(small_model(), &cfg, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let choice = Choice { k: 4, p: 2, q: 5.0 };
        let s = rar_step(&mut st, &stream_samples(10, 0), &cfg, Some(choice), true, &mut rng).unwrap();
        assert_eq!(st.trace.len(), 4);
        assert!(st
            .trace
            .iter()
            .all(|r| r.k_chosen == 4 && r.p_chosen == 2 && r.q_chosen == 5.0));
        // memory was empty throughout the first batch
        assert_eq!(s.mean_memory_accuracy, None);
        assert_eq!(st.memory_len(), 10);
    }

    #[test]
    fn trace_csv_columns() {
        let cfg = sq_cfg();
        let mut st = TrainState::new(scalar(1.0), &cfg, 0).unwrap();
        er_iteration(&mut st, &[pt(0, 1.0)], &[], &cfg).unwrap();
        let mut out = Vec::new();
        write_trace_csv(&st.trace, &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(
            lines[0],
            "t,k,memory_loss,incoming_loss,memory_batch_accuracy,k_chosen,p_chosen,q_chosen"
        );
        assert_eq!(lines[1], "0,1,,0,,1,1,0");
    }
}
