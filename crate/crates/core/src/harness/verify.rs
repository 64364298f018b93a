use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{
    compute_metrics, verify_prop1, verify_prop3, AccuracyMatrix, ErmVerdict, Prop1Config, Prop3Config, Tolerances,
    VerdictStatus,
};
use crate::augment::FiniteGroup;
use crate::error::{Error, Result};
use crate::memory::ReservoirMemory;
use crate::nn::{check_gradient, Activation, Batch, LossKind, MlpSpec, Model, Tensor};
use crate::stream::{FeatureShape, Sample};

pub const VERIFY_KINDS: [&str; 6] = ["prop1", "prop2", "prop3", "reservoir", "gradients", "metrics"];

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    /// Suite default when `None`.
    pub trials: Option<u64>,
    pub seed: u64,
    pub tolerance: Option<f64>,
    /// Task size for prop1/2/3.
    pub dt: usize,
    /// Memory size for prop1/2/3.
    pub dm: usize,
    /// Past samples seen; defaults to `dt` (balanced tasks).
    pub n_past: Option<u64>,
    /// Incoming batches absorbed; prop1 defaults to the whole task.
    pub absorbed: Option<usize>,
    pub group: String,
    pub side: usize,
    pub m: usize,
    pub n: usize,
    pub models: usize,
    pub matrices: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            trials: None,
            seed: 0,
            tolerance: None,
            dt: 6,
            dm: 3,
            n_past: None,
            absorbed: None,
            group: "flip".into(),
            side: 4,
            m: 2,
            n: 4,
            models: 50,
            matrices: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub kind: String,
    pub status: VerdictStatus,
    pub details: serde_json::Value,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

fn pass_fail(ok: bool) -> VerdictStatus {
    if ok {
        VerdictStatus::Pass
    } else {
        VerdictStatus::Fail
    }
}

/// Per-item inclusion frequency of a size-`m` reservoir after `n` items,
/// over `trials` independently seeded runs.
pub fn reservoir_inclusion(m: usize, n: usize, trials: u64, seed: u64) -> Result<Vec<f64>> {
    if n == 0 || trials == 0 {
        return Err(Error::precondition("reservoir check needs items and trials"));
    }
    let items: Vec<Sample> = (0..n)
        .map(|i| Sample::new(i, vec![0.0], FeatureShape::Vector(1), 0, 0))
        .collect();
    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; n],
            |mut c, trial| {
                let mut mem = ReservoirMemory::new(m, seed.wrapping_mul(0x9e37_79b9).wrapping_add(trial))
                    .expect("capacity checked");
                mem.update(&items);
                for s in mem.items() {
                    c[s.id] += 1;
                }
                c
            },
        )
        .reduce(|| vec![0u64; n], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    Ok(counts.iter().map(|&c| c as f64 / trials as f64).collect())
}

fn verify_reservoir(o: &VerifyOptions) -> Result<VerifyReport> {
    if o.m == 0 || o.m > o.n {
        return Err(Error::Usage(format!("need 0 < m <= n, got m = {}, n = {}", o.m, o.n)));
    }
    let trials = o.trials.unwrap_or(200_000);
    let freq = reservoir_inclusion(o.m, o.n, trials, o.seed)?;
    let p = o.m as f64 / o.n as f64;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let max_z = freq
        .iter()
        .map(|f| (f - p).abs() / sigma.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let ok = max_z <= 3.0;
    Ok(VerifyReport {
        kind: "reservoir".into(),
        status: pass_fail(ok),
        details: json!({
            "m": o.m, "n": o.n, "trials": trials,
            "expected": p, "sigma": sigma, "max_abs_z": max_z, "frequencies": freq,
        }),
    })
}

fn erm_report(kind: &str, v: ErmVerdict) -> Result<VerifyReport> {
    Ok(VerifyReport {
        kind: kind.into(),
        status: v.status,
        details: serde_json::to_value(&v)?,
    })
}

fn tolerances(o: &VerifyOptions) -> Tolerances {
    Tolerances {
        weight: o.tolerance.unwrap_or(Tolerances::default().weight),
        ..Tolerances::default()
    }
}

fn verify_prop(o: &VerifyOptions, start_of_task: bool) -> Result<VerifyReport> {
    if o.dt == 0 || o.dm == 0 {
        return Err(Error::Usage("--dt and --dm must be positive".into()));
    }
    let n_past = o.n_past.unwrap_or(o.dt as u64);
    let probe = Prop1Config::tiny(o.dt, o.dm, n_past, 0, o.seed);
    let absorbed = if start_of_task {
        0
    } else {
        o.absorbed.unwrap_or(o.dt / probe.incoming_batch)
    };
    let cfg = Prop1Config {
        batches_absorbed: absorbed,
        ..probe
    };
    let v = verify_prop1(
        &cfg,
        o.trials.unwrap_or(1_000_000),
        o.seed.wrapping_add(1),
        tolerances(o),
    )?;
    erm_report(if start_of_task { "prop2" } else { "prop1" }, v)
}

pub fn named_group(name: &str, side: usize) -> Result<FiniteGroup> {
    match name {
        "flip" => Ok(FiniteGroup::horizontal_flips(side, side)),
        "rot4" => Ok(FiniteGroup::rotations(side)),
        "trivial" => Ok(FiniteGroup::trivial(side * side)),
        other => Err(Error::Usage(format!("unknown group `{other}` (flip, rot4, trivial)"))),
    }
}

fn verify_prop3_kind(o: &VerifyOptions) -> Result<VerifyReport> {
    if o.dt == 0 || o.dm == 0 || o.side == 0 {
        return Err(Error::Usage("--dt, --dm and --side must be positive".into()));
    }
    let group = named_group(&o.group, o.side)?;
    let cfg = Prop3Config::tiny_images(o.side, o.dt, o.dm, o.seed);
    let v = verify_prop3(
        &cfg,
        &group,
        o.trials.unwrap_or(100_000),
        o.seed.wrapping_add(1),
        tolerances(o),
    )?;
    erm_report("prop3", v)
}

/// Small random network, batch and targets for a gradient check.
fn random_case(rng: &mut ChaCha8Rng) -> Result<(Model, Batch, Tensor)> {
    let input = rng.random_range(1..=4);
    let output = rng.random_range(1..=4);
    let mut sizes = vec![input];
    for _ in 0..rng.random_range(0..=2) {
        sizes.push(rng.random_range(1..=5));
    }
    sizes.push(output);
    let act = *[Activation::Relu, Activation::Tanh].choose(rng).expect("nonempty");
    let spec = MlpSpec::new(sizes, act)?;
    // Random biases keep ReLU kinks away from the evaluation point.
    let params = (0..spec.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = Model::new(spec, params)?;
    let n = rng.random_range(1..=4);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..input).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..output)).collect();
    let targets: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..output).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Ok((
        model,
        Batch::new(Tensor::from_rows(&rows)?, labels)?,
        Tensor::from_rows(&targets)?,
    ))
}

pub const GRADIENT_TOLERANCE: f64 = 1e-4;

fn verify_gradients(o: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let tol = o.tolerance.unwrap_or(GRADIENT_TOLERANCE);
    let mut worst: f64 = 0.0;
    let mut checks = 0usize;
    let mut failures = Vec::new();
    for model_index in 0..o.models {
        let (model, batch, targets) = random_case(&mut rng)?;
        let alpha = rng.random_range(0.05..1.0);
        let cases = [
            ("cross_entropy", batch.clone(), LossKind::CrossEntropy),
            ("squared_error_one_hot", batch.clone(), LossKind::SquaredError),
            (
                "squared_error_dense",
                batch.clone().with_targets(targets.clone())?,
                LossKind::SquaredError,
            ),
            (
                "distillation",
                batch.clone().with_targets(targets.clone())?,
                LossKind::distillation(alpha)?,
            ),
        ];
        for (name, b, kind) in cases {
            let c = check_gradient(&model, &b, kind, 1e-5)?;
            checks += 1;
            worst = worst.max(c.max_rel_error);
            if c.max_rel_error >= tol {
                failures.push(json!({"model": model_index, "loss": name, "max_rel_error": c.max_rel_error}));
            }
        }
    }
    Ok(VerifyReport {
        kind: "gradients".into(),
        status: pass_fail(failures.is_empty()),
        details: json!({"models": o.models, "checks": checks, "tolerance": tol, "max_rel_error": worst, "failures": failures}),
    })
}

/// Accuracy rows with their expected `(A, F, B, plasticity)`.
pub type MetricFixture = (Vec<Vec<f64>>, [Option<f64>; 4]);

/// Hand-worked matrices.
pub fn metric_fixtures() -> Vec<MetricFixture> {
    vec![
        (vec![vec![0.9]], [Some(0.9), None, None, Some(0.9)]),
        (
            vec![vec![0.9], vec![0.6, 0.8]],
            [Some(0.7), Some(0.3), Some(-0.3), Some(0.85)],
        ),
        (
            vec![vec![1.0], vec![0.5, 1.0], vec![0.25, 0.75, 1.0]],
            [Some(2.0 / 3.0), Some(0.5), Some(-0.5), Some(1.0)],
        ),
    ]
}

/// Lower-triangular matrix with `t` rows and entries in [0, 1].
pub fn random_accuracy_matrix<R: Rng + ?Sized>(t: usize, rng: &mut R) -> AccuracyMatrix {
    let rows = (0..t).map(|i| (0..=i).map(|_| rng.random::<f64>()).collect()).collect();
    AccuracyMatrix::new(rows).expect("well-formed by construction")
}

fn verify_metrics(o: &VerifyOptions) -> Result<VerifyReport> {
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
        _ => false,
    };
    let mut fixture_failures = Vec::new();
    for (i, (rows, want)) in metric_fixtures().into_iter().enumerate() {
        let r = compute_metrics(&AccuracyMatrix::new(rows)?);
        let got = [
            Some(r.average_accuracy),
            r.forgetting,
            r.backward_transfer,
            Some(r.plasticity),
        ];
        if !got.iter().zip(&want).all(|(g, w)| close(*g, *w)) {
            fixture_failures.push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut max_identity: f64 = 0.0;
    let mut inequality_violations = 0usize;
    for _ in 0..o.matrices {
        let t = rng.random_range(2..=10);
        let m = random_accuracy_matrix(t, &mut rng);
        let r = compute_metrics(&m);
        let tf = t as f64;
        let b = r.backward_transfer.unwrap_or(0.0);
        let f = r.forgetting.unwrap_or(0.0);
        let identity = r.plasticity + (tf - 1.0) / tf * b;
        max_identity = max_identity.max((r.average_accuracy - identity).abs());
        if r.average_accuracy < r.plasticity - (tf - 1.0) / tf * f - 1e-12 {
            inequality_violations += 1;
        }
    }
    let ok = fixture_failures.is_empty() && max_identity <= 1e-12 && inequality_violations == 0;
    Ok(VerifyReport {
        kind: "metrics".into(),
        status: pass_fail(ok),
        details: json!({
            "fixtures": metric_fixtures().len(), "fixture_failures": fixture_failures,
            "random_matrices": o.matrices, "max_identity_error": max_identity,
            "inequality_violations": inequality_violations,
        }),
    })
}

pub fn cli_verify(kind: &str, o: &VerifyOptions) -> Result<VerifyReport> {
    match kind {
        "prop1" => verify_prop(o, false),
        "prop2" => verify_prop(o, true),
        "prop3" => verify_prop3_kind(o),
        "reservoir" => verify_reservoir(o),
        "gradients" => verify_gradients(o),
        "metrics" => verify_metrics(o),
        other => Err(Error::Usage(format!(
            "unknown verification `{other}`; expected one of {}",
            VERIFY_KINDS.join(", ")
        ))),
    }
}
