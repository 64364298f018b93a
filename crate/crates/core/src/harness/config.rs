use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::augment::{AugPolicy, AugTarget, TransformOp};
use crate::error::{Error, Result};
use crate::memory::{RetrievalPolicy, DEFAULT_MIR_CANDIDATES};
use crate::nn::{Activation, LossKind, MlpSpec, DEFAULT_DISTILLATION_ALPHA};
use crate::rehearsal::RehearsalConfig;
use crate::stream::{load_idx_stream_with_test, make_synthetic_stream, SyntheticSpec, TaskStream};
use crate::tuner::{ActionSpace, AugArm, DEFAULT_LR_RL, DEFAULT_TARGET_ACC};

/// Environment variable that replaces `stream.seed`.
pub const SEED_ENV: &str = "OCL_SEED";

#[derive(Clone, Debug, PartialEq)]
pub enum StreamSource {
    Synthetic(SyntheticSpec),
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        num_tasks: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamSection {
    pub source: StreamSource,
    pub batch_size: usize,
    /// Root seed of the run.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TunerSection {
    pub enabled: bool,
    pub space: ActionSpace,
    pub target_acc: f64,
    pub lr_rl: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub checkpoints: bool,
    pub memory_dump: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub stream: StreamSection,
    pub model: ModelSection,
    pub rehearsal: RehearsalConfig,
    pub tuner: TunerSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    /// Five synthetic two-class tasks, a 64-unit MLP and RAR with
    /// K = 10, P = 1, Q = 14.
    fn default() -> Self {
        let synth = SyntheticSpec::default();
        let shape = crate::stream::FeatureShape::Vector(synth.input_dim);
        RunConfig {
            stream: StreamSection {
                batch_size: synth.batch_size,
                seed: synth.seed,
                source: StreamSource::Synthetic(synth),
            },
            model: ModelSection {
                hidden: vec![64],
                activation: Activation::Relu,
            },
            rehearsal: RehearsalConfig {
                aug: AugPolicy::default_for(shape),
                ..RehearsalConfig::default()
            },
            tuner: TunerSection {
                enabled: false,
                space: ActionSpace::default(),
                target_acc: DEFAULT_TARGET_ACC,
                lr_rl: DEFAULT_LR_RL,
            },
            output: OutputSection {
                dir: PathBuf::from("runs/default"),
                checkpoints: true,
                memory_dump: true,
            },
        }
    }
}

#[derive(Debug)]
struct Entry {
    line: usize,
    value: String,
}

/// Key/value pairs not yet consumed by the builder.
struct Raw {
    map: BTreeMap<String, Entry>,
}

fn config_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_line(line_no: usize, line: &str) -> Result<Option<(String, String)>> {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let body = body.trim();
    if body.is_empty() {
        return Ok(None);
    }
    let Some((k, v)) = body.split_once('=') else {
        return Err(config_err(line_no, body, "expected `section.key = value`"));
    };
    let k = k.trim();
    if k.is_empty() || !k.contains('.') {
        return Err(config_err(line_no, k, "keys have the form `section.key`"));
    }
    Ok(Some((k.to_string(), v.trim().to_string())))
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if let Some((k, v)) = parse_line(i + 1, line)? {
                if let Some(prev) = map.get::<str>(&k) {
                    let prev: &Entry = prev;
                    return Err(config_err(
                        i + 1,
                        &k,
                        format!("duplicate key, first set on line {}", prev.line),
                    ));
                }
                map.insert(k, Entry { line: i + 1, value: v });
            }
        }
        Ok(Raw { map })
    }

    /// Overrides replace file values; they report line 0.
    fn apply_override(&mut self, text: &str) -> Result<()> {
        match parse_line(0, text)? {
            Some((k, v)) => {
                self.map.insert(k, Entry { line: 0, value: v });
                Ok(())
            }
            None => Err(config_err(0, text, "empty override")),
        }
    }

    fn take_str(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key).map(|e| (e.line, e.value))
    }

    fn take_with<T>(
        &mut self,
        key: &str,
        default: T,
        f: impl FnOnce(&str) -> std::result::Result<T, String>,
    ) -> Result<T> {
        match self.take_str(key) {
            None => Ok(default),
            Some((line, v)) => f(&v).map_err(|m| config_err(line, key, m)),
        }
    }

    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        self.take_with(key, default, |v| {
            v.parse::<T>().map_err(|e| format!("cannot parse `{v}`: {e}"))
        })
    }

    fn take_opt<T: FromStr>(&mut self, key: &str, default: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.take_with(key, default, |v| {
            if v == "none" {
                Ok(None)
            } else {
                v.parse::<T>().map(Some).map_err(|e| format!("cannot parse `{v}`: {e}"))
            }
        })
    }

    fn line_of(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |e| e.line)
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((k, e)) => Err(config_err(e.line, &k, "unknown key")),
        }
    }
}

/// `"1-3,7"` is `[1, 2, 3, 7]`; an empty string is an empty list.
pub fn parse_usize_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let a: usize = a.trim().parse().map_err(|e| format!("bad range `{part}`: {e}"))?;
            let b: usize = b.trim().parse().map_err(|e| format!("bad range `{part}`: {e}"))?;
            if a > b {
                return Err(format!("empty range `{part}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|e| format!("bad integer `{part}`: {e}"))?);
        }
    }
    Ok(out)
}

/// `"1:5,1:14"` is `[(1, 5), (1, 14)]`.
pub fn parse_pq_list(s: &str) -> std::result::Result<Vec<AugArm>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|part| {
            let (p, q) = part
                .split_once(':')
                .ok_or_else(|| format!("expected `P:Q`, got `{part}`"))?;
            Ok(AugArm {
                p: p.trim().parse().map_err(|e| format!("bad P in `{part}`: {e}"))?,
                q: q.trim().parse().map_err(|e| format!("bad Q in `{part}`: {e}"))?,
            })
        })
        .collect()
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_ops(s: &str) -> std::result::Result<Vec<TransformOp>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<TransformOp>().map_err(|e| e.to_string()))
        .collect()
}

fn parse_loss(s: &str) -> std::result::Result<LossKind, String> {
    match s {
        "cross_entropy" => Ok(LossKind::CrossEntropy),
        "squared_error" => Ok(LossKind::SquaredError),
        "distillation" => Ok(LossKind::DistillationMse {
            alpha: DEFAULT_DISTILLATION_ALPHA,
        }),
        other => Err(format!("unknown loss `{other}`")),
    }
}

fn loss_name(kind: LossKind) -> &'static str {
    match kind {
        LossKind::CrossEntropy => "cross_entropy",
        LossKind::SquaredError => "squared_error",
        LossKind::DistillationMse { .. } => "distillation",
    }
}

fn opt<T: Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut raw = Raw::parse(text)?;
        for o in overrides {
            raw.apply_override(o)?;
        }
        Self::build(raw)
    }

    /// Reads `path`, applies `key=value` overrides, then `OCL_SEED`.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse_with_overrides(&text, overrides)?;
        cfg.apply_seed_env()?;
        Ok(cfg)
    }

    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.stream.seed = v
                .trim()
                .parse()
                .map_err(|e| config_err(0, SEED_ENV, format!("cannot parse `{v}`: {e}")))?;
            if let StreamSource::Synthetic(s) = &mut self.stream.source {
                s.seed = self.stream.seed;
            }
        }
        Ok(())
    }

    fn build(mut raw: Raw) -> Result<Self> {
        let d = RunConfig::default();
        let StreamSource::Synthetic(ds) = &d.stream.source else {
            unreachable!()
        };

        let kind_line = raw.line_of("stream.kind");
        let kind = raw.take("stream.kind", "synthetic".to_string())?;
        let seed = raw.take("stream.seed", d.stream.seed)?;
        let batch_size = raw.take("stream.batch_size", d.stream.batch_size)?;
        let num_tasks = raw.take("stream.num_tasks", ds.num_tasks)?;
        let source = match kind.as_str() {
            "synthetic" => {
                let image_side = raw.take_opt("stream.image_side", None)?;
                let default_dim = image_side.map_or(ds.input_dim, |s: usize| s * s);
                StreamSource::Synthetic(SyntheticSpec {
                    num_tasks,
                    classes_per_task: raw.take("stream.classes_per_task", ds.classes_per_task)?,
                    train_per_class: raw.take("stream.train_per_class", ds.train_per_class)?,
                    test_per_class: raw.take("stream.test_per_class", ds.test_per_class)?,
                    input_dim: raw.take("stream.input_dim", default_dim)?,
                    class_separation: raw.take("stream.class_separation", ds.class_separation)?,
                    seed,
                    batch_size,
                    train_per_class_by_task: raw.take_with("stream.train_per_class_by_task", None, |v| {
                        if v == "none" {
                            Ok(None)
                        } else {
                            parse_usize_list(v).map(Some)
                        }
                    })?,
                    image_side,
                })
            }
            "idx" => {
                let mut path = |key: &str| -> Result<PathBuf> {
                    raw.take_str(key)
                        .map(|(_, v)| PathBuf::from(v))
                        .ok_or_else(|| config_err(kind_line, key, "required for idx streams"))
                };
                StreamSource::Idx {
                    train_images: path("stream.train_images")?,
                    train_labels: path("stream.train_labels")?,
                    test_images: path("stream.test_images")?,
                    test_labels: path("stream.test_labels")?,
                    num_tasks,
                }
            }
            other => {
                return Err(config_err(
                    kind_line,
                    "stream.kind",
                    format!("unknown stream kind `{other}`"),
                ))
            }
        };
        if batch_size == 0 {
            return Err(config_err(
                raw.line_of("stream.batch_size"),
                "stream.batch_size",
                "must be positive",
            ));
        }

        let model = ModelSection {
            hidden: raw.take_with("model.hidden", d.model.hidden.clone(), parse_usize_list)?,
            activation: raw.take("model.activation", d.model.activation)?,
        };
        if model.hidden.contains(&0) {
            return Err(config_err(0, "model.hidden", "layer widths must be positive"));
        }

        let dr = &d.rehearsal;
        let mut loss = raw.take_with("rehearsal.loss", dr.loss, parse_loss)?;
        let distill_alpha = raw.take("rehearsal.distill_alpha", DEFAULT_DISTILLATION_ALPHA)?;
        if let LossKind::DistillationMse { .. } = loss {
            loss = LossKind::distillation(distill_alpha)
                .map_err(|e| config_err(0, "rehearsal.distill_alpha", e.to_string()))?;
        }
        let retrieval_name = raw.take("rehearsal.retrieval", "random".to_string())?;
        let candidates = raw.take("rehearsal.mir_candidates", DEFAULT_MIR_CANDIDATES)?;
        let retrieval = match retrieval_name.as_str() {
            "random" => RetrievalPolicy::UniformRandom,
            "mir" => RetrievalPolicy::Mir { candidates },
            other => {
                return Err(config_err(
                    0,
                    "rehearsal.retrieval",
                    format!("unknown retrieval `{other}`"),
                ))
            }
        };

        let image = match &source {
            StreamSource::Synthetic(s) => s.image_side.is_some(),
            StreamSource::Idx { .. } => true,
        };
        let ops = raw.take_with("aug.ops", None, |v| {
            if v == "default" {
                Ok(None)
            } else {
                parse_ops(v).map(Some)
            }
        })?;
        let ops = ops.unwrap_or_else(|| {
            if image {
                TransformOp::image_ops()
            } else {
                TransformOp::vector_ops()
            }
        });
        let p = raw.take("aug.p", dr.aug.p())?;
        let q = raw.take("aug.q", dr.aug.q())?;
        let target: AugTarget = raw.take("aug.target", dr.aug.target())?;
        let aug = AugPolicy::new(ops, p, q, target).map_err(|e| config_err(0, "aug", e.to_string()))?;

        let rehearsal = RehearsalConfig {
            k: raw.take("rehearsal.k", dr.k)?,
            lr: raw.take("rehearsal.lr", dr.lr)?,
            incoming_batch_size: batch_size,
            memory_batch_size: raw.take("rehearsal.memory_batch_size", dr.memory_batch_size)?,
            memory_capacity: raw.take("rehearsal.memory_capacity", dr.memory_capacity)?,
            loss,
            alpha_rw: raw.take_opt("rehearsal.alpha_rw", dr.alpha_rw)?,
            aug,
            retrieval,
            offline_epochs: raw.take_opt("rehearsal.offline_epochs", dr.offline_epochs)?,
        };
        rehearsal
            .validate()
            .map_err(|e| config_err(0, "rehearsal", e.to_string()))?;

        let ds_space = &d.tuner.space;
        let k_arms = raw.take_with("tuner.k_arms", ds_space.iteration_arms().to_vec(), parse_usize_list)?;
        let aug_arms = raw.take_with("tuner.aug_arms", ds_space.aug_arms().to_vec(), parse_pq_list)?;
        let space = ActionSpace::new(k_arms, aug_arms).map_err(|e| config_err(0, "tuner", e.to_string()))?;
        let tuner = TunerSection {
            enabled: raw.take("tuner.enabled", d.tuner.enabled)?,
            space,
            target_acc: raw.take("tuner.target_acc", d.tuner.target_acc)?,
            lr_rl: raw.take("tuner.lr_rl", d.tuner.lr_rl)?,
        };
        if !(0.0..=1.0).contains(&tuner.target_acc) {
            return Err(config_err(0, "tuner.target_acc", "must lie in [0, 1]"));
        }
        if !(tuner.lr_rl > 0.0 && tuner.lr_rl.is_finite()) {
            return Err(config_err(0, "tuner.lr_rl", "must be positive"));
        }
        if tuner.enabled && rehearsal.aug.target() != AugTarget::None {
            if let Some(a) = tuner.space.aug_arms().iter().find(|a| a.p > rehearsal.aug.ops().len()) {
                return Err(config_err(
                    0,
                    "tuner.aug_arms",
                    format!("P = {} exceeds the {} configured ops", a.p, rehearsal.aug.ops().len()),
                ));
            }
        }

        let output = OutputSection {
            dir: PathBuf::from(raw.take("output.dir", d.output.dir.display().to_string())?),
            checkpoints: raw.take("output.checkpoints", d.output.checkpoints)?,
            memory_dump: raw.take("output.memory_dump", d.output.memory_dump)?,
        };

        raw.finish()?;
        Ok(RunConfig {
            stream: StreamSection {
                source,
                batch_size,
                seed,
            },
            model,
            rehearsal,
            tuner,
            output,
        })
    }

    /// Every key in a fixed order. Parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let st = &self.stream;
        match &st.source {
            StreamSource::Synthetic(sp) => {
                kv("stream.kind", "synthetic".into());
                kv("stream.num_tasks", sp.num_tasks.to_string());
                kv("stream.classes_per_task", sp.classes_per_task.to_string());
                kv("stream.train_per_class", sp.train_per_class.to_string());
                kv("stream.test_per_class", sp.test_per_class.to_string());
                kv(
                    "stream.train_per_class_by_task",
                    sp.train_per_class_by_task
                        .as_ref()
                        .map_or_else(|| "none".into(), |v| join(v)),
                );
                kv("stream.input_dim", sp.input_dim.to_string());
                kv("stream.class_separation", sp.class_separation.to_string());
                kv("stream.image_side", opt(sp.image_side));
            }
            StreamSource::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                num_tasks,
            } => {
                kv("stream.kind", "idx".into());
                kv("stream.num_tasks", num_tasks.to_string());
                kv("stream.train_images", train_images.display().to_string());
                kv("stream.train_labels", train_labels.display().to_string());
                kv("stream.test_images", test_images.display().to_string());
                kv("stream.test_labels", test_labels.display().to_string());
            }
        }
        kv("stream.batch_size", st.batch_size.to_string());
        kv("stream.seed", st.seed.to_string());

        kv("model.hidden", join(&self.model.hidden));
        kv("model.activation", self.model.activation.to_string());

        let r = &self.rehearsal;
        kv("rehearsal.k", r.k.to_string());
        kv("rehearsal.lr", r.lr.to_string());
        kv("rehearsal.memory_batch_size", r.memory_batch_size.to_string());
        kv("rehearsal.memory_capacity", r.memory_capacity.to_string());
        kv("rehearsal.loss", loss_name(r.loss).into());
        if let LossKind::DistillationMse { alpha } = r.loss {
            kv("rehearsal.distill_alpha", alpha.to_string());
        }
        kv("rehearsal.alpha_rw", opt(r.alpha_rw));
        match r.retrieval {
            RetrievalPolicy::UniformRandom => kv("rehearsal.retrieval", "random".into()),
            RetrievalPolicy::Mir { candidates } => {
                kv("rehearsal.retrieval", "mir".into());
                kv("rehearsal.mir_candidates", candidates.to_string());
            }
        }
        kv("rehearsal.offline_epochs", opt(r.offline_epochs));

        kv("aug.ops", join(r.aug.ops()));
        kv("aug.p", r.aug.p().to_string());
        kv("aug.q", r.aug.q().to_string());
        kv("aug.target", r.aug.target().to_string());

        let t = &self.tuner;
        kv("tuner.enabled", t.enabled.to_string());
        kv("tuner.k_arms", join(t.space.iteration_arms()));
        kv(
            "tuner.aug_arms",
            t.space
                .aug_arms()
                .iter()
                .map(|a| format!("{}:{}", a.p, a.q))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("tuner.target_acc", t.target_acc.to_string());
        kv("tuner.lr_rl", t.lr_rl.to_string());

        kv("output.dir", self.output.dir.display().to_string());
        kv("output.checkpoints", self.output.checkpoints.to_string());
        kv("output.memory_dump", self.output.memory_dump.to_string());
        s
    }

    /// SHA-256 of [`RunConfig::to_text`], lowercase hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn build_stream(&self) -> Result<TaskStream> {
        match &self.stream.source {
            StreamSource::Synthetic(sp) => make_synthetic_stream(&SyntheticSpec {
                seed: self.stream.seed,
                batch_size: self.stream.batch_size,
                ..sp.clone()
            }),
            StreamSource::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                num_tasks,
            } => load_idx_stream_with_test(
                train_images,
                train_labels,
                test_images,
                test_labels,
                *num_tasks,
                self.stream.batch_size,
                self.stream.seed,
            ),
        }
    }

    /// Input width from the stream, hidden widths from the config, one
    /// output per class.
    pub fn model_spec(&self, stream: &TaskStream) -> Result<MlpSpec> {
        let mut sizes = vec![stream.input_dim()];
        sizes.extend(&self.model.hidden);
        sizes.push(stream.num_classes());
        MlpSpec::new(sizes, self.model.activation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn empty_text_is_default() {
        assert_eq!(RunConfig::parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("stream.seed = 3\n\nrehearsal.kk = 2\n").unwrap_err();
        match err {
            Error::Config { line, key, .. } => {
                assert_eq!(line, 3);
                assert_eq!(key, "rehearsal.kk");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_values_report_key() {
        for (text, want) in [
            ("rehearsal.k = ten", "rehearsal.k"),
            ("stream.kind = csv", "stream.kind"),
            ("aug.target = sometimes", "aug.target"),
            ("tuner.target_acc = 2", "tuner.target_acc"),
            ("no_section = 1", "no_section"),
            ("rehearsal.k = 0", "rehearsal"),
        ] {
            match RunConfig::parse(text) {
                Err(Error::Config { key, .. }) => assert_eq!(key, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        assert!(matches!(
            RunConfig::parse("rehearsal.k = 1\nrehearsal.k = 2\n"),
            Err(Error::Config { line: 2, .. })
        ));
    }

    #[test]
    fn overrides_win() {
        let c = RunConfig::parse_with_overrides("rehearsal.k = 3\n", &["rehearsal.k=7".into(), "aug.q = 5".into()])
            .unwrap();
        assert_eq!(c.rehearsal.k, 7);
        assert_eq!(c.rehearsal.aug.q(), 5.0);
    }

    #[test]
    fn image_stream_defaults_to_image_ops() {
        let c = RunConfig::parse("stream.image_side = 8\n").unwrap();
        let StreamSource::Synthetic(s) = &c.stream.source else {
            panic!()
        };
        assert_eq!(s.input_dim, 64);
        assert_eq!(c.rehearsal.aug.ops(), TransformOp::image_ops().as_slice());
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn idx_requires_paths() {
        assert!(matches!(
            RunConfig::parse("stream.kind = idx\nstream.train_images = a\n"),
            Err(Error::Config { line: 1, .. })
        ));
        let text = "stream.kind = idx\nstream.train_images = a\nstream.train_labels = b\nstream.test_images = c\nstream.test_labels = d\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_usize_list("1-3, 7").unwrap(), vec![1, 2, 3, 7]);
        assert!(parse_usize_list("3-1").is_err());
        assert_eq!(
            parse_pq_list("1:5,2:14").unwrap(),
            vec![AugArm { p: 1, q: 5.0 }, AugArm { p: 2, q: 14.0 }]
        );
    }

    proptest! {
        #[test]
        fn round_trip(
            k in 1usize..30,
            lr in 1e-4f64..1.0,
            cap in 0usize..500,
            q in 0.0f64..30.0,
            target in 0usize..4,
            alpha in proptest::option::of(0.01f64..0.99),
            epochs in proptest::option::of(1usize..5),
            hidden in proptest::collection::vec(1usize..100, 0..3),
            mir in any::<bool>(),
            loss in 0usize..3,
            enabled in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let targets = [AugTarget::None, AugTarget::MemoryOnly, AugTarget::IncomingOnly, AugTarget::Both];
            let mut c = RunConfig::default();
            c.rehearsal.k = k;
            c.rehearsal.lr = lr;
            c.rehearsal.memory_capacity = cap;
            c.rehearsal.aug = AugPolicy::new(c.rehearsal.aug.ops().to_vec(), 2, q, targets[target]).unwrap();
            c.rehearsal.alpha_rw = alpha;
            c.rehearsal.offline_epochs = epochs;
            c.rehearsal.retrieval = if mir { RetrievalPolicy::Mir { candidates: 40 } } else { RetrievalPolicy::UniformRandom };
            c.rehearsal.loss = [LossKind::CrossEntropy, LossKind::SquaredError, LossKind::DistillationMse { alpha: lr }][loss];
            c.model.hidden = hidden;
            c.tuner.enabled = enabled;
            c.stream.seed = seed;
            if let StreamSource::Synthetic(s) = &mut c.stream.source {
                s.seed = seed;
            }
            let back = RunConfig::parse(&c.to_text()).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.to_text(), c.to_text());
        }
    }
}
