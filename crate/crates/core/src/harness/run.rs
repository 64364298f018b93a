use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::analysis::{compute_metrics, metrics_json, MetricsReport};
use crate::error::{Error, Result};
use crate::nn::{write_checkpoint, Model};
use crate::rehearsal::{run_stream, write_trace_csv, NoHooks, RunResult};
use crate::stream::TaskStream;
use crate::tuner::{write_tuner_csv, BanditPolicy, TunerHooks, TunerRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub root_seed: u64,
    pub engine_version: String,
    pub wall_clock_seconds: f64,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn read(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Everything a run produces before it is written to disk.
pub struct RunOutput {
    pub result: RunResult,
    pub metrics: MetricsReport,
    pub tuner_log: Vec<TunerRecord>,
}

/// Glorot-uniform initial model drawn from the root seed.
pub fn initial_model(cfg: &RunConfig, stream: &TaskStream) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.stream.seed);
    rng.set_stream(2);
    Ok(Model::init(cfg.model_spec(stream)?, &mut rng))
}

/// Runs `cfg` on `stream` in memory, with the tuner when enabled.
pub fn execute_on(cfg: &RunConfig, stream: &mut TaskStream) -> Result<RunOutput> {
    let model = initial_model(cfg, stream)?;
    let seed = cfg.stream.seed;
    let (result, tuner_log) = if cfg.tuner.enabled {
        let policy = BanditPolicy::new(cfg.tuner.space.clone(), cfg.tuner.lr_rl, cfg.tuner.target_acc)?;
        let mut hooks = TunerHooks::new(policy, seed);
        let r = run_stream(stream, model, &cfg.rehearsal, seed, &mut hooks)?;
        (r, hooks.into_log())
    } else {
        (
            run_stream(stream, model, &cfg.rehearsal, seed, &mut NoHooks)?,
            Vec::new(),
        )
    };
    Ok(RunOutput {
        metrics: compute_metrics(&result.accuracy),
        result,
        tuner_log,
    })
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    execute_on(cfg, &mut cfg.build_stream()?)
}

fn write_file(
    dir: &Path,
    name: &str,
    artifacts: &mut Vec<String>,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    artifacts.push(name.to_string());
    Ok(())
}

/// Writes the artifacts of `out` into `dir`, the manifest last.
pub fn write_run(dir: &Path, cfg: &RunConfig, out: &RunOutput, started: Instant) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut artifacts = Vec::new();
    let text = cfg.to_text();
    write_file(dir, "config.txt", &mut artifacts, |w| w.write_all(text.as_bytes()))?;
    write_file(dir, "accuracy.csv", &mut artifacts, |w| {
        out.result.accuracy.write_csv(w)
    })?;
    let json = metrics_json(&out.result.accuracy, &out.metrics)?;
    write_file(dir, "metrics.json", &mut artifacts, |w| writeln!(w, "{json}"))?;
    write_file(dir, "trace.csv", &mut artifacts, |w| {
        write_trace_csv(&out.result.trace, w)
    })?;
    write_file(dir, "tuner.csv", &mut artifacts, |w| {
        write_tuner_csv(&out.tuner_log, &cfg.tuner.space, w)
    })?;
    if cfg.output.checkpoints {
        for (i, m) in out.result.checkpoints.iter().enumerate() {
            write_file(dir, &format!("checkpoints/task_{i}.ckpt"), &mut artifacts, |w| {
                write_checkpoint(m, w)
            })?;
        }
    }
    if cfg.output.memory_dump {
        if let Some(mem) = &out.result.memory {
            write_file(dir, "memory.csv", &mut artifacts, |w| mem.write_dump_csv(w))?;
        }
    }
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        root_seed: cfg.stream.seed,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        artifacts,
    };
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Loads the config, runs it and writes the run directory. `out_dir`
/// replaces `output.dir`.
pub fn cli_run(config_path: &Path, overrides: &[String], out_dir: Option<PathBuf>) -> Result<(PathBuf, RunManifest)> {
    let started = Instant::now();
    let mut cfg = RunConfig::load(config_path, overrides)?;
    if let Some(d) = out_dir {
        cfg.output.dir = d;
    }
    let out = execute(&cfg)?;
    let manifest = write_run(&cfg.output.dir, &cfg, &out, started)?;
    Ok((cfg.output.dir.clone(), manifest))
}
