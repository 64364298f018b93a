use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::initial_model;
use crate::analysis::{landscape_grid, landscape_plane, LandscapeGrid, Plane};
use crate::error::{Error, Result};
use crate::nn::{write_checkpoint, Model};
use crate::rehearsal::Learner;
use crate::stream::{to_batch, IncomingBatch, Sample};

pub const TASK1_MEMORY: &str = "task1_memory";
pub const TASK1_TEST: &str = "task1_test";
pub const TASK1_TRAIN: &str = "task1_train";
pub const TASK2_TEST: &str = "task2_test";

/// Where an anchor lands in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSummary {
    pub w2: Anchor,
    pub w2ft: Anchor,
    pub e1_dot_e2: f64,
    /// Node nearest to `w2`.
    pub cl_cell: (usize, usize),
    /// Task-1 test loss minus task-1 memory loss at `cl_cell`.
    pub cl_cell_gap: Option<f64>,
    /// The same gap evaluated exactly at `w2`.
    pub cl_gap: Option<f64>,
}

pub struct LandscapeOutcome {
    pub w1: Model,
    pub w2: Model,
    pub w2ft: Model,
    pub plane: Plane,
    pub grid: LandscapeGrid,
    pub summary: LandscapeSummary,
}

fn run_task(learner: &mut Learner, batches: &[&IncomingBatch], train: &[Sample]) -> Result<()> {
    for b in batches {
        learner.observe(&b.samples, None)?;
    }
    if let Some(e) = learner.config().offline_epochs {
        learner.replay_epochs(train, e - 1)?;
    }
    Ok(())
}

/// `w1` after task 1 with the configured learner; `w2` continues it on
/// task 2; `w2ft` continues the same state on task 2 with the memory
/// discarded.
pub fn landscape_experiment(cfg: &RunConfig, resolution: usize) -> Result<LandscapeOutcome> {
    let mut stream = cfg.build_stream()?;
    if stream.tasks().len() < 2 {
        return Err(Error::precondition("the landscape needs at least two tasks"));
    }
    let model = initial_model(cfg, &stream)?;
    let tasks = stream.tasks()[..2].to_vec();
    let mut batches = Vec::new();
    while let Some(b) = stream.next_batch() {
        if b.task > 1 {
            break;
        }
        batches.push(b);
    }
    let of = |t: usize| batches.iter().filter(|b| b.task == t).collect::<Vec<_>>();

    let mut learner = Learner::new(model, cfg.rehearsal.clone(), cfg.stream.seed)?;
    run_task(&mut learner, &of(0), &tasks[0].train)?;
    let w1 = learner.model().clone();

    let mut finetune = learner.clone();
    finetune.drop_memory();
    run_task(&mut learner, &of(1), &tasks[1].train)?;
    run_task(&mut finetune, &of(1), &tasks[1].train)?;
    let w2 = learner.model().clone();
    let w2ft = finetune.model().clone();

    let plane = landscape_plane(w1.params(), w2.params(), w2ft.params())?;
    let memory: Vec<Sample> = learner
        .state()
        .memory
        .as_ref()
        .map(|m| m.items().filter(|s| s.task_id == 0).cloned().collect())
        .unwrap_or_default();
    let mut datasets = vec![
        (TASK1_TRAIN.to_string(), to_batch(&tasks[0].train)?),
        (TASK1_TEST.to_string(), to_batch(&tasks[0].test)?),
        (TASK2_TEST.to_string(), to_batch(&tasks[1].test)?),
    ];
    if !memory.is_empty() {
        datasets.push((TASK1_MEMORY.to_string(), to_batch(&memory)?));
    }
    let (ar, br) = plane.default_ranges(&[w1.params(), w2.params(), w2ft.params()]);
    let kind = cfg.rehearsal.incoming_loss();
    let grid = landscape_grid(&plane, w1.spec(), &datasets, ar, br, (resolution, resolution), kind)?;

    let anchor = |w: &Model| {
        let (a, b, residual) = plane.project(w.params());
        Anchor { a, b, residual }
    };
    let (w2a, w2fta) = (anchor(&w2), anchor(&w2ft));
    let cl_cell = grid.nearest_cell(w2a.a, w2a.b);
    let cl_cell_gap = match (grid.dataset_index(TASK1_TEST), grid.dataset_index(TASK1_MEMORY)) {
        (Some(t), Some(m)) => {
            let c = grid.cell(cl_cell.0, cl_cell.1);
            Some(c[t] - c[m])
        }
        _ => None,
    };
    let cl_gap = if memory.is_empty() {
        None
    } else {
        Some(w2.loss(&datasets[1].1, kind)? - w2.loss(&to_batch(&memory)?, kind)?)
    };
    let e1_dot_e2 = plane.e1().iter().zip(plane.e2()).map(|(x, y)| x * y).sum();
    Ok(LandscapeOutcome {
        summary: LandscapeSummary {
            w2: w2a,
            w2ft: w2fta,
            e1_dot_e2,
            cl_cell,
            cl_cell_gap,
            cl_gap,
        },
        w1,
        w2,
        w2ft,
        plane,
        grid,
    })
}

/// Writes `w1.ckpt`, `w2.ckpt`, `w2ft.ckpt`, `landscape.csv` and
/// `landscape.json` into `dir`.
pub fn write_landscape(dir: &Path, out: &LandscapeOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, m) in [("w1.ckpt", &out.w1), ("w2.ckpt", &out.w2), ("w2ft.ckpt", &out.w2ft)] {
        let path = dir.join(name);
        let mut buf = Vec::new();
        write_checkpoint(m, &mut buf).map_err(|e| Error::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join("landscape.csv");
    let mut buf = Vec::new();
    out.grid.write_csv(&mut buf).map_err(|e| Error::io(&path, e))?;
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("landscape.json");
    fs::write(&path, serde_json::to_string_pretty(&out.summary)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn cli_landscape(
    config_path: &Path,
    overrides: &[String],
    out_dir: &Path,
    resolution: usize,
) -> Result<LandscapeSummary> {
    let cfg = RunConfig::load(config_path, overrides)?;
    let out = landscape_experiment(&cfg, resolution)?;
    write_landscape(out_dir, &out)?;
    Ok(out.summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::AugPolicy;
    use crate::harness::config::StreamSource;
    use crate::stream::SyntheticSpec;

    fn small(capacity: usize) -> RunConfig {
        let mut c = RunConfig::default();
        c.stream.source = StreamSource::Synthetic(SyntheticSpec {
            num_tasks: 2,
            train_per_class: 30,
            test_per_class: 20,
            input_dim: 6,
            ..SyntheticSpec::default()
        });
        c.model.hidden = vec![5];
        c.rehearsal.k = 2;
        c.rehearsal.memory_capacity = capacity;
        c.rehearsal.aug = AugPolicy::disabled();
        c
    }

    #[test]
    fn origin_cell_matches_w1() {
        let out = landscape_experiment(&small(20), 11).unwrap();
        let (ia, ib) = out.grid.nearest_cell(0.0, 0.0);
        assert_eq!((out.grid.a_values[ia], out.grid.b_values[ib]), (0.0, 0.0));
        let t = out.grid.dataset_index(TASK1_TEST).unwrap();
        let direct = out
            .w1
            .loss(
                &to_batch(&small(20).build_stream().unwrap().tasks()[0].test).unwrap(),
                crate::nn::LossKind::CrossEntropy,
            )
            .unwrap();
        assert_eq!(out.grid.cell(ia, ib)[t].to_bits(), direct.to_bits());
        assert!(out.summary.e1_dot_e2.abs() <= 1e-10);
        assert!(out.summary.w2.residual < 1e-10 && out.summary.w2ft.residual < 1e-10);
        assert!(out.summary.cl_cell_gap.is_some());
    }

    #[test]
    fn no_memory_makes_the_plane_degenerate() {
        assert!(matches!(landscape_experiment(&small(0), 5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = landscape_experiment(&small(20), 5).unwrap();
        write_landscape(dir.path(), &out).unwrap();
        for f in ["w1.ckpt", "w2.ckpt", "w2ft.ckpt", "landscape.csv", "landscape.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
