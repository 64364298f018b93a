use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::execute_on;
use crate::augment::AugTarget;
use crate::error::{Error, Result};
use crate::tuner::AugArm;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub k: usize,
    /// `None` keeps the configured (P, Q).
    pub aug: Option<AugArm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub point: GridPoint,
    /// Position in the input grid.
    pub index: usize,
    pub average_accuracy: f64,
}

/// Cartesian product of `ks` and `pqs`; an empty `pqs` keeps the configured
/// augmentation.
pub fn make_grid(ks: &[usize], pqs: &[AugArm]) -> Vec<GridPoint> {
    let augs: Vec<Option<AugArm>> = if pqs.is_empty() {
        vec![None]
    } else {
        pqs.iter().copied().map(Some).collect()
    };
    ks.iter()
        .flat_map(|&k| augs.iter().map(move |&aug| GridPoint { k, aug }))
        .collect()
}

pub fn apply_point(cfg: &RunConfig, point: GridPoint) -> Result<RunConfig> {
    let mut c = cfg.clone();
    c.rehearsal.k = point.k;
    if let Some(a) = point.aug {
        if cfg.rehearsal.aug.target() == AugTarget::None {
            return Err(Error::contract("grid sets (P, Q) but aug.target is none"));
        }
        c.rehearsal.aug = c.rehearsal.aug.with_pq(a.p, a.q)?;
    }
    c.rehearsal.validate()?;
    Ok(c)
}

/// Runs every grid point on the first `validation_tasks` tasks with
/// `epochs` passes per task and ranks by final average accuracy, best
/// first. Ties keep grid order.
pub fn sweep(cfg: &RunConfig, grid: &[GridPoint], validation_tasks: usize, epochs: usize) -> Result<Vec<SweepEntry>> {
    if grid.is_empty() {
        return Err(Error::contract("sweep grid is empty"));
    }
    if epochs == 0 {
        return Err(Error::contract("sweep needs at least one epoch"));
    }
    let validation = cfg.build_stream()?.prefix(validation_tasks)?;
    let configs = grid
        .iter()
        .map(|&p| {
            let mut c = apply_point(cfg, p)?;
            c.tuner.enabled = false;
            c.rehearsal.offline_epochs = if epochs > 1 { Some(epochs) } else { None };
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut entries = configs
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            let out = execute_on(c, &mut validation.clone())?;
            Ok(SweepEntry {
                point: grid[index],
                index,
                average_accuracy: out.metrics.average_accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| {
        b.average_accuracy
            .total_cmp(&a.average_accuracy)
            .then(a.index.cmp(&b.index))
    });
    Ok(entries)
}

/// Header `rank,k,p,q,average_accuracy`; `p` and `q` are empty when the
/// point keeps the configured augmentation.
pub fn write_sweep_csv<W: Write>(entries: &[SweepEntry], mut w: W) -> std::io::Result<()> {
    writeln!(w, "rank,k,p,q,average_accuracy")?;
    for (rank, e) in entries.iter().enumerate() {
        let (p, q) = e
            .point
            .aug
            .map_or((String::new(), String::new()), |a| (a.p.to_string(), a.q.to_string()));
        writeln!(w, "{rank},{},{p},{q},{}", e.point.k, e.average_accuracy)?;
    }
    Ok(())
}

pub fn cli_sweep(
    config_path: &Path,
    overrides: &[String],
    grid: &[GridPoint],
    validation_tasks: usize,
    epochs: usize,
    out_dir: Option<&Path>,
) -> Result<Vec<SweepEntry>> {
    let cfg = RunConfig::load(config_path, overrides)?;
    let entries = sweep(&cfg, grid, validation_tasks, epochs)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("sweep.csv");
        let mut buf = Vec::new();
        write_sweep_csv(&entries, &mut buf).map_err(|e| Error::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::StreamSource;
    use crate::stream::SyntheticSpec;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.stream.source = StreamSource::Synthetic(SyntheticSpec {
            num_tasks: 3,
            train_per_class: 40,
            test_per_class: 20,
            input_dim: 8,
            ..SyntheticSpec::default()
        });
        c.model.hidden = vec![8];
        c.rehearsal.memory_capacity = 10;
        c
    }

    #[test]
    fn grid_product() {
        let g = make_grid(&[1, 10], &[AugArm { p: 1, q: 5.0 }, AugArm { p: 2, q: 14.0 }]);
        assert_eq!(g.len(), 4);
        assert_eq!(
            g[1],
            GridPoint {
                k: 1,
                aug: Some(AugArm { p: 2, q: 14.0 })
            }
        );
        assert_eq!(make_grid(&[3], &[]), vec![GridPoint { k: 3, aug: None }]);
    }

    #[test]
    fn empty_grid_is_contract_violation() {
        assert!(matches!(sweep(&small(), &[], 2, 1), Err(Error::Contract(_))));
    }

    #[test]
    fn singleton_grid_returns_it() {
        let g = [GridPoint { k: 2, aug: None }];
        let r = sweep(&small(), &g, 2, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].point, g[0]);
    }

    #[test]
    fn too_many_validation_tasks() {
        assert!(sweep(&small(), &[GridPoint { k: 1, aug: None }], 4, 1).is_err());
    }

    #[test]
    fn ranking_is_sorted_and_reproducible() {
        let g = make_grid(&[1, 10], &[]);
        let a = sweep(&small(), &g, 2, 2).unwrap();
        let b = sweep(&small(), &g, 2, 2).unwrap();
        assert_eq!(a, b);
        assert!(a[0].average_accuracy >= a[1].average_accuracy);
        let mut out = Vec::new();
        write_sweep_csv(&a, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 3);
    }
}
