use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `a[i][j]`: test accuracy on task `j` after training task `i`, `j <= i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    /// Row `i` must hold exactly `i + 1` entries in `[0, 1]`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::contract("accuracy matrix needs at least one row"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::contract(format!(
                    "accuracy row {i} has {} entries, expected {}",
                    row.len(),
                    i + 1
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::contract(format!("accuracy {v} in row {i} outside [0, 1]")));
            }
        }
        Ok(AccuracyMatrix { rows })
    }

    pub fn num_tasks(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rows.get(i).and_then(|r| r.get(j)).copied()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Header `after_task,task_0,..`; entries above the diagonal are empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let t = self.rows.len();
        write!(w, "after_task")?;
        for j in 0..t {
            write!(w, ",task_{j}")?;
        }
        writeln!(w)?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(w, "{i}")?;
            for j in 0..t {
                match row.get(j) {
                    Some(v) => write!(w, ",{v}")?,
                    None => write!(w, ",")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub num_tasks: usize,
    pub average_accuracy: f64,
    /// Absent for a single task.
    pub forgetting: Option<f64>,
    pub backward_transfer: Option<f64>,
    pub plasticity: f64,
    pub stability: Option<f64>,
}

pub fn compute_metrics(m: &AccuracyMatrix) -> MetricsReport {
    let t = m.rows.len();
    let last = &m.rows[t - 1];
    let average_accuracy = last.iter().sum::<f64>() / t as f64;
    let plasticity = (0..t).map(|i| m.rows[i][i]).sum::<f64>() / t as f64;
    if t < 2 {
        return MetricsReport {
            num_tasks: t,
            average_accuracy,
            forgetting: None,
            backward_transfer: None,
            plasticity,
            stability: None,
        };
    }
    let denom = (t - 1) as f64;
    let forgetting = -(0..t - 1)
        .map(|i| {
            let best = (i..t - 1).map(|l| m.rows[l][i]).fold(f64::NEG_INFINITY, f64::max);
            last[i] - best
        })
        .sum::<f64>()
        / denom;
    let bwt = (0..t - 1).map(|i| last[i] - m.rows[i][i]).sum::<f64>() / denom;
    MetricsReport {
        num_tasks: t,
        average_accuracy,
        forgetting: Some(forgetting),
        backward_transfer: Some(bwt),
        plasticity,
        stability: Some(denom / t as f64 * bwt),
    }
}

#[derive(Serialize)]
struct MetricsJson<'a> {
    accuracy_matrix: &'a [Vec<f64>],
    #[serde(flatten)]
    report: &'a MetricsReport,
}

/// The full matrix plus every report field.
pub fn metrics_json(m: &AccuracyMatrix, report: &MetricsReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(&MetricsJson {
        accuracy_matrix: &m.rows,
        report,
    })?)
}
