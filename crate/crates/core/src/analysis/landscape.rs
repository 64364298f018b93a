use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{Batch, LossKind, MlpSpec, Model};

/// Two orthonormal directions through `origin` in parameter space.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    origin: Vec<f64>,
    e1: Vec<f64>,
    e2: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Removes the `e` component from `v` in place.
fn reject(v: &mut [f64], e: &[f64]) {
    let c = dot(v, e);
    for (x, y) in v.iter_mut().zip(e) {
        *x -= c * y;
    }
}

/// `e1 = (w2 - w1)/|w2 - w1|`; `e2` is the normalized part of `w2ft - w1`
/// orthogonal to `e1`.
pub fn landscape_plane(w1: &[f64], w2: &[f64], w2ft: &[f64]) -> Result<Plane> {
    if w1.len() != w2.len() || w1.len() != w2ft.len() {
        return Err(Error::contract("plane anchors must have equal length"));
    }
    let scale = norm(w1).max(norm(w2)).max(norm(w2ft)).max(1.0);
    let mut e1 = sub(w2, w1);
    let n1 = norm(&e1);
    if n1 <= 1e-12 * scale {
        return Err(Error::Degenerate("w2 coincides with w1".into()));
    }
    e1.iter_mut().for_each(|x| *x /= n1);
    let d = sub(w2ft, w1);
    let mut e2 = d.clone();
    reject(&mut e2, &e1);
    reject(&mut e2, &e1);
    let n2 = norm(&e2);
    if n2 <= 1e-10 * norm(&d).max(1e-12 * scale) {
        return Err(Error::Degenerate("w2ft - w1 is zero or parallel to w2 - w1".into()));
    }
    e2.iter_mut().for_each(|x| *x /= n2);
    Ok(Plane {
        origin: w1.to_vec(),
        e1,
        e2,
    })
}

impl Plane {
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn e1(&self) -> &[f64] {
        &self.e1
    }

    pub fn e2(&self) -> &[f64] {
        &self.e2
    }

    /// `origin + a e1 + b e2`.
    pub fn point(&self, a: f64, b: f64) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.e1)
            .zip(&self.e2)
            .map(|((o, x), y)| o + a * x + b * y)
            .collect()
    }

    /// Plane coordinates of `w` and the norm of its out-of-plane residual.
    pub fn project(&self, w: &[f64]) -> (f64, f64, f64) {
        let d = sub(w, &self.origin);
        let a = dot(&d, &self.e1);
        let b = dot(&d, &self.e2);
        let back = self.point(a, b);
        (a, b, norm(&sub(w, &back)))
    }

    /// Per-axis ranges spanning the anchors' coordinates with half a span of
    /// margin on each side.
    pub fn default_ranges(&self, anchors: &[&[f64]]) -> ((f64, f64), (f64, f64)) {
        let coords: Vec<(f64, f64)> = anchors
            .iter()
            .map(|w| {
                let (a, b, _) = self.project(w);
                (a, b)
            })
            .collect();
        let axis = |f: fn(&(f64, f64)) -> f64| {
            let lo = coords.iter().map(f).fold(0.0, f64::min);
            let hi = coords.iter().map(f).fold(0.0, f64::max);
            let span = (hi - lo).max(1e-12);
            (lo - 0.5 * span, hi + 0.5 * span)
        };
        (axis(|c| c.0), axis(|c| c.1))
    }
}

pub const DEFAULT_RESOLUTION: usize = 41;

/// Loss of every named dataset at every grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeGrid {
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    pub dataset_names: Vec<String>,
    /// `losses[ib * a_values.len() + ia][dataset]`.
    pub losses: Vec<Vec<f64>>,
}

/// `n` nodes spaced `(hi - lo) / (n - 1)` apart. When the range contains
/// zero the nodes are shifted by less than half a step so that zero is one.
fn axis_nodes((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![if lo <= 0.0 && 0.0 <= hi { 0.0 } else { lo }];
    }
    let step = (hi - lo) / (n - 1) as f64;
    if lo <= 0.0 && 0.0 <= hi && step > 0.0 {
        let first = (lo / step).round() as i64;
        (0..n as i64).map(|i| (first + i) as f64 * step).collect()
    } else {
        (0..n).map(|i| lo + i as f64 * step).collect()
    }
}

pub fn landscape_grid(
    plane: &Plane,
    spec: &MlpSpec,
    datasets: &[(String, Batch)],
    a_range: (f64, f64),
    b_range: (f64, f64),
    resolution: (usize, usize),
    kind: LossKind,
) -> Result<LandscapeGrid> {
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(Error::contract("grid resolution must be positive"));
    }
    if spec.param_count() != plane.origin.len() {
        return Err(Error::contract("plane dimension does not match the model"));
    }
    let a_values = axis_nodes(a_range, resolution.0);
    let b_values = axis_nodes(b_range, resolution.1);
    let cells: Vec<(f64, f64)> = b_values
        .iter()
        .flat_map(|&b| a_values.iter().map(move |&a| (a, b)))
        .collect();
    let losses = cells
        .par_iter()
        .map(|&(a, b)| {
            let model = Model::new(spec.clone(), plane.point(a, b))?;
            datasets
                .iter()
                .map(|(_, d)| model.loss(d, kind))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LandscapeGrid {
        a_values,
        b_values,
        dataset_names: datasets.iter().map(|(n, _)| n.clone()).collect(),
        losses,
    })
}

impl LandscapeGrid {
    pub fn cell(&self, ia: usize, ib: usize) -> &[f64] {
        &self.losses[ib * self.a_values.len() + ia]
    }

    /// Node indices closest to `(a, b)`.
    pub fn nearest_cell(&self, a: f64, b: f64) -> (usize, usize) {
        let near = |vals: &[f64], x: f64| {
            (0..vals.len())
                .min_by(|&i, &j| (vals[i] - x).abs().total_cmp(&(vals[j] - x).abs()))
                .unwrap_or(0)
        };
        (near(&self.a_values, a), near(&self.b_values, b))
    }

    pub fn dataset_index(&self, name: &str) -> Option<usize> {
        self.dataset_names.iter().position(|n| n == name)
    }

    /// Header `a,b,<dataset>...`, one row per node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "a,b")?;
        for n in &self.dataset_names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (ib, b) in self.b_values.iter().enumerate() {
            for (ia, a) in self.a_values.iter().enumerate() {
                write!(w, "{a},{b}")?;
                for l in self.cell(ia, ib) {
                    write!(w, ",{l}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}
