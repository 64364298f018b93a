use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{Batch, LossKind};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::contract(format!("unknown activation `{other}`"))),
        }
    }
}

/// Architecture of a dense network. Hidden layers use `activation`; the last
/// layer is linear and produces logits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::contract(format!(
                "an MLP needs at least two layer sizes, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::contract(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        Ok(MlpSpec {
            layer_sizes,
            activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Total parameter count: for each layer, `out*in` weights then `out` biases.
    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// Per layer: (weight offset, bias offset, fan_in, fan_out).
    fn layout(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weights = offset;
                let biases = weights + fan_in * fan_out;
                offset = biases + fan_out;
                (weights, biases, fan_in, fan_out)
            })
            .collect()
    }

    /// `2,4,3` form used by checkpoints and configs.
    pub fn sizes_string(&self) -> String {
        self.layer_sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// A network: architecture plus one flat parameter vector.
///
/// Layout, per layer in order: the `out x in` weight matrix row-major, then
/// the `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    spec: MlpSpec,
    params: Vec<f64>,
}

impl Model {
    pub fn new(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        if params.len() != spec.param_count() {
            return Err(Error::contract(format!(
                "spec {} needs {} parameters, got {}",
                spec.sizes_string(),
                spec.param_count(),
                params.len()
            )));
        }
        Ok(Model { spec, params })
    }

    pub fn zeros(spec: MlpSpec) -> Self {
        let n = spec.param_count();
        Model {
            spec,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights `U(-s, s)`, `s = sqrt(6 / (fan_in + fan_out))`,
    /// and zero biases.
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let mut params = vec![0.0; spec.param_count()];
        for (w, b, fan_in, fan_out) in spec.layout() {
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[w..b] {
                *p = rng.random_range(-s..s);
            }
        }
        Model { spec, params }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::contract(format!(
                "parameter length {} does not match model ({})",
                params.len(),
                self.params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    /// Same architecture, different parameters.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Model> {
        Model::new(self.spec.clone(), params)
    }

    fn check_inputs(&self, inputs: &Tensor) -> Result<()> {
        if inputs.shape().len() != 2 || inputs.cols() != self.spec.input_size() {
            return Err(Error::contract(format!(
                "expected inputs of shape [n, {}], got {:?}",
                self.spec.input_size(),
                inputs.shape()
            )));
        }
        Ok(())
    }

    /// Activations of every layer; element 0 is the input. The final entry
    /// holds the logits.
    fn activations(&self, inputs: &Tensor) -> Result<Vec<Vec<f64>>> {
        self.check_inputs(inputs)?;
        let n = inputs.rows();
        let layout = self.spec.layout();
        let last = layout.len() - 1;
        let mut acts = Vec::with_capacity(layout.len() + 1);
        acts.push(inputs.data().to_vec());
        for (l, &(w, b, fan_in, fan_out)) in layout.iter().enumerate() {
            let prev = &acts[l];
            let weights = &self.params[w..b];
            let biases = &self.params[b..b + fan_out];
            let mut out = vec![0.0; n * fan_out];
            for r in 0..n {
                let x = &prev[r * fan_in..(r + 1) * fan_in];
                let y = &mut out[r * fan_out..(r + 1) * fan_out];
                for (o, yo) in y.iter_mut().enumerate() {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    let z = biases[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                    *yo = if l == last { z } else { self.spec.activation.apply(z) };
                }
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: l,
                    stage: "forward",
                });
            }
            acts.push(out);
        }
        Ok(acts)
    }

    /// Logits, one row per input row.
    pub fn forward(&self, inputs: &Tensor) -> Result<Tensor> {
        let n = inputs.rows();
        let logits = self.activations(inputs)?.pop().unwrap();
        Tensor::new(vec![n, self.spec.output_size()], logits)
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::precondition("loss requested on an empty batch"));
        }
        let classes = self.spec.output_size();
        if let Some(&bad) = batch.labels().iter().find(|&&y| y >= classes) {
            return Err(Error::precondition(format!("label {bad} outside [0, {classes})")));
        }
        Ok(())
    }

    /// Per-sample losses (no batch averaging).
    pub fn per_sample_losses(&self, batch: &Batch, kind: LossKind) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        let logits = self.activations(batch.inputs())?.pop().unwrap();
        let c = self.spec.output_size();
        (0..batch.len())
            .map(|i| kind.sample_loss(&logits[i * c..(i + 1) * c], batch, i))
            .collect()
    }

    pub fn loss(&self, batch: &Batch, kind: LossKind) -> Result<f64> {
        let losses = self.per_sample_losses(batch, kind)?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// Mean loss over the batch and its gradient with respect to `params`.
    pub fn loss_and_grad(&self, batch: &Batch, kind: LossKind) -> Result<(f64, Vec<f64>)> {
        self.check_batch(batch)?;
        let acts = self.activations(batch.inputs())?;
        let n = batch.len();
        let c = self.spec.output_size();
        let scale = 1.0 / n as f64;

        let logits = acts.last().unwrap();
        let mut loss = 0.0;
        let mut delta = vec![0.0; n * c];
        for i in 0..n {
            let z = &logits[i * c..(i + 1) * c];
            loss += kind.sample_loss(z, batch, i)?;
            kind.logit_grad(z, batch, i, scale, &mut delta[i * c..(i + 1) * c])?;
        }
        loss *= scale;

        let mut grad = vec![0.0; self.params.len()];
        let layout = self.spec.layout();
        for (l, &(w, b, fan_in, fan_out)) in layout.iter().enumerate().rev() {
            let input = &acts[l];
            {
                let (gw, gb) = grad[w..b + fan_out].split_at_mut(b - w);
                for r in 0..n {
                    let d = &delta[r * fan_out..(r + 1) * fan_out];
                    let x = &input[r * fan_in..(r + 1) * fan_in];
                    for (o, &dv) in d.iter().enumerate() {
                        gb[o] += dv;
                        if dv != 0.0 {
                            for (g, xv) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(x) {
                                *g += dv * xv;
                            }
                        }
                    }
                }
            }
            if l > 0 {
                let weights = &self.params[w..b];
                let mut prev = vec![0.0; n * fan_in];
                for r in 0..n {
                    let d = &delta[r * fan_out..(r + 1) * fan_out];
                    let p = &mut prev[r * fan_in..(r + 1) * fan_in];
                    for (o, &dv) in d.iter().enumerate() {
                        if dv != 0.0 {
                            for (pv, wv) in p.iter_mut().zip(&weights[o * fan_in..(o + 1) * fan_in]) {
                                *pv += wv * dv;
                            }
                        }
                    }
                    let a = &input[r * fan_in..(r + 1) * fan_in];
                    for (pv, &av) in p.iter_mut().zip(a) {
                        *pv *= self.spec.activation.derivative_from_output(av);
                    }
                }
                delta = prev;
            }
            if grad[w..b + fan_out].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: l,
                    stage: "backward",
                });
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                layer: layout.len() - 1,
                stage: "loss",
            });
        }
        Ok((loss, grad))
    }

    /// Fraction of rows whose arg-max logit equals the label.
    pub fn accuracy(&self, inputs: &Tensor, labels: &[usize]) -> Result<f64> {
        if inputs.rows() != labels.len() {
            return Err(Error::contract(format!(
                "{} input rows but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::precondition("accuracy of an empty set"));
        }
        let logits = self.forward(inputs)?;
        let correct = labels
            .iter()
            .enumerate()
            .filter(|&(i, &y)| argmax(logits.row(i)) == y)
            .count();
        Ok(correct as f64 / labels.len() as f64)
    }

    pub fn predict(&self, inputs: &Tensor) -> Result<Vec<usize>> {
        let logits = self.forward(inputs)?;
        Ok((0..logits.rows()).map(|i| argmax(logits.row(i))).collect())
    }
}

/// First index of the maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// `params - lr * grad`, elementwise.
pub fn sgd_step(params: &[f64], grad: &[f64], lr: f64) -> Result<Vec<f64>> {
    if params.len() != grad.len() {
        return Err(Error::contract(format!(
            "sgd_step: params length {} vs grad length {}",
            params.len(),
            grad.len()
        )));
    }
    Ok(params.iter().zip(grad).map(|(p, g)| p - lr * g).collect())
}
