use rand::Rng;

use crate::error::{Error, Result};

/// Softmax policy over a fixed set of arms: `pi(a_i) = exp(w_i) / sum_k exp(w_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxArms {
    weights: Vec<f64>,
}

impl SoftmaxArms {
    pub fn uniform(n: usize) -> Self {
        SoftmaxArms { weights: vec![0.0; n] }
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::contract("softmax weights must be finite and nonempty"));
        }
        Ok(SoftmaxArms { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let m = self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.weights.iter().map(|w| (w - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    }

    /// Probability mass on `set`.
    pub fn mass(&self, set: &[usize]) -> f64 {
        let p = self.probabilities();
        set.iter().map(|&i| p[i]).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let p = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                return i;
            }
        }
        p.len() - 1
    }

    /// `d/dw_j log(sum_{k in set} pi_k) = pi_j [j in set] / S - pi_j`.
    /// An empty set contributes the zero vector.
    pub fn log_mass_gradient(&self, set: &[usize]) -> Vec<f64> {
        if set.is_empty() {
            return vec![0.0; self.weights.len()];
        }
        let p = self.probabilities();
        let s: f64 = set.iter().map(|&i| p[i]).sum();
        let mut g: Vec<f64> = p.iter().map(|pi| -pi).collect();
        for &i in set {
            g[i] += p[i] / s;
        }
        g
    }

    /// Bootstrapped policy gradient step
    /// `w += lr * |r| * (grad log pi+(a) - grad log pi-(a))`.
    pub fn bpg_update(&mut self, reward: f64, better: &[usize], worse: &[usize], lr: f64) -> Result<()> {
        let n = self.weights.len();
        if let Some(&i) = better.iter().chain(worse).find(|&&i| i >= n) {
            return Err(Error::contract(format!("arm {i} outside the {n}-arm policy")));
        }
        if better.iter().any(|i| worse.contains(i)) {
            return Err(Error::contract("better and worse action sets overlap"));
        }
        let scale = lr * reward.abs();
        if scale == 0.0 {
            return Ok(());
        }
        let gp = self.log_mass_gradient(better);
        let gm = self.log_mass_gradient(worse);
        for ((w, a), b) in self.weights.iter_mut().zip(&gp).zip(&gm) {
            *w += scale * (a - b);
        }
        Ok(())
    }

    pub fn reset(&mut self) {
        self.weights.iter_mut().for_each(|w| *w = 0.0);
    }
}
