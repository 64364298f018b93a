use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bandit::SoftmaxArms;
use crate::error::{Error, Result};

pub const DEFAULT_TARGET_ACC: f64 = 0.9;
pub const DEFAULT_LR_RL: f64 = 0.5;

/// Augmentation arm: `p` ops at magnitude `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugArm {
    pub p: usize,
    pub q: f64,
}

/// Candidate K values and (P, Q) pairs. Aug arms are listed weakest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    iteration_arms: Vec<usize>,
    aug_arms: Vec<AugArm>,
}

impl ActionSpace {
    pub fn new(iteration_arms: Vec<usize>, aug_arms: Vec<AugArm>) -> Result<Self> {
        if iteration_arms.is_empty() || aug_arms.is_empty() {
            return Err(Error::contract("action space needs at least one arm of each kind"));
        }
        if iteration_arms.contains(&0) {
            return Err(Error::contract("iteration arms must be at least 1"));
        }
        let mut sorted = iteration_arms.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != iteration_arms.len() {
            return Err(Error::contract("iteration arms must be distinct"));
        }
        for w in aug_arms.windows(2) {
            if strength(w[0]) >= strength(w[1]) {
                return Err(Error::contract(format!(
                    "aug arms must be strictly increasing in strength: ({}, {}) then ({}, {})",
                    w[0].p, w[0].q, w[1].p, w[1].q
                )));
            }
        }
        Ok(ActionSpace {
            iteration_arms,
            aug_arms,
        })
    }

    pub fn iteration_arms(&self) -> &[usize] {
        &self.iteration_arms
    }

    pub fn aug_arms(&self) -> &[AugArm] {
        &self.aug_arms
    }
}

impl Default for ActionSpace {
    /// K in 1..=20; (P, Q) in (1,5), (1,14), (2,14), (3,14), (4,14).
    fn default() -> Self {
        let aug = [(1, 5.0), (1, 14.0), (2, 14.0), (3, 14.0), (4, 14.0)]
            .into_iter()
            .map(|(p, q)| AugArm { p, q })
            .collect();
        ActionSpace::new((1..=20).collect(), aug).expect("default action space is valid")
    }
}

/// Lexicographic strength: more ops first, then larger magnitude.
fn strength(a: AugArm) -> (usize, f64) {
    (a.p, a.q)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActionSets {
    pub better: Vec<usize>,
    pub worse: Vec<usize>,
}

/// Better and worse iteration arms (indices) given the chosen arm's memory accuracy.
pub fn iteration_action_sets(space: &ActionSpace, chosen: usize, a_m: f64, target: f64) -> Result<ActionSets> {
    let arms = &space.iteration_arms;
    let k = *arms
        .get(chosen)
        .ok_or_else(|| Error::contract(format!("iteration arm {chosen} outside the action space")))?;
    let smaller: Vec<usize> = (0..arms.len()).filter(|&i| arms[i] < k).collect();
    let larger: Vec<usize> = (0..arms.len()).filter(|&i| arms[i] > k).collect();
    Ok(split(a_m, target, chosen, arms.len(), smaller, larger))
}

/// Better and worse aug arms: overfitting memory calls for stronger augmentation.
pub fn aug_action_sets(space: &ActionSpace, chosen: usize, a_m: f64, target: f64) -> Result<ActionSets> {
    let n = space.aug_arms.len();
    if chosen >= n {
        return Err(Error::contract(format!("aug arm {chosen} outside the action space")));
    }
    let stronger: Vec<usize> = (chosen + 1..n).collect();
    let weaker: Vec<usize> = (0..chosen).collect();
    Ok(split(a_m, target, chosen, n, stronger, weaker))
}

fn split(a_m: f64, target: f64, chosen: usize, n: usize, if_over: Vec<usize>, if_under: Vec<usize>) -> ActionSets {
    if a_m > target {
        ActionSets {
            better: if_over,
            worse: if_under,
        }
    } else if a_m < target {
        ActionSets {
            better: if_under,
            worse: if_over,
        }
    } else {
        ActionSets {
            better: Vec::new(),
            worse: (0..n).filter(|&i| i != chosen).collect(),
        }
    }
}

/// One draw from both policies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    pub iter_arm: usize,
    pub aug_arm: usize,
    pub k: usize,
    pub p: usize,
    pub q: f64,
}

/// One logged tuner step.
#[derive(Clone, Debug, PartialEq)]
pub struct TunerRecord {
    pub batch: u64,
    pub action: Action,
    pub mem_acc: f64,
    pub reward: f64,
    pub iter_probs: Vec<f64>,
    pub aug_probs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BanditPolicy {
    space: ActionSpace,
    w_iter: SoftmaxArms,
    w_aug: SoftmaxArms,
    lr_rl: f64,
    target_acc: f64,
}

impl BanditPolicy {
    pub fn new(space: ActionSpace, lr_rl: f64, target_acc: f64) -> Result<Self> {
        if !(lr_rl > 0.0 && lr_rl.is_finite()) {
            return Err(Error::contract(format!("lr_rl must be positive, got {lr_rl}")));
        }
        if !(target_acc > 0.0 && target_acc < 1.0) {
            return Err(Error::contract(format!(
                "target accuracy must lie in (0, 1), got {target_acc}"
            )));
        }
        Ok(BanditPolicy {
            w_iter: SoftmaxArms::uniform(space.iteration_arms.len()),
            w_aug: SoftmaxArms::uniform(space.aug_arms.len()),
            space,
            lr_rl,
            target_acc,
        })
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn iteration_policy(&self) -> &SoftmaxArms {
        &self.w_iter
    }

    pub fn aug_policy(&self) -> &SoftmaxArms {
        &self.w_aug
    }

    pub fn lr_rl(&self) -> f64 {
        self.lr_rl
    }

    pub fn target_acc(&self) -> f64 {
        self.target_acc
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        let iter_arm = self.w_iter.sample(rng);
        let aug_arm = self.w_aug.sample(rng);
        let aug = self.space.aug_arms[aug_arm];
        Action {
            iter_arm,
            aug_arm,
            k: self.space.iteration_arms[iter_arm],
            p: aug.p,
            q: aug.q,
        }
    }

    /// Reward `|A_M - A*|` followed by one BPG step on each policy.
    /// Returns the reward.
    pub fn update(&mut self, action: &Action, mem_acc: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&mem_acc) {
            return Err(Error::contract(format!("memory accuracy {mem_acc} outside [0, 1]")));
        }
        let r = (mem_acc - self.target_acc).abs();
        let it = iteration_action_sets(&self.space, action.iter_arm, mem_acc, self.target_acc)?;
        let au = aug_action_sets(&self.space, action.aug_arm, mem_acc, self.target_acc)?;
        self.w_iter.bpg_update(r, &it.better, &it.worse, self.lr_rl)?;
        self.w_aug.bpg_update(r, &au.better, &au.worse, self.lr_rl)?;
        Ok(r)
    }

    pub fn reset_on_task_boundary(&mut self) {
        self.w_iter.reset();
        self.w_aug.reset();
    }
}

pub fn write_tuner_csv<W: Write>(records: &[TunerRecord], space: &ActionSpace, mut w: W) -> std::io::Result<()> {
    write!(w, "batch,k,p,q,mem_acc,reward")?;
    for k in space.iteration_arms() {
        write!(w, ",pi_k{k}")?;
    }
    for a in space.aug_arms() {
        write!(w, ",pi_p{}_q{}", a.p, a.q)?;
    }
    writeln!(w)?;
    for r in records {
        write!(
            w,
            "{},{},{},{},{},{}",
            r.batch, r.action.k, r.action.p, r.action.q, r.mem_acc, r.reward
        )?;
        for p in r.iter_probs.iter().chain(&r.aug_probs) {
            write!(w, ",{p}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
