use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::policy::{Action, BanditPolicy, TunerRecord};
use crate::error::Result;
use crate::rehearsal::{BatchSummary, Choice, Hooks};

/// Drives [`crate::rehearsal::run_stream`] with bandit-chosen (K, P, Q).
/// Weights reset at every task start; batches without memory feedback leave
/// the policy unchanged.
pub struct TunerHooks {
    policy: BanditPolicy,
    rng: ChaCha8Rng,
    pending: Option<(Action, Vec<f64>, Vec<f64>)>,
    log: Vec<TunerRecord>,
}

impl TunerHooks {
    pub fn new(policy: BanditPolicy, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(7);
        TunerHooks {
            policy,
            rng,
            pending: None,
            log: Vec::new(),
        }
    }

    pub fn policy(&self) -> &BanditPolicy {
        &self.policy
    }

    pub fn log(&self) -> &[TunerRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<TunerRecord> {
        self.log
    }
}

impl Hooks for TunerHooks {
    fn on_task_start(&mut self, _task: usize) {
        self.policy.reset_on_task_boundary();
    }

    fn choose(&mut self, _t: u64) -> Option<Choice> {
        let action = self.policy.sample_action(&mut self.rng);
        let iter_probs = self.policy.iteration_policy().probabilities();
        let aug_probs = self.policy.aug_policy().probabilities();
        self.pending = Some((action, iter_probs, aug_probs));
        Some(Choice {
            k: action.k,
            p: action.p,
            q: action.q,
        })
    }

    fn after_batch(&mut self, summary: &BatchSummary) -> Result<()> {
        let Some((action, iter_probs, aug_probs)) = self.pending.take() else {
            return Ok(());
        };
        let Some(mem_acc) = summary.mean_memory_accuracy else {
            return Ok(());
        };
        let reward = self.policy.update(&action, mem_acc)?;
        self.log.push(TunerRecord {
            batch: summary.t,
            action,
            mem_acc,
            reward,
            iter_probs,
            aug_probs,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{AugPolicy, AugTarget, TransformOp};
    use crate::nn::{Activation, MlpSpec, Model};
    use crate::rehearsal::{run_stream, RehearsalConfig};
    use crate::stream::{make_synthetic_stream, SyntheticSpec};
    use crate::tuner::{ActionSpace, DEFAULT_LR_RL};

    #[test]
    fn tuned_run_logs_choices_and_resets_per_task() {
        let sp = SyntheticSpec {
            num_tasks: 2,
            train_per_class: 40,
            test_per_class: 10,
            input_dim: 5,
            ..SyntheticSpec::default()
        };
        let mut stream = make_synthetic_stream(&sp).unwrap();
        let model = Model::init(
            MlpSpec::new(vec![5, 8, 4], Activation::Relu).unwrap(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let cfg = RehearsalConfig {
            memory_capacity: 20,
            aug: AugPolicy::new(TransformOp::vector_ops(), 1, 14.0, AugTarget::Both).unwrap(),
            ..RehearsalConfig::default()
        };
        let policy = BanditPolicy::new(ActionSpace::default(), DEFAULT_LR_RL, 0.9).unwrap();
        let mut hooks = TunerHooks::new(policy, 3);
        let r = run_stream(&mut stream, model, &cfg, 3, &mut hooks).unwrap();
        let log = hooks.log();
        // the first batch has an empty memory and yields no feedback
        assert_eq!(log.len() as u64, r.batches - 1);
        let mut batch_ks = std::collections::BTreeMap::new();
        for rec in &r.trace {
            batch_ks.insert(rec.t, rec.k_chosen);
        }
        for rec in log {
            assert_eq!(batch_ks[&rec.batch], rec.action.k);
        }
        // the first logged batch of task 2 was drawn from uniform weights
        let first_task2 = log.iter().find(|rec| rec.batch == 8).unwrap();
        assert!(first_task2.iter_probs.iter().all(|&p| (p - 0.05).abs() < 1e-12));

        // replaying the logged updates from a fresh policy, reset at each
        // task start, reproduces every logged distribution
        let mut replay = BanditPolicy::new(ActionSpace::default(), DEFAULT_LR_RL, 0.9).unwrap();
        let mut task = 0;
        for rec in log {
            let t = (rec.batch / 8) as usize;
            if t != task {
                replay.reset_on_task_boundary();
                task = t;
            }
            assert_eq!(replay.iteration_policy().probabilities(), rec.iter_probs);
            assert_eq!(replay.aug_policy().probabilities(), rec.aug_probs);
            replay.update(&rec.action, rec.mem_acc).unwrap();
        }
    }
}
