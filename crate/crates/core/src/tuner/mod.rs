//! Online (K, P, Q) selection with a bootstrapped policy gradient bandit.

mod bandit;
mod hook;
mod policy;

pub use bandit::SoftmaxArms;
pub use hook::TunerHooks;
pub use policy::{
    aug_action_sets, iteration_action_sets, write_tuner_csv, Action, ActionSets, ActionSpace, AugArm, BanditPolicy,
    TunerRecord, DEFAULT_LR_RL, DEFAULT_TARGET_ACC,
};
