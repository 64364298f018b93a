//! Experience replay, repeated rehearsal and repeated augmented rehearsal.

mod config;
mod run;
mod step;

pub use config::{RehearsalConfig, DEFAULT_INCOMING_BATCH, DEFAULT_K, DEFAULT_LR};
pub use run::{accuracy_on, run_stream, Hooks, Learner, MemoryGap, NoHooks, RunResult};
pub use step::{
    der_memory_loss, er_iteration, rar_step, write_trace_csv, BatchSummary, Choice, TraceRecord, TrainState,
};
