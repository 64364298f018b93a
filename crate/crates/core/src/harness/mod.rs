//! Configuration files, run orchestration, artifacts and the CLI entry
//! points.

mod config;
mod landscape;
mod run;
mod sweep;
mod trace;
mod verify;

pub use config::{
    parse_pq_list, parse_usize_list, ModelSection, OutputSection, RunConfig, StreamSection, StreamSource, TunerSection,
    SEED_ENV,
};
pub use landscape::{
    cli_landscape, landscape_experiment, write_landscape, Anchor, LandscapeOutcome, LandscapeSummary, TASK1_MEMORY,
    TASK1_TEST, TASK1_TRAIN, TASK2_TEST,
};
pub use run::{cli_run, execute, execute_on, initial_model, write_run, RunManifest, RunOutput};
pub use sweep::{apply_point, cli_sweep, make_grid, sweep, write_sweep_csv, GridPoint, SweepEntry};
pub use trace::{cli_trace, parse_trace_csv, summary_csv};
pub use verify::{
    cli_verify, metric_fixtures, named_group, random_accuracy_matrix, reservoir_inclusion, MetricFixture,
    VerifyOptions, VerifyReport, GRADIENT_TOLERANCE, VERIFY_KINDS,
};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Usage(_) => EXIT_USAGE,
        _ => EXIT_INTERNAL,
    }
}
