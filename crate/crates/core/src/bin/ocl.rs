use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ocl_core::analysis::VerdictStatus;
use ocl_core::harness::{
    cli_landscape, cli_run, cli_sweep, cli_trace, cli_verify, exit_code, make_grid, parse_pq_list, parse_usize_list,
    summary_csv, write_sweep_csv, VerifyOptions, EXIT_OK, EXIT_VERIFY_FAILED,
};
use ocl_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ocl",
    version,
    about = "Online continual learning with repeated augmented rehearsal"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the configured stream and write a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replaces `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `section.key=value` overrides.
        overrides: Vec<String>,
    },
    /// Rank (K, P, Q) grid points on a validation prefix of the stream.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Iteration counts, e.g. `1,10` or `1-5`.
        #[arg(long, default_value = "1,10")]
        k: String,
        /// Augmentation pairs `P:Q`, e.g. `1:5,1:14`. Empty keeps the config.
        #[arg(long, default_value = "")]
        pq: String,
        #[arg(long, default_value_t = 2)]
        validation_tasks: usize,
        /// Passes over each validation task.
        #[arg(long, default_value_t = 1)]
        epochs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        overrides: Vec<String>,
    },
    /// Run a verification suite and print a JSON verdict.
    Verify(VerifyArgs),
    /// Train w1, w2 and w2ft and evaluate losses on their plane.
    Landscape {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = ocl_core::analysis::DEFAULT_RESOLUTION)]
        resolution: usize,
        overrides: Vec<String>,
    },
    /// Per-iteration means of a run's trace.
    Trace { run_dir: PathBuf },
}

#[derive(Args)]
struct VerifyArgs {
    /// prop1, prop2, prop3, reservoir, gradients or metrics.
    kind: String,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, default_value_t = 6)]
    dt: usize,
    #[arg(long, default_value_t = 3)]
    dm: usize,
    #[arg(long)]
    n_past: Option<u64>,
    #[arg(long)]
    absorbed: Option<usize>,
    #[arg(long, default_value = "flip")]
    group: String,
    #[arg(long, default_value_t = 4)]
    side: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    models: usize,
    #[arg(long, default_value_t = 1000)]
    matrices: usize,
}

fn list<T>(s: &str, f: fn(&str) -> std::result::Result<T, String>) -> Result<T> {
    f(s).map_err(Error::Usage)
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run { config, out, overrides } => {
            let (dir, manifest) = cli_run(&config, &overrides, out)?;
            println!("{} {}", dir.display(), manifest.config_hash);
        }
        Command::Sweep {
            config,
            k,
            pq,
            validation_tasks,
            epochs,
            out,
            overrides,
        } => {
            let grid = make_grid(&list(&k, parse_usize_list)?, &list(&pq, parse_pq_list)?);
            let entries = cli_sweep(&config, &overrides, &grid, validation_tasks, epochs, out.as_deref())?;
            let mut stdout = std::io::stdout().lock();
            write_sweep_csv(&entries, &mut stdout).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })?;
        }
        Command::Verify(a) => {
            let opts = VerifyOptions {
                trials: a.trials,
                seed: a.seed,
                tolerance: a.tolerance,
                dt: a.dt,
                dm: a.dm,
                n_past: a.n_past,
                absorbed: a.absorbed,
                group: a.group,
                side: a.side,
                m: a.m,
                n: a.n,
                models: a.models,
                matrices: a.matrices,
            };
            let report = cli_verify(&a.kind, &opts)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.status != VerdictStatus::Pass {
                return Ok(EXIT_VERIFY_FAILED);
            }
        }
        Command::Landscape {
            config,
            out,
            resolution,
            overrides,
        } => {
            let summary = cli_landscape(&config, &overrides, &out, resolution)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Trace { run_dir } => {
            print!("{}", summary_csv(&cli_trace(&run_dir)?));
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
