//! `fdmon`: monitoring of multivariate functional data from the command
//! line. Exit codes: 0 success, 1 usage or configuration error, 2 an
//! out-of-control signal with `--fail-on-oc`, 3 numeric failure.

mod commands;
mod ingest;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdmon::error::Error;

use commands::{FitInputs, MonitorInputs, RealtimeInputs, RenderInputs};
use params::Params;

#[derive(Parser)]
#[command(name = "fdmon", version, about = "Statistical process monitoring of functional data")]
struct Cli {
    /// JSON parameter file; unknown keys are rejected.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (simulate).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Exit with status 2 when any observation is out of control.
    #[arg(long, global = true)]
    fail_on_oc: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct DataArgs {
    /// Wide CSV, one per functional covariate (`id,<arg values...>`).
    #[arg(long = "data")]
    data: Vec<PathBuf>,
    /// Long CSV (`id,arg,<variables...>`) as an alternative to --data;
    /// domain comes from the parameter file (default [0, 1]).
    #[arg(long = "long-data", conflicts_with = "data")]
    long_data: Option<PathBuf>,
    /// Wide CSV for a functional response.
    #[arg(long = "y-data")]
    y_data: Vec<PathBuf>,
    /// Scalar response CSV (`id,y`).
    #[arg(long = "y-scalar")]
    y_scalar: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the calibrated simulation scenario (or a custom dataset via
    /// the parameter file).
    Simulate,
    /// Fit a monitoring model and write a model archive.
    Fit {
        /// pca, sof, or fof.
        #[arg(long)]
        mode: String,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Monitor new observations against a fitted archive.
    Monitor {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Tuning covariate data for empirical limits.
        #[arg(long = "tuning")]
        tuning: Vec<PathBuf>,
        /// Tuning functional response (fof only).
        #[arg(long = "tuning-y")]
        tuning_y: Vec<PathBuf>,
    },
    /// Fit and monitor over a sequence of truncated domains.
    Realtime {
        /// pca, sof, or fof.
        #[arg(long)]
        mode: String,
        /// Training covariate wide CSVs.
        #[arg(long = "train", required = true)]
        train: Vec<PathBuf>,
        /// Training functional response wide CSVs (fof).
        #[arg(long = "train-y")]
        train_y: Vec<PathBuf>,
        /// Training scalar response CSV (sof).
        #[arg(long = "y-scalar")]
        y_scalar: Option<PathBuf>,
        /// New covariate wide CSVs.
        #[arg(long = "new", required = true)]
        new: Vec<PathBuf>,
        /// New functional response wide CSVs (fof).
        #[arg(long = "new-y-data")]
        new_y: Vec<PathBuf>,
        /// New scalar response CSV (sof).
        #[arg(long = "new-y-scalar")]
        new_y_scalar: Option<PathBuf>,
        /// Observation id whose statistic path is written to CSV.
        #[arg(long)]
        id: Option<String>,
    },
    /// Draw a figure as deterministic SVG.
    Render {
        /// curves, eigenfunctions, charts, contributions, monitor-overlay,
        /// beta-surface, or realtime-path.
        #[arg(long)]
        kind: String,
        #[arg(long = "input", required = true)]
        input: Vec<PathBuf>,
        /// Second data set for monitor-overlay.
        #[arg(long = "new")]
        new: Vec<PathBuf>,
        /// Observation id for contributions.
        #[arg(long)]
        id: Option<String>,
    },
}

/// Numeric breakdowns exit 3; everything else configuration (1).
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SingularSystem
        | Error::NonFiniteInput
        | Error::AllGcvNonFinite
        | Error::EigenFailure(_)
        | Error::ZeroEigenvalue(_)
        | Error::DegenerateVariable(_) => 3,
        Error::AtK { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    let params = Params::load(cli.params.as_deref())?;
    let out = cli.out.unwrap_or_else(|| PathBuf::from("."));
    match cli.cmd {
        Cmd::Simulate => commands::cmd_simulate(&params, &out, cli.seed),
        Cmd::Fit { mode, data } => {
            let inputs = FitInputs {
                data: data.data,
                long_data: data.long_data,
                y_data: data.y_data,
                y_scalar: data.y_scalar,
            };
            commands::cmd_fit(&mode, &inputs, &params, &out)
        }
        Cmd::Monitor {
            model,
            data,
            tuning,
            tuning_y,
        } => {
            let inputs = MonitorInputs {
                model,
                data: data.data,
                long_data: data.long_data,
                y_data: data.y_data,
                y_scalar: data.y_scalar,
                tuning,
                tuning_y,
            };
            commands::cmd_monitor(&inputs, &params, &out, cli.fail_on_oc)
        }
        Cmd::Realtime {
            mode,
            train,
            train_y,
            y_scalar,
            new,
            new_y,
            new_y_scalar,
            id,
        } => {
            let inputs = RealtimeInputs {
                mode,
                train,
                train_y,
                train_scalar: y_scalar,
                new,
                new_y,
                new_scalar: new_y_scalar,
                id,
            };
            commands::cmd_realtime(&inputs, &params, &out, cli.fail_on_oc)
        }
        Cmd::Render {
            kind,
            input,
            new,
            id,
        } => {
            let inputs = RenderInputs {
                kind,
                input,
                new,
                id,
            };
            commands::cmd_render(&inputs, &params, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version are success; everything else is a usage error.
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
