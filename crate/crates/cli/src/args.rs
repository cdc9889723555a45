use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "haps-isac", version, about = "Beamforming and deployment design for an ISAC high-altitude platform")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every solving command.
#[derive(Debug, Clone, Args)]
pub struct RunOpts {
    /// Scenario file (TOML or JSON).
    #[arg(long, value_name = "FILE")]
    pub scenario: PathBuf,

    /// Directory that receives one fresh sub-directory per run.
    #[arg(long, value_name = "DIR", default_value = "runs")]
    pub out: PathBuf,

    /// Overrides the scenario's RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Overrides the convex solver's duality-gap tolerance.
    #[arg(long)]
    pub tol: Option<f64>,

    /// Iteration cap for both the beamforming SCA loop and the outer
    /// alternating loop.
    #[arg(long, value_name = "N")]
    pub max_iter: Option<usize>,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and print a JSON verdict.
    Validate {
        #[arg(long, value_name = "FILE")]
        scenario: PathBuf,
    },
    /// Quasi-stationary design: grid search over placements.
    SolveStatic(RunOpts),
    /// Dynamic design: trajectory and per-slot beamforming.
    SolveDynamic(RunOpts),
    /// One of the comparison schemes.
    Baseline {
        /// comm_only_static, sar_only_static, comm_only_dynamic,
        /// sar_only_dynamic, isotropic_dynamic or circle_flight.
        #[arg(long)]
        kind: String,
        #[command(flatten)]
        run: RunOpts,
    },
    /// One full solve per value of a single parameter.
    Sweep(SweepArgs),
    /// Replay finished runs and print a comparison table.
    Report {
        /// Run directories, or directories holding runs. Defaults to `runs`.
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(id = "grid", required = true, multiple = false, args = ["pmax", "gamma", "snr_min"])]
pub struct SweepArgs {
    /// Transmit power caps in watts, e.g. `2,4,6,8,10`.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub pmax: Option<Vec<f64>>,

    /// Beampattern thresholds in dBm, e.g. `-44,-48,-52`.
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub gamma: Option<Vec<f64>>,

    /// SAR SNR floors (linear).
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    pub snr_min: Option<Vec<f64>>,

    /// Sweep the dynamic design instead of the static one.
    #[arg(long)]
    pub dynamic: bool,

    /// Also solve the communication-only problem at every point.
    #[arg(long)]
    pub compare_comm_only: bool,

    #[command(flatten)]
    pub run: RunOpts,
}
