use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "regularity", version, about = "Per-sample regularity experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory, overriding `experiment.output`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Base seed, overriding `experiment.base_seed` (`dataset.seed` for gen-data).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Worker threads, overriding `experiment.workers` (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Train,
    Test,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured dataset as CSV with its ground-truth noisy ids.
    GenData,
    /// Train every model for every repetition and write traces.
    Run,
    /// Regularity report, histograms, density map and scatter plot of traces.
    Analyze {
        /// Trace files of the same samples (repetitions are averaged).
        #[arg(required = true, value_name = "TRACE")]
        traces: Vec<PathBuf>,
    },
    /// Test accuracy after pruning by each strategy at each fraction.
    PruneEval,
    /// Test accuracy after density pruning for each radius and fraction.
    RadiusSweep,
    /// Rank a classifier zoo on full and angular-bin compressed test sets.
    CompressTest,
    /// Correlate the density vectors of several runs.
    CompareRuns {
        #[arg(required = true, num_args = 2.., value_name = "RUN_DIR")]
        runs: Vec<PathBuf>,
        /// Which trace of each run to compare.
        #[arg(long, value_enum, default_value = "train")]
        role: RoleArg,
    },
    /// Count training samples synchronized with each test sample's events.
    Sync {
        #[arg(value_name = "RUN_DIR")]
        run: PathBuf,
    },
}
