//! Command-line orchestration of regularity experiments: seeded training
//! repetitions with trace files, analysis reports, pruning and compression
//! experiments, and cross-run comparisons.

pub mod analyze;
pub mod args;
pub mod compare;
pub mod config;
pub mod data;
mod error;
pub mod experiments;
mod output;
mod svg;

pub use error::{CliError, Result};

use args::{Cli, Command, GlobalArgs, RoleArg};
use config::ExperimentConfig;
use sample_regularity::fmt_num;
use sample_regularity::trace::Role;

/// The configuration file with command-line overrides applied.
pub fn resolve_config(global: &GlobalArgs, command: &Command) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = global.seed {
        match command {
            Command::GenData => cfg.dataset.seed = seed,
            _ => cfg.experiment.base_seed = seed,
        }
    }
    if let Some(w) = global.workers {
        cfg.experiment.workers = w;
    }
    if let Some(out) = &global.out {
        cfg.experiment.output = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one subcommand and returns the lines to print on success.
pub fn execute(cli: &Cli) -> Result<Vec<String>> {
    let cfg = resolve_config(&cli.global, &cli.command)?;
    let out = cfg.experiment.output.clone();
    let lines = match &cli.command {
        Command::GenData => {
            let s = data::gen_data(&cfg, &out)?;
            vec![format!(
                "wrote {} samples ({} train, {} test, {} relabeled) to {}",
                s.n_samples,
                s.n_train,
                s.n_test,
                s.n_irregular,
                out.display()
            )]
        }
        Command::Run => {
            let s = data::run(&cfg, &out)?;
            s.runs
                .iter()
                .map(|r| {
                    format!(
                        "{} rep {} seed {}: train acc {} test acc {} -> {}",
                        r.model,
                        r.repetition,
                        r.seed,
                        fmt_num(r.final_train_acc),
                        fmt_num(r.final_test_acc),
                        r.dir.display()
                    )
                })
                .collect()
        }
        Command::Analyze { traces } => {
            let s = analyze::analyze(traces, &cfg.analysis, &out)?;
            vec![format!(
                "analyzed {} {} samples from {} trace(s), density radius {} -> {}",
                s.n_samples,
                s.role,
                s.n_traces,
                fmt_num(s.radius),
                out.display()
            )]
        }
        Command::PruneEval => {
            let t = experiments::prune_eval(&cfg, &out)?;
            t.to_csv().lines().map(str::to_string).collect()
        }
        Command::RadiusSweep => {
            let t = experiments::radius_sweep(&cfg, &out)?;
            t.to_csv().lines().map(str::to_string).collect()
        }
        Command::CompressTest => {
            let r = experiments::compress_test(&cfg, &out)?;
            r.fidelity_csv().lines().map(str::to_string).collect()
        }
        Command::CompareRuns { runs, role } => {
            let role = match role {
                RoleArg::Train => Role::Train,
                RoleArg::Test => Role::Test,
            };
            let s = compare::compare_runs(runs, role, cfg.analysis.radius, &out)?;
            vec![format!(
                "{} runs, radius {}, off-diagonal mean correlation {}",
                s.matrix.n_runs,
                fmt_num(s.radius),
                fmt_num(s.matrix.off_diagonal_mean())
            )]
        }
        Command::Sync { run } => {
            let s = compare::sync(run, &out)?;
            let synced = s.count_shared.iter().filter(|&&c| c > 0).count();
            vec![format!(
                "{} of {} test samples share an event epoch with some training sample",
                synced,
                s.count_shared.len()
            )]
        }
    };
    Ok(lines)
}
