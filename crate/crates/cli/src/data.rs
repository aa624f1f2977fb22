//! `gen-data` and `run`: dataset materialization and seeded repetitions.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use sample_regularity::dataset::{LabeledDataset, Split};
use sample_regularity::fmt_num;
use sample_regularity::trace::{mean_records, MeanRecord, RegularityRecord, Role};
use sample_regularity::trainer::{train_and_trace, ModelSpec, RunBundle};

use crate::config::{ExperimentConfig, ModelConfig, TrainSection};
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, pool, write_text};

pub const TRAIN_TRACE: &str = "train.trace";
pub const TEST_TRACE: &str = "test.trace";
pub const RUN_META: &str = "run.json";

#[derive(Debug, Clone, PartialEq)]
pub struct GenDataSummary {
    pub n_samples: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_irregular: usize,
}

/// Writes `dataset.csv` (`label,f1,...,fd,split`) and `irregular.csv`
/// (ids of samples whose label was redrawn).
pub fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<GenDataSummary> {
    let ds = cfg.dataset()?;
    ensure_dir(out)?;
    ds.write_csv(out.join("dataset.csv"))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut irregular = String::from("sample_id\n");
    for id in ds.irregular_ids() {
        irregular.push_str(&format!("{id}\n"));
    }
    write_text(&out.join("irregular.csv"), &irregular)?;
    Ok(GenDataSummary {
        n_samples: ds.len(),
        n_train: ds.indices_of(Split::Train).len(),
        n_test: ds.indices_of(Split::Test).len(),
        n_irregular: ds.irregular_ids().len(),
    })
}

/// Sidecar metadata written next to each pair of traces.
#[derive(Debug, Clone, Serialize)]
struct RunMeta<'a> {
    format: &'static str,
    model: &'a str,
    hidden_widths: &'a [usize],
    activation: &'a str,
    init_scale: f64,
    repetition: usize,
    seed: u64,
    train: &'a TrainSection,
    n_train: usize,
    n_test: usize,
    final_train_acc: f64,
    final_test_acc: f64,
    epoch_train_loss: &'a [f64],
    /// Dataset row of each train-trace row.
    train_ids: &'a [usize],
    /// Dataset row of each test-trace row.
    test_ids: &'a [usize],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub model: String,
    pub repetition: usize,
    pub seed: u64,
    pub dir: PathBuf,
    pub final_train_acc: f64,
    pub final_test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub runs: Vec<RunOutcome>,
}

/// Directory of repetition `i` of `model` under an output root.
pub fn run_dir(out: &Path, model: &str, repetition: usize) -> PathBuf {
    out.join(model).join(format!("rep_{repetition}"))
}

/// Trains every configured model `repetitions` times (seed `base_seed + i`)
/// and writes, per model, the traces and metadata of each repetition plus
/// the mean regularity records across repetitions.
///
/// Everything is staged in a scratch directory inside `out` and moved into
/// place only once every run has succeeded, so a failure leaves no partial
/// results behind.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let ds = cfg.dataset()?;
    let models: Vec<(ModelConfig, ModelSpec)> = cfg
        .models()
        .into_iter()
        .map(|m| cfg.model_spec(&m).map(|s| (m, s)))
        .collect::<Result<_>>()?;
    let reps = cfg.experiment.repetitions;
    let base = cfg.experiment.base_seed;

    let created_out = !out.exists();
    ensure_dir(out)?;
    let staging = tempfile::Builder::new()
        .prefix(".staging-")
        .tempdir_in(out)
        .map_err(|e| CliError::write(out, e))?;

    let result = (|| {
        let jobs: Vec<(usize, usize)> = (0..models.len())
            .flat_map(|m| (0..reps).map(move |r| (m, r)))
            .collect();
        let records: Vec<(RunOutcome, Vec<RegularityRecord>, Vec<RegularityRecord>)> = pool(cfg.experiment.workers)?
            .install(|| {
                jobs.par_iter()
                    .map(|&(m, r)| {
                        let (mc, spec) = &models[m];
                        let seed = base.wrapping_add(r as u64);
                        let bundle = train_and_trace(&ds, spec, &cfg.train_config(seed)?)?;
                        let dir = run_dir(staging.path(), &mc.name, r);
                        write_run(&dir, &ds, mc, r, seed, &cfg.train, &bundle)?;
                        let outcome = RunOutcome {
                            model: mc.name.clone(),
                            repetition: r,
                            seed,
                            dir: run_dir(out, &mc.name, r),
                            final_train_acc: bundle.final_train_acc,
                            final_test_acc: bundle.final_test_acc,
                        };
                        Ok((
                            outcome,
                            bundle.train_trace.regularity_records(),
                            bundle.test_trace.regularity_records(),
                        ))
                    })
                    .collect::<Result<_>>()
            })?;

        for (mc, _) in &models {
            let mine: Vec<_> = records.iter().filter(|(o, _, _)| o.model == mc.name).collect();
            let train: Vec<Vec<RegularityRecord>> = mine.iter().map(|(_, t, _)| t.clone()).collect();
            let test: Vec<Vec<RegularityRecord>> = mine.iter().map(|(_, _, t)| t.clone()).collect();
            let dir = staging.path().join(&mc.name);
            write_text(&dir.join("mean_regularity_train.csv"), &mean_csv(&mean_records(&train)?))?;
            write_text(&dir.join("mean_regularity_test.csv"), &mean_csv(&mean_records(&test)?))?;
        }
        let mut effective = cfg.clone();
        effective.model = cfg.models();
        let effective = toml::to_string(&effective).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))?;
        write_text(&staging.path().join("config.toml"), &effective)?;
        Ok(records.into_iter().map(|(o, _, _)| o).collect::<Vec<_>>())
    })();

    match result {
        Ok(runs) => {
            publish(staging.path(), out)?;
            Ok(RunSummary { runs })
        }
        Err(e) => {
            drop(staging);
            if created_out {
                let _ = std::fs::remove_dir(out);
            }
            Err(e)
        }
    }
}

fn write_run(
    dir: &Path,
    ds: &LabeledDataset,
    mc: &ModelConfig,
    repetition: usize,
    seed: u64,
    train: &TrainSection,
    bundle: &RunBundle,
) -> Result<()> {
    ensure_dir(dir)?;
    let write_trace = |name: &str, trace: &sample_regularity::trace::AccuracyTrace| {
        trace
            .write_path(dir.join(name))
            .map_err(|e| CliError::Runtime(e.to_string()))
    };
    write_trace(TRAIN_TRACE, &bundle.train_trace)?;
    write_trace(TEST_TRACE, &bundle.test_trace)?;
    let train_ids = ds.indices_of(Split::Train);
    let test_ids = ds.indices_of(Split::Test);
    let meta = RunMeta {
        format: "RUN v1",
        model: &mc.name,
        hidden_widths: &mc.hidden_widths,
        activation: &mc.activation,
        init_scale: mc.init_scale,
        repetition,
        seed,
        train,
        n_train: train_ids.len(),
        n_test: test_ids.len(),
        final_train_acc: bundle.final_train_acc,
        final_test_acc: bundle.final_test_acc,
        epoch_train_loss: &bundle.epoch_train_loss,
        train_ids: &train_ids,
        test_ids: &test_ids,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(&dir.join(RUN_META), &(json + "\n"))
}

/// Moves every staged entry into `out`, replacing earlier results of the
/// same name.
fn publish(staging: &Path, out: &Path) -> Result<()> {
    let entries = std::fs::read_dir(staging).map_err(|e| CliError::write(staging, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::write(staging, e))?;
        let target = out.join(entry.file_name());
        if target.is_dir() {
            std::fs::remove_dir_all(&target).map_err(|e| CliError::write(&target, e))?;
        } else if target.exists() {
            std::fs::remove_file(&target).map_err(|e| CliError::write(&target, e))?;
        }
        std::fs::rename(entry.path(), &target).map_err(|e| CliError::write(&target, e))?;
    }
    Ok(())
}

/// `sample_id,cumulative_loss,event_count` with real-valued means.
pub fn mean_csv(records: &[MeanRecord]) -> String {
    let mut s = String::from("sample_id,cumulative_loss,event_count\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{}\n",
            r.sample_id,
            fmt_num(r.cumulative_loss),
            fmt_num(r.event_count)
        ));
    }
    s
}

/// `sample_id,cumulative_loss,event_count` for a single trace.
pub fn records_csv(records: &[RegularityRecord]) -> String {
    let mut s = String::from("sample_id,cumulative_loss,event_count\n");
    for r in records {
        s.push_str(&format!("{},{},{}\n", r.sample_id, r.cumulative_loss, r.event_count));
    }
    s
}

/// Path of a run directory's trace for `role`.
pub fn trace_path(run_dir: &Path, role: Role) -> PathBuf {
    run_dir.join(match role {
        Role::Train => TRAIN_TRACE,
        Role::Test => TEST_TRACE,
    })
}
