//! `compare-runs` and `sync`.

use std::path::{Path, PathBuf};

use sample_regularity::density::{density_map, normalized_density_vector, points_from_records, RepresentationPoint};
use sample_regularity::fmt_num;
use sample_regularity::stats::{run_correlation, synchronization_counts, RunCorrelationMatrix, SyncMode};
use sample_regularity::trace::{AccuracyTrace, Role};

use crate::analyze::{load_traces, pick_radius};
use crate::data::trace_path;
use crate::error::{at, Result};
use crate::output::write_text;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSummary {
    pub run_ids: Vec<String>,
    pub radius: f64,
    pub matrix: RunCorrelationMatrix,
}

fn run_id(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .filter(|n| !n.is_empty())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Pearson correlation of the runs' normalized density vectors. All runs use
/// one radius: the configured one, or the one derived from the pooled
/// representation of every run.
pub fn compare_runs(dirs: &[PathBuf], role: Role, radius: Option<f64>, out: &Path) -> Result<CompareSummary> {
    let paths: Vec<PathBuf> = dirs.iter().map(|d| trace_path(d, role)).collect();
    let traces = load_traces(&paths)?;
    let points: Vec<Vec<RepresentationPoint>> = traces
        .iter()
        .map(|t| points_from_records(&t.regularity_records()))
        .collect();
    let pooled: Vec<RepresentationPoint> = points.iter().flatten().copied().collect();
    let radius = pick_radius(radius, &pooled);
    let vectors: Vec<Vec<f64>> = points
        .iter()
        .map(|p| normalized_density_vector(&density_map(p, radius)?))
        .collect::<sample_regularity::Result<_>>()?;
    let matrix = run_correlation(&vectors)?;
    let run_ids: Vec<String> = dirs.iter().map(|d| run_id(d)).collect();

    let mut csv = String::from("run");
    for id in &run_ids {
        csv.push(',');
        csv.push_str(id);
    }
    csv.push('\n');
    for (i, id) in run_ids.iter().enumerate() {
        csv.push_str(id);
        for j in 0..matrix.n_runs {
            csv.push(',');
            csv.push_str(&fmt_num(matrix.get(i, j)));
        }
        csv.push('\n');
    }
    write_text(&out.join("correlation.csv"), &csv)?;
    write_text(
        &out.join("correlation_summary.csv"),
        &format!(
            "n_runs,radius,off_diagonal_mean\n{},{},{}\n",
            matrix.n_runs,
            fmt_num(radius),
            fmt_num(matrix.off_diagonal_mean())
        ),
    )?;
    Ok(CompareSummary { run_ids, radius, matrix })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncSummary {
    pub count_identical: Vec<usize>,
    pub count_shared: Vec<usize>,
}

/// For every test sample, how many training samples forget at the same
/// epochs it mal-generalizes (identical event sets) and at any one of them.
pub fn sync(dir: &Path, out: &Path) -> Result<SyncSummary> {
    let train_path = trace_path(dir, Role::Train);
    let test_path = trace_path(dir, Role::Test);
    let train = AccuracyTrace::read_path(&train_path).map_err(at(&train_path))?;
    let test = AccuracyTrace::read_path(&test_path).map_err(at(&test_path))?;
    let count_identical = synchronization_counts(&test, &train, SyncMode::IdenticalSets)?;
    let count_shared = synchronization_counts(&test, &train, SyncMode::SharedEpoch)?;
    let mut csv = String::from("test_id,count_identical,count_shared\n");
    for (i, (a, b)) in count_identical.iter().zip(&count_shared).enumerate() {
        csv.push_str(&format!("{i},{a},{b}\n"));
    }
    write_text(&out.join("sync.csv"), &csv)?;
    Ok(SyncSummary { count_identical, count_shared })
}
