//! `analyze`: regularity report, histograms, density map and scatter plot
//! for one or more traces of the same samples.

use std::path::{Path, PathBuf};

use sample_regularity::density::{axis_ranges, default_radius, density_csv, density_map, RepresentationPoint};
use sample_regularity::stats::histogram;
use sample_regularity::trace::{mean_records, AccuracyTrace, RegularityRecord, Role};

use crate::config::AnalysisConfig;
use crate::data::{mean_csv, records_csv};
use crate::error::{at, CliError, Result};
use crate::output::{ensure_dir, write_text};
use crate::svg;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeSummary {
    pub role: Role,
    pub n_samples: usize,
    pub n_traces: usize,
    pub radius: f64,
}

/// Reads traces that must agree on role and sample count. With several
/// traces (repetitions) the report and density use per-sample means and
/// the histograms pool every run's counts.
pub fn load_traces(paths: &[PathBuf]) -> Result<Vec<AccuracyTrace>> {
    let traces: Vec<AccuracyTrace> = paths
        .iter()
        .map(|p| AccuracyTrace::read_path(p).map_err(at(p)))
        .collect::<Result<_>>()?;
    if let Some(first) = traces.first() {
        for (t, p) in traces.iter().zip(paths).skip(1) {
            if t.role() != first.role() || t.n_samples() != first.n_samples() {
                return Err(CliError::Data(format!(
                    "{} holds {} {} samples but {} holds {} {} samples",
                    p.display(),
                    t.n_samples(),
                    t.role(),
                    paths[0].display(),
                    first.n_samples(),
                    first.role()
                )));
            }
        }
    }
    Ok(traces)
}

/// Radius from the configuration, or derived from the axis ranges; a
/// representation with no spread at all falls back to 1.
pub fn pick_radius(configured: Option<f64>, points: &[RepresentationPoint]) -> f64 {
    configured.unwrap_or_else(|| {
        let (xr, yr) = axis_ranges(points);
        default_radius(xr, yr).unwrap_or(1.0)
    })
}

pub fn analyze(paths: &[PathBuf], analysis: &AnalysisConfig, out: &Path) -> Result<AnalyzeSummary> {
    if paths.is_empty() {
        return Err(CliError::Config("analyze needs at least one trace file".into()));
    }
    let traces = load_traces(paths)?;
    let runs: Vec<Vec<RegularityRecord>> = traces.iter().map(AccuracyTrace::regularity_records).collect();
    let (report, points): (String, Vec<RepresentationPoint>) = if runs.len() == 1 {
        (records_csv(&runs[0]), runs[0].iter().map(Into::into).collect())
    } else {
        let mean = mean_records(&runs)?;
        (mean_csv(&mean), mean.iter().map(Into::into).collect())
    };
    let n_samples = points.len();
    ensure_dir(out)?;
    write_text(&out.join("regularity.csv"), &report)?;

    let pooled: Vec<&RegularityRecord> = runs.iter().flatten().collect();
    let losses: Vec<usize> = pooled.iter().map(|r| r.cumulative_loss).collect();
    let events: Vec<usize> = pooled.iter().map(|r| r.event_count).collect();
    let mut hist = String::from("measure,bin_lo,bin_hi,count\n");
    for (name, values, width) in [
        ("cumulative_loss", &losses, analysis.loss_bin_width),
        ("event_count", &events, analysis.event_bin_width),
    ] {
        let h = histogram(values, width)?;
        for ((lo, hi), c) in h.edges().into_iter().zip(&h.counts) {
            hist.push_str(&format!("{name},{lo},{hi},{c}\n"));
        }
    }
    write_text(&out.join("histograms.csv"), &hist)?;

    let role = traces[0].role();
    let radius = pick_radius(analysis.radius, &points);
    let map = density_map(&points, radius)?;
    write_text(&out.join("density.csv"), &density_csv(&points, &map))?;
    let y_label = match role {
        Role::Train => "forgetting events",
        Role::Test => "mal-generalizing events",
    };
    write_text(
        &out.join("scatter.svg"),
        &svg::scatter(&points, &map.values, "cumulative binary loss", y_label),
    )?;
    Ok(AnalyzeSummary { role, n_samples, n_traces: traces.len(), radius })
}
