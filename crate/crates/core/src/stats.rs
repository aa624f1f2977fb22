//! Correlation, histograms, cross-run agreement and the
//! forgetting / mal-generalizing synchronization analysis.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::trace::AccuracyTrace;

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::argument(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::argument("correlation needs at least 2 observations"));
    }
    Ok(())
}

/// Product-moment correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    // sqrt of the product keeps identical inputs at exactly 1.
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks, tied values sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average-tie ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Integer histogram with left-closed, right-open bins `[lo, lo + width)`
/// starting at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub bin_width: usize,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// `(lo, hi)` of every bin.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.counts.len())
            .map(|b| (b * self.bin_width, (b + 1) * self.bin_width))
            .collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Bins from 0 up to the bin holding the largest value.
pub fn histogram(values: &[usize], bin_width: usize) -> Result<Histogram> {
    let max = values.iter().copied().max().unwrap_or(0);
    histogram_to(values, bin_width, max)
}

/// Bins from 0 up to the bin holding `max_value`, so two histograms can
/// share edges.
pub fn histogram_to(values: &[usize], bin_width: usize, max_value: usize) -> Result<Histogram> {
    if bin_width == 0 {
        return Err(Error::argument("bin width must be >= 1"));
    }
    let top = values.iter().copied().max().unwrap_or(0).max(max_value);
    let mut counts = vec![0usize; top / bin_width + 1];
    for &v in values {
        counts[v / bin_width] += 1;
    }
    Ok(Histogram { bin_width, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunCorrelationMatrix {
    pub n_runs: usize,
    /// Row-major `n_runs x n_runs`.
    pub entries: Vec<f64>,
}

impl RunCorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_runs + j]
    }

    /// Mean of the entries above the diagonal.
    pub fn off_diagonal_mean(&self) -> f64 {
        let n = self.n_runs;
        let (sum, count) = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .fold((0.0, 0usize), |(s, c), (i, j)| (s + self.get(i, j), c + 1));
        sum / count as f64
    }
}

/// Pairwise Pearson correlation of per-run density vectors.
pub fn run_correlation(vectors: &[Vec<f64>]) -> Result<RunCorrelationMatrix> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::argument("need at least 2 runs to correlate"));
    }
    let len = vectors[0].len();
    if vectors.iter().any(|v| v.len() != len) {
        return Err(Error::argument("density vectors differ in length"));
    }
    let mut entries = vec![1.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let r = if vectors[i] == vectors[j] {
                // Identical vectors correlate perfectly even without variance.
                1.0
            } else {
                pearson(&vectors[i], &vectors[j])?
            };
            entries[i * n + j] = r;
            entries[j * n + i] = r;
        }
    }
    Ok(RunCorrelationMatrix { n_runs: n, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncMode {
    /// Event-epoch sets must be equal (and nonempty).
    IdenticalSets,
    /// Event-epoch sets must share at least one epoch.
    SharedEpoch,
}

/// For every test sample, the number of training samples whose forgetting
/// events are synchronized with its mal-generalizing events.
pub fn synchronization_counts(
    test_trace: &AccuracyTrace,
    train_trace: &AccuracyTrace,
    mode: SyncMode,
) -> Result<Vec<usize>> {
    if test_trace.n_epochs() != train_trace.n_epochs() {
        return Err(Error::argument(format!(
            "traces cover {} and {} epochs",
            test_trace.n_epochs(),
            train_trace.n_epochs()
        )));
    }
    let train_events: Vec<Vec<usize>> = (0..train_trace.n_samples())
        .map(|j| train_trace.event_epochs(j))
        .collect::<Result<_>>()?;
    let test_events: Vec<Vec<usize>> = (0..test_trace.n_samples())
        .map(|i| test_trace.event_epochs(i))
        .collect::<Result<_>>()?;

    Ok(match mode {
        SyncMode::IdenticalSets => {
            let mut by_set: HashMap<&[usize], usize> = HashMap::new();
            for e in train_events.iter().filter(|e| !e.is_empty()) {
                *by_set.entry(e.as_slice()).or_default() += 1;
            }
            test_events
                .iter()
                .map(|e| if e.is_empty() { 0 } else { by_set.get(e.as_slice()).copied().unwrap_or(0) })
                .collect()
        }
        SyncMode::SharedEpoch => {
            let mut at_epoch = vec![Vec::new(); train_trace.n_epochs() + 1];
            for (j, e) in train_events.iter().enumerate() {
                for &t in e {
                    at_epoch[t].push(j);
                }
            }
            let mut seen = vec![usize::MAX; train_trace.n_samples()];
            test_events
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let mut count = 0;
                    for &t in e {
                        for &j in &at_epoch[t] {
                            if seen[j] != i {
                                seen[j] = i;
                                count += 1;
                            }
                        }
                    }
                    count
                })
                .collect()
        }
    })
}

/// Pearson correlation between the event-count histograms of two traces,
/// built over the shared range `[0, max of both]`.
pub fn event_distribution_similarity(
    train_trace: &AccuracyTrace,
    test_trace: &AccuracyTrace,
    bin_width: usize,
) -> Result<f64> {
    let train: Vec<usize> = train_trace.regularity_records().iter().map(|r| r.event_count).collect();
    let test: Vec<usize> = test_trace.regularity_records().iter().map(|r| r.event_count).collect();
    let max = train.iter().chain(&test).copied().max().unwrap_or(0);
    let a = histogram_to(&train, bin_width, max)?;
    let b = histogram_to(&test, bin_width, max)?;
    let to_f = |h: &Histogram| h.counts.iter().map(|&c| c as f64).collect::<Vec<_>>();
    pearson(&to_f(&a), &to_f(&b))
}
