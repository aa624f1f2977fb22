use std::path::Path;

use crate::error::{CliError, Result};

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::write(path, e))
}

/// Thread pool bounded by the configured worker count (0 = all cores).
pub fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))
}

/// Mean of the finite entries, NaN when there are none.
pub fn finite_mean(values: impl IntoIterator<Item = f64>) -> (f64, usize) {
    let (sum, n) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        (f64::NAN, 0)
    } else {
        (sum / n as f64, n)
    }
}
