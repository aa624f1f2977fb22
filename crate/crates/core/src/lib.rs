//! Per-sample regularity of classifier training and generalization.
//!
//! Every sample is traced through training as one correctness bit per
//! epoch. From the trace come two numbers per sample: how often it was
//! classified correctly (cumulative binary loss) and how often it went from
//! correct to incorrect (forgetting events for training samples,
//! mal-generalizing events for test samples). Together they place the
//! sample in a two-dimensional representation whose local density drives
//! training-set pruning and balanced test-set compression.

pub mod dataset;
pub mod density;
mod error;
pub mod selection;
pub mod stats;
pub mod trace;
pub mod trainer;

pub use error::{Error, Result};

/// Formats a real for CSV output with at least six significant digits.
///
/// Values that round-trip at six significant digits are written that way
/// (`0.5` becomes `0.500000`); anything needing more precision falls back
/// to the shortest exact representation.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let fixed = format!("{x:.decimals$}");
    if fixed.parse::<f64>().ok() == Some(x) {
        fixed
    } else {
        format!("{x}")
    }
}
