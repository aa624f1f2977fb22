//! Epoch-wise correctness traces and the statistics derived from them.
//!
//! A trace stores one bit per (sample, epoch): whether the sample was
//! classified correctly by the epoch-end model. Epochs are 1-indexed.
//! For training samples the two statistics are the cumulative binary
//! training loss (CBTL) and the number of forgetting events; for test
//! samples the same arithmetic yields the cumulative binary generalizing
//! loss (CBGL) and mal-generalizing events.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which split a trace (or a dataset sample) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Train,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Test => "test",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "test" => Ok(Role::Test),
            other => Err(Error::argument(format!(
                "unknown role `{other}` (expected train or test)"
            ))),
        }
    }
}

/// Binary correctness matrix, `n_samples x n_epochs`, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccuracyTrace {
    role: Role,
    n_samples: usize,
    n_epochs: usize,
    bits: Vec<u8>,
}

/// Per-sample (cumulative loss, event count) at a given epoch.
///
/// `cumulative_loss` is CBTL for train traces and CBGL for test traces;
/// `event_count` counts forgetting or mal-generalizing events respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegularityRecord {
    pub sample_id: usize,
    pub cumulative_loss: usize,
    pub event_count: usize,
    pub at_epoch: usize,
}

impl AccuracyTrace {
    /// Builds a trace from row-major bits. Every entry must be 0 or 1.
    pub fn new(role: Role, n_samples: usize, n_epochs: usize, bits: Vec<u8>) -> Result<Self> {
        if n_samples == 0 || n_epochs == 0 {
            return Err(Error::argument(format!(
                "trace needs at least one sample and one epoch, got {n_samples}x{n_epochs}"
            )));
        }
        if bits.len() != n_samples * n_epochs {
            return Err(Error::argument(format!(
                "expected {} bits for a {n_samples}x{n_epochs} trace, got {}",
                n_samples * n_epochs,
                bits.len()
            )));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::argument(format!(
                "non-binary entry {} at sample {}, epoch {}",
                bits[pos],
                pos / n_epochs,
                pos % n_epochs + 1
            )));
        }
        Ok(Self {
            role,
            n_samples,
            n_epochs,
            bits,
        })
    }

    pub fn from_rows(role: Role, rows: &[Vec<u8>]) -> Result<Self> {
        let n_epochs = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != n_epochs) {
            return Err(Error::argument(format!(
                "ragged rows: row {i} has {} epochs, row 0 has {n_epochs}",
                rows[i].len()
            )));
        }
        Self::new(role, rows.len(), n_epochs, rows.concat())
    }

    /// Builds a trace from per-epoch columns, each holding one bit per sample.
    pub fn from_columns(role: Role, columns: &[Vec<u8>]) -> Result<Self> {
        let n_epochs = columns.len();
        let n_samples = columns.first().map_or(0, Vec::len);
        if let Some(t) = columns.iter().position(|c| c.len() != n_samples) {
            return Err(Error::argument(format!(
                "column for epoch {} has {} samples, expected {n_samples}",
                t + 1,
                columns[t].len()
            )));
        }
        let mut bits = vec![0u8; n_samples * n_epochs];
        for (t, col) in columns.iter().enumerate() {
            for (i, &b) in col.iter().enumerate() {
                bits[i * n_epochs + t] = b;
            }
        }
        Self::new(role, n_samples, n_epochs, bits)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_epochs(&self) -> usize {
        self.n_epochs
    }

    pub fn row(&self, sample: usize) -> Result<&[u8]> {
        self.check_sample(sample)?;
        Ok(&self.bits[sample * self.n_epochs..(sample + 1) * self.n_epochs])
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.bits.chunks_exact(self.n_epochs)
    }

    /// Correctness of every sample at the given 1-based epoch.
    pub fn column(&self, epoch: usize) -> Result<Vec<u8>> {
        self.check_epoch(epoch)?;
        Ok(self.rows().map(|r| r[epoch - 1]).collect())
    }

    /// Fraction of samples correct at the given 1-based epoch.
    pub fn accuracy_at(&self, epoch: usize) -> Result<f64> {
        let col = self.column(epoch)?;
        Ok(col.iter().map(|&b| b as usize).sum::<usize>() as f64 / self.n_samples as f64)
    }

    /// Number of epochs in `1..=t` at which the sample was correct.
    pub fn cumulative_binary_loss(&self, sample: usize, t: usize) -> Result<usize> {
        self.check_epoch(t)?;
        let row = self.row(sample)?;
        Ok(cumulative_loss_of(&row[..t]))
    }

    /// Number of correct-to-incorrect transitions among epochs `1..=t`.
    /// Epoch 1 never holds an event since no earlier state exists.
    pub fn event_count(&self, sample: usize, t: usize) -> Result<usize> {
        self.check_epoch(t)?;
        let row = self.row(sample)?;
        Ok(event_count_of(&row[..t]))
    }

    /// The 1-based epochs at which the sample went from correct to incorrect.
    pub fn event_epochs(&self, sample: usize) -> Result<Vec<usize>> {
        Ok(event_epochs_of(self.row(sample)?))
    }

    /// One record per sample, evaluated at the final epoch.
    pub fn regularity_records(&self) -> Vec<RegularityRecord> {
        self.rows()
            .enumerate()
            .map(|(sample_id, row)| RegularityRecord {
                sample_id,
                cumulative_loss: cumulative_loss_of(row),
                event_count: event_count_of(row),
                at_epoch: self.n_epochs,
            })
            .collect()
    }

    fn check_sample(&self, sample: usize) -> Result<()> {
        if sample >= self.n_samples {
            return Err(Error::Range(format!(
                "sample {sample} out of range for {} samples",
                self.n_samples
            )));
        }
        Ok(())
    }

    fn check_epoch(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.n_epochs {
            return Err(Error::Range(format!(
                "epoch {t} out of range 1..={}",
                self.n_epochs
            )));
        }
        Ok(())
    }

    /// Writes the `TRACE v1` text format.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "TRACE v1 role={} samples={} epochs={}",
            self.role, self.n_samples, self.n_epochs
        )?;
        let mut line = String::with_capacity(self.n_epochs * 2);
        for row in self.rows() {
            line.clear();
            for (t, &b) in row.iter().enumerate() {
                if t > 0 {
                    line.push(',');
                }
                line.push(if b == 1 { '1' } else { '0' });
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        w.flush()
    }

    /// Parses the `TRACE v1` text format. Errors carry 1-based line numbers.
    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut lines = reader.split(b'\n');

        let header = match lines.next() {
            Some(h) => h.map_err(|e| Error::parse(1, e.to_string()))?,
            None => return Err(Error::parse(1, "empty trace file")),
        };
        let header = std::str::from_utf8(&header).map_err(|_| Error::parse(1, "header is not UTF-8"))?;
        let (role, n_samples, n_epochs) = parse_header(header)?;

        let mut bits = Vec::with_capacity(n_samples * n_epochs);
        let mut n_rows = 0usize;
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
            if n_rows == n_samples {
                if line.is_empty() {
                    // A blank final segment is the trailing LF; anything after is extra data.
                    continue;
                }
                return Err(Error::parse(
                    lineno,
                    format!("more rows than the {n_samples} declared samples"),
                ));
            }
            let before = bits.len();
            for (t, cell) in line.split(|&c| c == b',').enumerate() {
                let bit = match cell {
                    b"0" => 0u8,
                    b"1" => 1u8,
                    other => {
                        return Err(Error::parse(
                            lineno,
                            format!(
                                "cell {} is `{}`, expected 0 or 1",
                                t + 1,
                                String::from_utf8_lossy(other)
                            ),
                        ))
                    }
                };
                if t >= n_epochs {
                    return Err(Error::parse(
                        lineno,
                        format!("row has more than the {n_epochs} declared epochs"),
                    ));
                }
                bits.push(bit);
            }
            let got = bits.len() - before;
            if got != n_epochs {
                return Err(Error::parse(
                    lineno,
                    format!("row has {got} epochs, header declares {n_epochs}"),
                ));
            }
            n_rows += 1;
        }
        if n_rows != n_samples {
            return Err(Error::parse(
                n_rows + 2,
                format!("found {n_rows} rows, header declares {n_samples} samples"),
            ));
        }
        Self::new(role, n_samples, n_epochs, bits)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

fn parse_header(header: &str) -> Result<(Role, usize, usize)> {
    let mut parts = header.split(' ');
    if parts.next() != Some("TRACE") || parts.next() != Some("v1") {
        return Err(Error::parse(1, "header must start with `TRACE v1`"));
    }
    let mut role = None;
    let mut samples = None;
    let mut epochs = None;
    for field in parts {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse(1, format!("malformed header field `{field}`")))?;
        let count = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::parse(1, format!("`{key}` is not a count: `{value}`")))
        };
        match key {
            "role" => {
                role = Some(value.parse::<Role>().map_err(|e| Error::parse(1, e.to_string()))?)
            }
            "samples" => samples = Some(count()?),
            "epochs" => epochs = Some(count()?),
            _ => return Err(Error::parse(1, format!("unknown header field `{key}`"))),
        }
    }
    match (role, samples, epochs) {
        (Some(r), Some(n), Some(t)) if n >= 1 && t >= 1 => Ok((r, n, t)),
        (Some(_), Some(_), Some(_)) => Err(Error::parse(1, "samples and epochs must be >= 1")),
        _ => Err(Error::parse(1, "header needs role=, samples= and epochs=")),
    }
}

/// Free-standing statistics over a single bit row.
pub fn cumulative_loss_of(row: &[u8]) -> usize {
    row.iter().map(|&b| b as usize).sum()
}

pub fn event_count_of(row: &[u8]) -> usize {
    row.windows(2).filter(|w| w[0] == 1 && w[1] == 0).count()
}

pub fn event_epochs_of(row: &[u8]) -> Vec<usize> {
    row.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] == 1 && w[1] == 0)
        .map(|(n, _)| n + 2)
        .collect()
}

/// Mean of per-run records for the same samples, used when repetitions
/// are averaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanRecord {
    pub sample_id: usize,
    pub cumulative_loss: f64,
    pub event_count: f64,
}

pub fn mean_records(runs: &[Vec<RegularityRecord>]) -> Result<Vec<MeanRecord>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::argument("need at least one run to average"))?;
    let n = first.len();
    if runs.iter().any(|r| r.len() != n) {
        return Err(Error::argument("runs disagree on sample count"));
    }
    let k = runs.len() as f64;
    Ok((0..n)
        .map(|i| {
            let (l, e) = runs.iter().fold((0usize, 0usize), |(l, e), r| {
                (l + r[i].cumulative_loss, e + r[i].event_count)
            });
            MeanRecord {
                sample_id: first[i].sample_id,
                cumulative_loss: l as f64 / k,
                event_count: e as f64 / k,
            }
        })
        .collect())
}
