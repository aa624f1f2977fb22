//! Labeled datasets: synthetic Gaussian mixtures with label noise, CSV
//! loading, and stratified train/test splitting.

use std::io::Read;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
pub use crate::trace::Role as Split;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    split: Vec<Split>,
    n_classes: usize,
    /// Ids whose label was deliberately corrupted, sorted ascending.
    irregular: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        split: Vec<Split>,
        n_classes: usize,
    ) -> Result<Self> {
        let d = features.first().map_or(0, Vec::len);
        if features.is_empty() || d == 0 {
            return Err(Error::argument("dataset needs at least one sample with d >= 1"));
        }
        if let Some(i) = features.iter().position(|f| f.len() != d) {
            return Err(Error::argument(format!(
                "sample {i} has dimension {}, expected {d}",
                features[i].len()
            )));
        }
        if labels.len() != features.len() || split.len() != features.len() {
            return Err(Error::argument(format!(
                "length mismatch: {} features, {} labels, {} split tags",
                features.len(),
                labels.len(),
                split.len()
            )));
        }
        if n_classes < 2 {
            return Err(Error::argument("need at least 2 classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::argument(format!("label {bad} >= class count {n_classes}")));
        }
        Ok(Self {
            features,
            labels,
            split,
            n_classes,
            irregular: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn split_tags(&self) -> &[Split] {
        &self.split
    }

    pub fn irregular_ids(&self) -> &[usize] {
        &self.irregular
    }

    /// Global ids of the samples tagged with `role`, in dataset order.
    /// Row `i` of a trace for that role refers to `indices_of(role)[i]`.
    pub fn indices_of(&self, role: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == role).collect()
    }

    /// Borrowed features and labels for the given global ids.
    pub fn view(&self, ids: &[usize]) -> DataView<'_> {
        DataView {
            features: ids.iter().map(|&i| self.features[i].as_slice()).collect(),
            labels: ids.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    pub fn view_of(&self, role: Split) -> DataView<'_> {
        self.view(&self.indices_of(role))
    }

    /// Retag samples: `ids` become train, every other sample keeps its tag
    /// only if it was test. Used to retrain on a pruned train split.
    pub fn with_train_subset(&self, train_ids: &[usize]) -> Self {
        let mut keep = vec![false; self.len()];
        for &i in train_ids {
            keep[i] = true;
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut split = Vec::new();
        for (i, &kept) in keep.iter().enumerate() {
            if self.split[i] == Split::Test || kept {
                features.push(self.features[i].clone());
                labels.push(self.labels[i]);
                split.push(self.split[i]);
            }
        }
        Self {
            features,
            labels,
            split,
            n_classes: self.n_classes,
            irregular: Vec::new(),
        }
    }

    /// Writes `label,f1,...,fd,split`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header = vec!["label".to_string()];
        header.extend((1..=self.dim()).map(|j| format!("f{j}")));
        header.push("split".into());
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for i in 0..self.len() {
            let mut rec = vec![self.labels[i].to_string()];
            rec.extend(self.features[i].iter().map(|v| v.to_string()));
            rec.push(self.split[i].to_string());
            w.write_record(&rec).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Borrowed subset of a dataset used for fitting and inference.
#[derive(Debug, Clone)]
pub struct DataView<'a> {
    pub features: Vec<&'a [f64]>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl DataView<'_> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, |f| f.len())
    }
}

/// Vertices of a regular simplex with pairwise distance `separation`,
/// embedded in the first `k - 1` coordinates of `R^d`.
///
/// The centred basis vectors `e_i - 1/k` are mapped through the Helmert
/// basis, which is orthonormal, so the pairwise distance `sqrt(2)` is kept.
fn simplex_centers(k: usize, d: usize, separation: f64) -> Vec<Vec<f64>> {
    let scale = separation / std::f64::consts::SQRT_2;
    (0..k)
        .map(|i| {
            let mut c = vec![0.0; d];
            for j in 1..k {
                let norm = ((j * (j + 1)) as f64).sqrt();
                let h = match i.cmp(&j) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(j as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                };
                c[j - 1] = scale * h;
            }
            c
        })
        .collect()
}

/// Round half up, shared by every "round(fraction * count)" rule.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// `k` unit-covariance Gaussian clusters on a simplex, with
/// `round(noise_frac * k * n_per_class)` labels redrawn to a wrong class.
///
/// Sample `i` is drawn from cluster `i mod k`; all are tagged train.
pub fn synth_mixture(
    k: usize,
    n_per_class: usize,
    d: usize,
    separation: f64,
    noise_frac: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if k < 2 {
        return Err(Error::argument("synth_mixture needs k >= 2"));
    }
    if n_per_class < 1 {
        return Err(Error::argument("n_per_class must be >= 1"));
    }
    if d + 1 < k {
        return Err(Error::argument(format!(
            "a {k}-class simplex needs d >= {}, got {d}",
            k - 1
        )));
    }
    if !separation.is_finite() || separation <= 0.0 {
        return Err(Error::argument("separation must be a positive finite number"));
    }
    if !(0.0..1.0).contains(&noise_frac) {
        return Err(Error::argument(format!("noise_frac {noise_frac} outside [0, 1)")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = simplex_centers(k, d, separation);
    let n = k * n_per_class;
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    // Classes are interleaved (sample i belongs to cluster i mod k) so that
    // id-ordered tie-breaking downstream does not favour any class.
    for i in 0..n {
        let class = i % k;
        features.push(
            centers[class]
                .iter()
                .map(|&c| c + rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        labels.push(class);
    }

    let n_noisy = round_half_up(noise_frac * n as f64).min(n);
    let mut irregular = index::sample(&mut rng, n, n_noisy).into_vec();
    irregular.sort_unstable();
    for &i in &irregular {
        // Uniform over the k - 1 wrong classes.
        let shift = rng.random_range(1..k);
        labels[i] = (labels[i] + shift) % k;
    }

    let mut ds = LabeledDataset::new(features, labels, vec![Split::Train; n], k)?;
    ds.irregular = irregular;
    Ok(ds)
}

/// Stratified split: per class, `round(train_frac * count)` samples are
/// tagged train and the rest test.
pub fn split(dataset: &LabeledDataset, train_frac: f64, seed: u64) -> Result<LabeledDataset> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::argument(format!("train_frac {train_frac} outside (0, 1)")));
    }
    let mut by_class = vec![Vec::new(); dataset.n_classes];
    for (i, &y) in dataset.labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tags = vec![Split::Test; dataset.len()];
    for (class, members) in by_class.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::argument(format!(
                "class {class} has {} sample(s); stratified split needs >= 2",
                members.len()
            )));
        }
        let n_train = round_half_up(train_frac * members.len() as f64);
        for pick in index::sample(&mut rng, members.len(), n_train) {
            tags[members[pick]] = Split::Train;
        }
    }
    Ok(LabeledDataset {
        split: tags,
        ..dataset.clone()
    })
}

/// Loads `label,f1,...,fd[,split]`. The class count is `max label + 1`
/// (at least 2); a missing split column tags every row train.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_csv<R: Read>(r: R) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    if header.get(0) != Some("label") {
        return Err(Error::parse(1, "first column must be `label`"));
    }
    let has_split = header.iter().next_back() == Some("split");
    let d = header.len() - 1 - usize::from(has_split);
    if d == 0 {
        return Err(Error::parse(1, "no feature columns"));
    }
    for (j, name) in header.iter().skip(1).take(d).enumerate() {
        if name != format!("f{}", j + 1) {
            return Err(Error::parse(1, format!("expected column f{}, found `{name}`", j + 1)));
        }
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut tags = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::parse(
                line,
                format!("expected {} columns, found {}", header.len(), rec.len()),
            ));
        }
        let label: usize = rec[0]
            .parse()
            .map_err(|_| Error::parse(line, format!("label `{}` is not a class index", &rec[0])))?;
        let mut row = Vec::with_capacity(d);
        for j in 1..=d {
            let v: f64 = rec[j]
                .parse()
                .map_err(|_| Error::parse(line, format!("column f{j} value `{}` is not numeric", &rec[j])))?;
            if !v.is_finite() {
                return Err(Error::parse(line, format!("column f{j} is not finite")));
            }
            row.push(v);
        }
        let tag = if has_split {
            rec[d + 1]
                .parse::<Split>()
                .map_err(|e| Error::parse(line, e.to_string()))?
        } else {
            Split::Train
        };
        features.push(row);
        labels.push(label);
        tags.push(tag);
    }
    if labels.is_empty() {
        return Err(Error::parse(2, "dataset has no rows"));
    }
    let k = (labels.iter().copied().max().unwrap_or(0) + 1).max(2);
    LabeledDataset::new(features, labels, tags, k)
}
