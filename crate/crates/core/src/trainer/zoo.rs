//! A small zoo of testee classifiers used to rank a test set's
//! discriminative power.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::{argmax, fit, Activation, ModelSpec, Optimizer, TrainConfig};
use crate::dataset::DataView;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZooAlgorithm {
    LogReg,
    MlpSmall,
    MlpLarge,
    Knn { k: usize },
    NearestCentroid,
    RidgeOneHot,
}

impl ZooAlgorithm {
    /// The six-member zoo with the given neighbour count for kNN.
    pub fn default_zoo(knn_k: usize) -> Vec<ZooAlgorithm> {
        vec![
            ZooAlgorithm::LogReg,
            ZooAlgorithm::MlpSmall,
            ZooAlgorithm::MlpLarge,
            ZooAlgorithm::Knn { k: knn_k },
            ZooAlgorithm::NearestCentroid,
            ZooAlgorithm::RidgeOneHot,
        ]
    }
}

impl fmt::Display for ZooAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZooAlgorithm::LogReg => f.write_str("logreg"),
            ZooAlgorithm::MlpSmall => f.write_str("mlp_small"),
            ZooAlgorithm::MlpLarge => f.write_str("mlp_large"),
            ZooAlgorithm::Knn { k } => write!(f, "knn_{k}"),
            ZooAlgorithm::NearestCentroid => f.write_str("nearest_centroid"),
            ZooAlgorithm::RidgeOneHot => f.write_str("ridge_onehot"),
        }
    }
}

impl FromStr for ZooAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "logreg" => ZooAlgorithm::LogReg,
            "mlp_small" => ZooAlgorithm::MlpSmall,
            "mlp_large" => ZooAlgorithm::MlpLarge,
            "nearest_centroid" => ZooAlgorithm::NearestCentroid,
            "ridge_onehot" => ZooAlgorithm::RidgeOneHot,
            other => match other.strip_prefix("knn_").map(str::parse::<usize>) {
                Some(Ok(k)) => ZooAlgorithm::Knn { k },
                _ => return Err(Error::argument(format!("unknown zoo algorithm `{other}`"))),
            },
        })
    }
}

const RIDGE_LAMBDA: f64 = 1.0;

/// Fits `algorithm` on `train` and returns one correctness bit per test sample.
pub fn zoo_predict(algorithm: ZooAlgorithm, train: &DataView<'_>, test: &DataView<'_>, seed: u64) -> Result<Vec<u8>> {
    if train.is_empty() {
        return Err(Error::argument("zoo needs a nonempty train split"));
    }
    if !test.is_empty() && test.dim() != train.dim() {
        return Err(Error::argument(format!(
            "train dimension {} differs from test dimension {}",
            train.dim(),
            test.dim()
        )));
    }
    let predictions: Vec<usize> = match algorithm {
        ZooAlgorithm::LogReg => network(train, test, ModelSpec::logistic(), 20, seed)?,
        ZooAlgorithm::MlpSmall => network(
            train,
            test,
            ModelSpec { hidden_widths: vec![4], activation: Activation::Tanh, init_scale: 0.1 },
            5,
            seed,
        )?,
        ZooAlgorithm::MlpLarge => network(
            train,
            test,
            ModelSpec { hidden_widths: vec![64, 64], activation: Activation::Relu, init_scale: 0.1 },
            40,
            seed,
        )?,
        ZooAlgorithm::Knn { k } => knn(train, test, k)?,
        ZooAlgorithm::NearestCentroid => nearest_centroid(train, test),
        ZooAlgorithm::RidgeOneHot => ridge_onehot(train, test)?,
    };
    Ok(predictions
        .iter()
        .zip(&test.labels)
        .map(|(p, y)| u8::from(p == y))
        .collect())
}

fn network(train: &DataView<'_>, test: &DataView<'_>, spec: ModelSpec, epochs: usize, seed: u64) -> Result<Vec<usize>> {
    let cfg = TrainConfig {
        epochs,
        batch_size: 32,
        optimizer: Optimizer::Sgd { lr: 0.05, momentum: 0.9 },
        lr_schedule: vec![],
        seed,
    };
    let model = fit(train, &spec, &cfg)?;
    Ok(test.features.iter().map(|x| model.predict(x)).collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Majority vote over the `k` nearest train points (ties in distance go to
/// the lower train index, ties in votes to the lower class).
fn knn(train: &DataView<'_>, test: &DataView<'_>, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > train.len() {
        return Err(Error::argument(format!(
            "knn needs 1 <= k <= train size ({}), got {k}",
            train.len()
        )));
    }
    Ok(test
        .features
        .iter()
        .map(|x| {
            let mut d: Vec<(f64, usize)> = train
                .features
                .iter()
                .enumerate()
                .map(|(i, t)| (sq_dist(x, t), i))
                .collect();
            d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0.0; train.n_classes];
            for &(_, i) in &d[..k] {
                votes[train.labels[i]] += 1.0;
            }
            argmax(&votes)
        })
        .collect())
}

fn nearest_centroid(train: &DataView<'_>, test: &DataView<'_>) -> Vec<usize> {
    let d = train.dim();
    let mut sums = vec![vec![0.0; d]; train.n_classes];
    let mut counts = vec![0usize; train.n_classes];
    for (x, &y) in train.features.iter().zip(&train.labels) {
        counts[y] += 1;
        for (s, v) in sums[y].iter_mut().zip(x.iter()) {
            *s += v;
        }
    }
    let centroids: Vec<Option<Vec<f64>>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s.into_iter().map(|v| v / c as f64).collect()))
        .collect();
    test.features
        .iter()
        .map(|x| {
            let scores: Vec<f64> = centroids
                .iter()
                .map(|c| c.as_ref().map_or(f64::NEG_INFINITY, |c| -sq_dist(x, c)))
                .collect();
            argmax(&scores)
        })
        .collect()
}

/// Least squares onto one-hot targets with an L2 penalty on all weights
/// (bias included), solved through the normal equations.
fn ridge_onehot(train: &DataView<'_>, test: &DataView<'_>) -> Result<Vec<usize>> {
    let (n, d, k) = (train.len(), train.dim(), train.n_classes);
    let x = DMatrix::from_fn(n, d + 1, |i, j| if j == d { 1.0 } else { train.features[i][j] });
    let y = DMatrix::from_fn(n, k, |i, c| f64::from(u8::from(train.labels[i] == c)));
    let gram = x.transpose() * &x + DMatrix::identity(d + 1, d + 1) * RIDGE_LAMBDA;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::argument("ridge normal equations are not positive definite"))?;
    let w = chol.solve(&(x.transpose() * y));
    Ok(test
        .features
        .iter()
        .map(|f| {
            let row = DVector::from_iterator(d + 1, f.iter().copied().chain(std::iter::once(1.0)));
            let scores: Vec<f64> = (0..k).map(|c| w.column(c).dot(&row)).collect();
            argmax(&scores)
        })
        .collect())
}
