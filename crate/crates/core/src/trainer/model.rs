//! Fully connected softmax classifier with a flat parameter vector.
//!
//! Parameters are laid out layer by layer: the weight matrix (row-major,
//! `out x in`) followed by the bias vector. Optimizers see one flat slice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Log-probabilities are floored here before the loss is taken.
pub const LOG_PROB_FLOOR: f64 = -27.631021115928547; // ln(1e-12)

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::argument(format!("unknown activation `{other}`"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

/// Architecture of a testee network. An empty `hidden_widths` gives
/// multinomial logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub init_scale: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            hidden_widths: vec![32],
            activation: Activation::Relu,
            init_scale: 0.1,
        }
    }
}

impl ModelSpec {
    pub fn logistic() -> Self {
        Self {
            hidden_widths: Vec::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.contains(&0) {
            return Err(Error::argument("hidden widths must be >= 1"));
        }
        if !self.init_scale.is_finite() || self.init_scale <= 0.0 {
            return Err(Error::argument("init_scale must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    activation: Activation,
    pub params: Vec<f64>,
}

impl Mlp {
    /// Parameters drawn uniformly from `[-init_scale, init_scale]`.
    pub fn init(spec: &ModelSpec, input_dim: usize, n_classes: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        if input_dim == 0 || n_classes < 2 {
            return Err(Error::argument("model needs input_dim >= 1 and >= 2 classes"));
        }
        let mut dims = vec![input_dim];
        dims.extend(&spec.hidden_widths);
        dims.push(n_classes);
        let n_params = dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        let s = spec.init_scale;
        let params = (0..n_params).map(|_| rng.random_range(-s..=s)).collect();
        Ok(Self {
            dims,
            activation: spec.activation,
            params,
        })
    }

    pub fn from_seed(spec: &ModelSpec, input_dim: usize, n_classes: usize, seed: u64) -> Result<Self> {
        Self::init(spec, input_dim, n_classes, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Offsets of (weights, biases) for each layer.
    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.dims
            .windows(2)
            .map(|w| {
                let wo = off;
                let bo = off + w[0] * w[1];
                off = bo + w[1];
                (wo, bo)
            })
            .collect()
    }

    /// Pre-activations and activations per layer; the last layer's
    /// "activation" is the raw logits.
    fn forward_cache(&self, x: &[f64], offsets: &[(usize, usize)]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut zs = Vec::with_capacity(self.n_layers());
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.n_layers() + 1);
        acts.push(x.to_vec());
        for (l, &(wo, bo)) in offsets.iter().enumerate() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let input = &acts[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &self.params[wo + o * n_in..wo + (o + 1) * n_in];
                    self.params[bo + o] + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>()
                })
                .collect();
            let a = if l + 1 == self.n_layers() {
                z.clone()
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            zs.push(z);
            acts.push(a);
        }
        (zs, acts)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let offsets = self.layer_offsets();
        let (_, mut acts) = self.forward_cache(x, &offsets);
        acts.pop().unwrap()
    }

    /// Argmax of the logits, ties to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }

    /// 1 where the prediction matches the label.
    pub fn correctness(&self, xs: &[&[f64]], ys: &[usize]) -> Vec<u8> {
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| u8::from(self.predict(x) == y))
            .collect()
    }

    /// Mean softmax cross-entropy over the batch and its exact gradient
    /// with respect to every parameter.
    ///
    /// The log-probability of the target is floored at `ln(1e-12)`. The
    /// floor only changes the reported loss; the gradient is always the
    /// unclamped `softmax - onehot` so confidently wrong samples still pull.
    pub fn loss_and_grad(&self, xs: &[&[f64]], ys: &[usize]) -> Result<(f64, Vec<f64>)> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::argument(format!(
                "batch needs matching nonempty inputs and labels, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        let k = self.n_classes();
        let offsets = self.layer_offsets();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let inv_b = 1.0 / xs.len() as f64;

        for (x, &y) in xs.iter().zip(ys) {
            if x.len() != self.input_dim() {
                return Err(Error::argument(format!(
                    "input has dimension {}, model expects {}",
                    x.len(),
                    self.input_dim()
                )));
            }
            if y >= k {
                return Err(Error::argument(format!("label {y} >= {k} classes")));
            }
            let (zs, acts) = self.forward_cache(x, &offsets);
            let logits = acts.last().unwrap();
            let lse = log_sum_exp(logits);
            loss -= (logits[y] - lse).max(LOG_PROB_FLOOR);

            let mut delta: Vec<f64> = logits.iter().map(|&z| (z - lse).exp() * inv_b).collect();
            delta[y] -= inv_b;

            for l in (0..self.n_layers()).rev() {
                let (wo, bo) = offsets[l];
                let n_in = self.dims[l];
                let input = &acts[l];
                for (o, &d) in delta.iter().enumerate() {
                    grad[bo + o] += d;
                    let g = &mut grad[wo + o * n_in..wo + (o + 1) * n_in];
                    for (gi, &a) in g.iter_mut().zip(input) {
                        *gi += d * a;
                    }
                }
                if l == 0 {
                    break;
                }
                let mut prev = vec![0.0; n_in];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &self.params[wo + o * n_in..wo + (o + 1) * n_in];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                for (i, p) in prev.iter_mut().enumerate() {
                    *p *= self.activation.derivative(zs[l - 1][i], acts[l][i]);
                }
                delta = prev;
            }
        }
        Ok((loss * inv_b, grad))
    }

    /// Mean loss only; used for monitoring and finite differences.
    pub fn loss(&self, xs: &[&[f64]], ys: &[usize]) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| {
                let logits = self.logits(x);
                -(logits[y] - log_sum_exp(&logits)).max(LOG_PROB_FLOOR)
            })
            .sum();
        total / xs.len() as f64
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|&z| (z - m).exp()).sum::<f64>().ln()
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
