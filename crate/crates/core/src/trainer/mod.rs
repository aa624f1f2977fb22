//! Mini-batch training with epoch-end inference over every train and test
//! sample, producing one trace column per epoch.

mod model;
mod optim;
pub mod zoo;

pub use model::{argmax, log_sum_exp, Activation, Mlp, ModelSpec, LOG_PROB_FLOOR};
pub use optim::{adagrad_step, adamax_step, sgd_step, OptState, Optimizer};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DataView, LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::trace::AccuracyTrace;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// `(epoch, multiplier)` pairs: from that 1-based epoch on, the learning
    /// rate is multiplied by `multiplier` (drops compound).
    pub lr_schedule: Vec<(usize, f64)>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            optimizer: Optimizer::default(),
            lr_schedule: vec![(25, 0.1), (37, 0.1)],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::argument("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::argument("batch_size must be >= 1"));
        }
        self.optimizer.validate()?;
        if self.lr_schedule.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::argument("schedule epochs must be strictly increasing"));
        }
        if self.lr_schedule.iter().any(|&(_, m)| !m.is_finite() || m <= 0.0) {
            return Err(Error::argument("schedule multipliers must be > 0"));
        }
        Ok(())
    }

    /// Learning-rate multiplier in force during the given 1-based epoch.
    pub fn lr_multiplier(&self, epoch: usize) -> f64 {
        self.lr_schedule
            .iter()
            .filter(|&&(e, _)| e <= epoch)
            .map(|&(_, m)| m)
            .product()
    }
}

/// Everything one training run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunBundle {
    pub config: TrainConfig,
    pub model_spec: ModelSpec,
    pub train_trace: AccuracyTrace,
    pub test_trace: AccuracyTrace,
    pub final_train_acc: f64,
    pub final_test_acc: f64,
    /// Mean training loss over the full train split after each epoch.
    pub epoch_train_loss: Vec<f64>,
}

/// Runs `config.epochs` epochs of shuffled mini-batch updates. The hook is
/// called with the 1-based epoch and the post-update model.
pub fn fit_with<F>(train: &DataView<'_>, spec: &ModelSpec, config: &TrainConfig, mut on_epoch: F) -> Result<Mlp>
where
    F: FnMut(usize, &Mlp) -> Result<()>,
{
    config.validate()?;
    if train.is_empty() {
        return Err(Error::argument("train split is empty"));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Mlp::init(spec, train.dim(), train.n_classes, &mut init_rng)?;
    let mut state = config.optimizer.init_state(model.n_params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut xs: Vec<&[f64]> = Vec::with_capacity(config.batch_size);
    let mut ys: Vec<usize> = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        // Each epoch's shuffle comes from its own stream of the run seed.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let lr_scale = config.lr_multiplier(epoch);

        for batch in order.chunks(config.batch_size) {
            xs.clear();
            ys.clear();
            xs.extend(batch.iter().map(|&i| train.features[i]));
            ys.extend(batch.iter().map(|&i| train.labels[i]));
            let (loss, grad) = model.loss_and_grad(&xs, &ys)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::RunAborted(format!(
                    "non-finite loss or gradient at epoch {epoch} (loss = {loss})"
                )));
            }
            config.optimizer.step(lr_scale, &mut model.params, &grad, &mut state)?;
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::RunAborted(format!("parameters overflowed at epoch {epoch}")));
        }
        on_epoch(epoch, &model)?;
    }
    Ok(model)
}

pub fn fit(train: &DataView<'_>, spec: &ModelSpec, config: &TrainConfig) -> Result<Mlp> {
    fit_with(train, spec, config, |_, _| Ok(()))
}

/// Trains on the train split and records, after every epoch, the
/// correctness of every train and test sample under the current parameters.
pub fn train_and_trace(dataset: &LabeledDataset, spec: &ModelSpec, config: &TrainConfig) -> Result<RunBundle> {
    train_and_trace_observed(dataset, spec, config, |_, _| {})
}

/// As [`train_and_trace`], additionally handing each epoch-end model to `observe`.
pub fn train_and_trace_observed<F>(
    dataset: &LabeledDataset,
    spec: &ModelSpec,
    config: &TrainConfig,
    mut observe: F,
) -> Result<RunBundle>
where
    F: FnMut(usize, &Mlp),
{
    let train = dataset.view_of(Split::Train);
    let test = dataset.view_of(Split::Test);
    if train.is_empty() || test.is_empty() {
        return Err(Error::argument(format!(
            "need both splits, got {} train and {} test samples",
            train.len(),
            test.len()
        )));
    }
    let mut train_cols = Vec::with_capacity(config.epochs);
    let mut test_cols = Vec::with_capacity(config.epochs);
    let mut losses = Vec::with_capacity(config.epochs);
    fit_with(&train, spec, config, |epoch, model| {
        train_cols.push(model.correctness(&train.features, &train.labels));
        test_cols.push(model.correctness(&test.features, &test.labels));
        let loss = model.loss(&train.features, &train.labels);
        if !loss.is_finite() {
            return Err(Error::RunAborted(format!("non-finite train loss after epoch {epoch}")));
        }
        losses.push(loss);
        observe(epoch, model);
        Ok(())
    })?;

    let train_trace = AccuracyTrace::from_columns(Split::Train, &train_cols)?;
    let test_trace = AccuracyTrace::from_columns(Split::Test, &test_cols)?;
    let last = config.epochs;
    Ok(RunBundle {
        final_train_acc: train_trace.accuracy_at(last)?,
        final_test_acc: test_trace.accuracy_at(last)?,
        config: config.clone(),
        model_spec: spec.clone(),
        train_trace,
        test_trace,
        epoch_train_loss: losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{split, synth_mixture};

    fn small_data() -> LabeledDataset {
        split(&synth_mixture(3, 30, 3, 4.0, 0.0, 1).unwrap(), 0.5, 2).unwrap()
    }

    #[test]
    fn one_epoch_gives_one_column() {
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let run = train_and_trace(&small_data(), &ModelSpec::default(), &cfg).unwrap();
        assert_eq!(run.train_trace.n_epochs(), 1);
        assert_eq!(run.test_trace.n_epochs(), 1);
        assert_eq!(run.train_trace.n_samples(), 45);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = TrainConfig { epochs: 8, seed: 5, ..TrainConfig::default() };
        let ds = small_data();
        let a = train_and_trace(&ds, &ModelSpec::default(), &cfg).unwrap();
        let b = train_and_trace(&ds, &ModelSpec::default(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn final_accuracy_is_last_column_mean() {
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let run = train_and_trace(&small_data(), &ModelSpec::default(), &cfg).unwrap();
        let col = run.test_trace.column(5).unwrap();
        let mean = col.iter().map(|&b| b as f64).sum::<f64>() / col.len() as f64;
        assert_eq!(run.final_test_acc, mean);
    }

    #[test]
    fn empty_split_is_rejected() {
        let ds = synth_mixture(2, 5, 2, 3.0, 0.0, 0).unwrap();
        assert!(matches!(
            train_and_trace(&ds, &ModelSpec::default(), &TrainConfig::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn divergent_training_aborts() {
        let cfg = TrainConfig {
            epochs: 50,
            optimizer: Optimizer::Sgd { lr: 1e200, momentum: 0.9 },
            lr_schedule: vec![],
            ..TrainConfig::default()
        };
        let err = train_and_trace(&small_data(), &ModelSpec::default(), &cfg).unwrap_err();
        assert!(matches!(err, Error::RunAborted(_)), "{err}");
    }

    #[test]
    fn schedule_compounds() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_multiplier(1), 1.0);
        assert_eq!(cfg.lr_multiplier(24), 1.0);
        assert!((cfg.lr_multiplier(25) - 0.1).abs() < 1e-15);
        assert!((cfg.lr_multiplier(60) - 0.01).abs() < 1e-15);
        let bad = TrainConfig { lr_schedule: vec![(5, 0.1), (5, 0.1)], ..cfg };
        assert!(bad.validate().is_err());
    }
}
