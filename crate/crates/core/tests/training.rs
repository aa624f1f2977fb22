use sample_regularity::dataset::{split, synth_mixture, LabeledDataset, Split};
use sample_regularity::trace::AccuracyTrace;
use sample_regularity::trainer::{train_and_trace, train_and_trace_observed, ModelSpec, Optimizer, TrainConfig};

fn easy_data() -> LabeledDataset {
    split(&synth_mixture(3, 40, 4, 8.0, 0.0, 11).unwrap(), 0.5, 11).unwrap()
}

fn config(optimizer: Optimizer, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        optimizer,
        lr_schedule: vec![],
        seed: 4,
    }
}

#[test]
fn trace_columns_match_observed_models() {
    let ds = easy_data();
    let spec = ModelSpec { hidden_widths: vec![8], ..ModelSpec::logistic() };
    let train = ds.view_of(Split::Train);
    let test = ds.view_of(Split::Test);
    let mut seen = Vec::new();
    let bundle = train_and_trace_observed(&ds, &spec, &config(Optimizer::default(), 6), |epoch, model| {
        seen.push((
            epoch,
            model.correctness(&train.features, &train.labels),
            model.correctness(&test.features, &test.labels),
        ));
    })
    .unwrap();
    assert_eq!(seen.len(), 6);
    for (i, (epoch, train_col, test_col)) in seen.iter().enumerate() {
        assert_eq!(*epoch, i + 1);
        assert_eq!(&bundle.train_trace.column(*epoch).unwrap(), train_col);
        assert_eq!(&bundle.test_trace.column(*epoch).unwrap(), test_col);
    }
}

#[test]
fn small_step_sgd_lowers_the_training_loss() {
    let ds = easy_data();
    let sgd = Optimizer::Sgd { lr: 0.01, momentum: 0.0 };
    let bundle = train_and_trace(&ds, &ModelSpec::logistic(), &config(sgd, 10)).unwrap();
    let losses = &bundle.epoch_train_loss;
    assert!(losses[9] < losses[0], "{losses:?}");
}

#[test]
fn every_optimizer_fits_separable_data() {
    let ds = easy_data();
    for optimizer in [
        Optimizer::default(),
        Optimizer::AdaGrad { lr: 0.1, epsilon: 1e-8 },
        Optimizer::AdaMax { lr: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 },
    ] {
        let bundle = train_and_trace(&ds, &ModelSpec::logistic(), &config(optimizer, 20)).unwrap();
        assert_eq!(bundle.final_train_acc, 1.0, "{optimizer:?}");
        assert_eq!(bundle.train_trace.accuracy_at(20).unwrap(), 1.0);
    }
}

#[test]
fn traces_survive_a_file_round_trip() {
    let ds = easy_data();
    let bundle = train_and_trace(&ds, &ModelSpec::logistic(), &config(Optimizer::default(), 5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for trace in [&bundle.train_trace, &bundle.test_trace] {
        let path = dir.path().join("x.trace");
        trace.write_path(&path).unwrap();
        let back = AccuracyTrace::read_path(&path).unwrap();
        assert_eq!(&back, trace);
        assert_eq!(back.regularity_records(), trace.regularity_records());
    }
}

#[test]
fn datasets_survive_a_csv_round_trip() {
    let ds = split(&synth_mixture(4, 10, 3, 2.0, 0.2, 9).unwrap(), 0.6, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    ds.write_csv(&path).unwrap();
    let back = sample_regularity::dataset::load_csv(&path).unwrap();
    assert_eq!(back.features(), ds.features());
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.split_tags(), ds.split_tags());
    assert_eq!(back.n_classes(), ds.n_classes());
}

#[test]
fn same_seed_same_bundle() {
    let ds = easy_data();
    let spec = ModelSpec { hidden_widths: vec![6, 4], ..ModelSpec::logistic() };
    let a = train_and_trace(&ds, &spec, &config(Optimizer::default(), 5)).unwrap();
    let b = train_and_trace(&ds, &spec, &config(Optimizer::default(), 5)).unwrap();
    assert_eq!(a.train_trace, b.train_trace);
    assert_eq!(a.epoch_train_loss, b.epoch_train_loss);
}
