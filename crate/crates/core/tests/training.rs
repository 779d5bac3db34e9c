use gdu_core::training::{train, Dataset, FeatureExtractor, Head, Model, Nonlinearity, TrainConfig, TrainMode};
use gdu_core::{Activation, GatingMode, GduLayer, KernelConfig, LayerShape, LearningMachine, OrthVariant, RegConfig};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Two Gaussian blobs at `(-gap, 0)` and `(gap, 0)`.
fn blobs<T: gdu_core::Scalar>(n: usize, gap: f64, seed: u64) -> Dataset<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let center = if y == 0 { -gap } else { gap };
        let z0: f64 = StandardNormal.sample(&mut rng);
        let z1: f64 = StandardNormal.sample(&mut rng);
        x[[i, 0]] = T::lit(center + 0.5 * z0);
        x[[i, 1]] = T::lit(0.5 * z1);
        labels.push(y);
    }
    Dataset::new(x, labels, vec![0; n], vec![0; n]).unwrap()
}

fn gdu_model<T: gdu_core::Scalar>(mode: GatingMode, seed: u64) -> Model<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fe = FeatureExtractor::init(&[2, 4], Nonlinearity::Tanh, &mut rng).unwrap();
    let layer = GduLayer::init_layer(
        LayerShape { m: 3, n: 4, e: 4, c: 2 },
        seed,
        mode,
        KernelConfig::new(T::lit(1.0)).unwrap(),
        T::lit(2.0),
        Activation::Identity,
    )
    .unwrap();
    Model::new(fe, Head::Gdu(layer)).unwrap()
}

fn config<T: gdu_core::Scalar>(mode: TrainMode, seed: u64) -> TrainConfig<T> {
    TrainConfig {
        mode,
        max_epochs: 30,
        patience: 30,
        seed,
        reg: RegConfig {
            lambda_ols: T::lit(1e-3),
            lambda_orth: T::lit(1e-3),
            lambda_l1: T::lit(1e-3),
            orth_variant: OrthVariant::Srip,
        },
        track_srip: true,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_data_is_learned_in_every_mode() {
    let tr = blobs::<f64>(200, 2.0, 1);
    let va = blobs::<f64>(100, 2.0, 2);
    for mode in GatingMode::ALL {
        let out = train(&tr, &va, &config(TrainMode::E2e, 3), gdu_model(mode, 4)).unwrap();
        assert!(out.best_val_acc >= 0.95, "{mode}: {}", out.best_val_acc);
    }
}

#[test]
fn single_precision_training_runs() {
    let tr = blobs::<f32>(200, 2.0, 1);
    let va = blobs::<f32>(100, 2.0, 2);
    let out = train(&tr, &va, &config(TrainMode::E2e, 3), gdu_model::<f32>(GatingMode::Mmd, 4)).unwrap();
    assert!(out.best_val_acc >= 0.95, "{}", out.best_val_acc);
}

#[test]
fn fine_tuning_leaves_feature_extractor_untouched() {
    let tr = blobs::<f64>(120, 1.0, 5);
    let va = blobs::<f64>(60, 1.0, 6);
    let model = gdu_model::<f64>(GatingMode::Projection, 7);
    let before = model.fe.clone();
    let out = train(&tr, &va, &config(TrainMode::Ft, 8), model.clone()).unwrap();
    assert_eq!(out.model.fe, before);
    let Head::Gdu(after) = &out.model.head else { panic!("head kind changed") };
    let Head::Gdu(init) = &model.head else { unreachable!() };
    assert_ne!(after.machines(), init.machines());
}

#[test]
fn returned_snapshot_is_the_best_epoch() {
    let tr = blobs::<f64>(120, 0.6, 9);
    let va = blobs::<f64>(60, 0.6, 10);
    let cfg = TrainConfig {
        patience: 3,
        max_epochs: 40,
        ..config(TrainMode::E2e, 11)
    };
    let out = train(&tr, &va, &cfg, gdu_model(GatingMode::Cs, 12)).unwrap();
    let accs: Vec<f64> = out.trace.epochs.iter().map(|r| r.val_acc).collect();
    let max = accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best_val_acc, max);
    assert_eq!(out.best_epoch, accs.iter().position(|&a| a == max).unwrap());
    assert_eq!(out.model.accuracy(&va).unwrap(), max);
    // stopped exactly `patience` epochs after the last improvement, or ran out
    assert!(out.trace.len() == out.best_epoch + 1 + cfg.patience || out.trace.len() == cfg.max_epochs);
}

#[test]
fn patience_equal_to_schedule_trains_every_epoch() {
    let tr = blobs::<f64>(60, 2.0, 13);
    let va = blobs::<f64>(30, 2.0, 14);
    let cfg = TrainConfig {
        max_epochs: 12,
        patience: 12,
        ..config(TrainMode::E2e, 15)
    };
    let out = train(&tr, &va, &cfg, gdu_model(GatingMode::Mmd, 16)).unwrap();
    assert_eq!(out.trace.len(), 12);
}

#[test]
fn same_seed_same_trace() {
    let tr = blobs::<f64>(80, 1.0, 17);
    let va = blobs::<f64>(40, 1.0, 18);
    let run = |seed| {
        train(&tr, &va, &config(TrainMode::E2e, seed), gdu_model(GatingMode::Projection, 19))
            .unwrap()
            .trace
            .to_csv()
    };
    assert_eq!(run(20), run(20));
    assert_ne!(run(20), run(21));
}

#[test]
fn srip_tracked_only_for_gated_heads() {
    let tr = blobs::<f64>(40, 2.0, 22);
    let va = blobs::<f64>(20, 2.0, 23);
    let out = train(&tr, &va, &config(TrainMode::E2e, 24), gdu_model(GatingMode::Mmd, 25)).unwrap();
    assert!(out.trace.epochs.iter().all(|r| r.srip.is_some_and(|s| s >= 0.0)));

    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let single = Model::new(
        FeatureExtractor::identity(2),
        Head::Single(LearningMachine::init(2, 2, Activation::Identity, &mut rng)),
    )
    .unwrap();
    let out = train(&tr, &va, &config(TrainMode::E2e, 27), single).unwrap();
    assert!(out.trace.epochs.iter().all(|r| r.srip.is_none()));
    assert!(out.best_val_acc >= 0.95);
}

#[test]
fn invalid_configs_rejected() {
    let tr = blobs::<f64>(20, 2.0, 28);
    for cfg in [
        TrainConfig { patience: 0, ..config(TrainMode::E2e, 0) },
        TrainConfig { batch_size: 0, ..config(TrainMode::E2e, 0) },
        TrainConfig { max_epochs: 0, ..config(TrainMode::E2e, 0) },
    ] {
        assert!(train(&tr, &tr, &cfg, gdu_model(GatingMode::Cs, 0)).is_err());
    }
}
