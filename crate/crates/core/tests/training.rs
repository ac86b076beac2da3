use channelkan::channel::{generate_dataset, DatasetSpec, SystemConfig};
use channelkan::model::{ConvLayer, ModelConfig, ModelParams};
use channelkan::train::{train, TrainConfig, TrainSession};

fn tiny_model(system: &SystemConfig) -> ModelConfig {
    ModelConfig {
        history_len: 8,
        horizon: 2,
        scales: vec![1, 3],
        conv_layers: vec![
            ConvLayer { kernel: 3, out_channels: 4 },
            ConvLayer { kernel: 3, out_channels: 2 },
        ],
        ..ModelConfig::for_system(system)
    }
}

#[test]
fn small_steps_do_not_increase_training_loss() {
    let system = SystemConfig::desk();
    let cfg = tiny_model(&system);
    let spec = DatasetSpec {
        velocity_kmh: 30.0,
        windows: 8,
        history_len: 8,
        horizon: 2,
        ..DatasetSpec::default()
    };
    let mut ok = 0;
    for seed in 0..100 {
        let tr = generate_dataset(&spec, &system, seed, 0).unwrap();
        let va = generate_dataset(&DatasetSpec { windows: 2, ..spec.clone() }, &system, seed, 1).unwrap();
        let tc = TrainConfig {
            epochs: 2,
            batch_size: 4,
            lr0: 1e-4,
            seed,
            ..TrainConfig::default()
        };
        let params = ModelParams::init(&cfg, seed).unwrap();
        let out = train(&cfg, params, &tr, &va, &tc, &TrainSession::default()).unwrap();
        let e = &out.report.epochs;
        if e[1].train_loss <= e[0].train_loss {
            ok += 1;
        }
    }
    assert!(ok >= 95, "loss decreased in only {ok} of 100 runs");
}

#[test]
fn resuming_continues_the_same_trajectory() {
    let system = SystemConfig::desk();
    let cfg = tiny_model(&system);
    let spec = DatasetSpec {
        velocity_kmh: 0.0,
        windows: 16,
        history_len: 8,
        horizon: 2,
        ..DatasetSpec::default()
    };
    let tr = generate_dataset(&spec, &system, 3, 0).unwrap();
    // Validating on the training set makes every epoch an improvement, so the
    // saved checkpoint is always the latest state.
    let tc = TrainConfig {
        epochs: 4,
        batch_size: 4,
        seed: 3,
        ..TrainConfig::default()
    };
    let params = ModelParams::init(&cfg, 3).unwrap();
    let straight = train(&cfg, params.clone(), &tr, &tr, &tc, &TrainSession::default()).unwrap();
    assert!(straight.report.epochs.windows(2).all(|w| w[1].val_nmse < w[0].val_nmse));

    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let first = TrainSession {
        checkpoint: Some(ckpt.clone()),
        resume: None,
    };
    train(&cfg, params, &tr, &tr, &TrainConfig { epochs: 2, ..tc.clone() }, &first).unwrap();
    let saved = channelkan::model::load_checkpoint(&ckpt, Some(&cfg)).unwrap();
    assert_eq!(saved.epochs_done, 2);
    let second = TrainSession {
        checkpoint: None,
        resume: Some(saved.clone()),
    };
    let resumed = train(&cfg, saved.params, &tr, &tr, &tc, &second).unwrap();
    assert_eq!(resumed.report.epochs.len(), 2);
    for ((_, _, a), (_, _, b)) in resumed.params.iter().zip(straight.params.iter()) {
        assert_eq!(a, b);
    }
}
