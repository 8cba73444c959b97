mod common;

use common::patch_digits as synthetic;
use onode::blocks::{Block, ComplexGain};
use onode::data::{PreprocessConfig, Preprocessor, TrajectoryTask};
use onode::error::{CheckpointError, Error};
use onode::field::ReadoutSpec;
use onode::odeflow::DynamicsSpec;
use onode::train::*;

fn small_config() -> ModelConfig {
    ModelConfig {
        ports: 36,
        ..ModelConfig::mnist_mzi()
    }
}

struct Fixture {
    train: ClassificationSet,
    test: ClassificationSet,
    readout: ReadoutSpec,
}

fn fixture(n: usize) -> Fixture {
    let config = PreprocessConfig {
        target_energy: 30.0,
        ..PreprocessConfig::mzi()
    };
    let train_ds = synthetic(n, 1);
    let pre = Preprocessor::fit(config, &train_ds).unwrap();
    let placement = Placement::Ports { port_count: 36 };
    Fixture {
        train: ClassificationSet::encode(&train_ds, &pre, placement).unwrap(),
        test: ClassificationSet::encode(&synthetic(20, 2), &pre, placement).unwrap(),
        readout: ReadoutSpec::centered(36).unwrap(),
    }
}

fn run(config: &TrainConfig, fx: &Fixture) -> (Model, ClassificationReport) {
    let mut model = Model::init(small_config(), config.seed).unwrap();
    let mut opt = OptimizerState::new(model.param_count());
    let report =
        train_classification(config, &mut model, &mut opt, &fx.train, &fx.test, &fx.readout, 0, &mut |_| {}).unwrap();
    (model, report)
}

fn set_loss(model: &Model, set: &ClassificationSet, readout: &ReadoutSpec) -> f64 {
    let idx: Vec<usize> = (0..set.len()).collect();
    classification_gradient(model, &set.inputs(&idx), set.labels(), readout).unwrap().0
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let fx = fixture(32);
    let config = TrainConfig {
        learning_rate: 0.0,
        batch_size: 8,
        epochs: 3,
        seed: 4,
    };
    let (model, _) = run(&config, &fx);
    assert_eq!(model.params(), Model::init(small_config(), 4).unwrap().params());
}

#[test]
fn same_seed_gives_identical_curves() {
    let fx = fixture(40);
    let config = TrainConfig {
        batch_size: 8,
        epochs: 2,
        ..TrainConfig::default()
    };
    let (ma, a) = run(&config, &fx);
    let (mb, b) = run(&config, &fx);
    let bits = |r: &ClassificationReport| -> Vec<u64> {
        r.history.iter().flat_map(|e| [e.train_loss.to_bits(), e.train_acc.to_bits(), e.test_acc.to_bits()]).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(ma.params(), mb.params());
    let (_, c) = run(&TrainConfig { seed: 1, ..config }, &fx);
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn one_epoch_on_32_samples_lowers_the_loss() {
    let fx = fixture(32);
    let config = TrainConfig {
        batch_size: 8,
        epochs: 1,
        ..TrainConfig::default()
    };
    let before = set_loss(&Model::init(small_config(), 0).unwrap(), &fx.train, &fx.readout);
    let (model, _) = run(&config, &fx);
    let after = set_loss(&model, &fx.train, &fx.readout);
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn resuming_from_a_checkpoint_matches_an_uninterrupted_run() {
    let fx = fixture(30);
    let config = TrainConfig {
        batch_size: 10,
        epochs: 2,
        ..TrainConfig::default()
    };
    let (straight, _) = run(&config, &fx);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    let first = TrainConfig { epochs: 1, ..config };
    let mut model = Model::init(small_config(), 0).unwrap();
    let mut opt = OptimizerState::new(model.param_count());
    train_classification(&first, &mut model, &mut opt, &fx.train, &fx.test, &fx.readout, 0, &mut |_| {}).unwrap();
    let ckpt = Checkpoint::from_model(&model, serde_json::json!({}), Some(opt), 0, 1).unwrap();
    save_checkpoint(&path, &ckpt).unwrap();

    let loaded = load_checkpoint(&path).unwrap();
    let mut resumed = loaded.to_model().unwrap();
    let mut opt = loaded.optimizer.clone().unwrap();
    train_classification(&first, &mut resumed, &mut opt, &fx.train, &fx.test, &fx.readout, 1, &mut |_| {}).unwrap();
    assert_eq!(resumed.params(), straight.params());
}

#[test]
fn checkpoint_round_trip_preserves_evaluation() {
    let fx = fixture(20);
    let (model, _) = run(
        &TrainConfig {
            batch_size: 5,
            epochs: 1,
            ..TrainConfig::default()
        },
        &fx,
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let ckpt = Checkpoint::from_model(&model, serde_json::json!({"note": "x"}), None, 0, 1).unwrap();
    save_checkpoint(&path, &ckpt).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, ckpt);
    let restored = back.to_model().unwrap();
    let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
    assert_eq!(bits(restored.params()), bits(model.params()));
    let a = evaluate(&model, &fx.test, &fx.readout).unwrap();
    let b = evaluate(&restored, &fx.test, &fx.readout).unwrap();
    assert_eq!(a, b);
    assert!(std::fs::read_dir(dir.path()).unwrap().count() == 1, "temporary file left behind");
}

#[test]
fn checkpoint_errors_are_distinct() {
    let model = Model::init(small_config(), 0).unwrap();
    let ckpt = Checkpoint::from_model(&model, serde_json::json!({}), None, 0, 0).unwrap();
    let text = checkpoint_to_string(&ckpt).unwrap();

    let truncated = &text[..text.len() / 2];
    assert!(matches!(checkpoint_from_str(truncated), Err(Error::Checkpoint(CheckpointError::Parse(_)))));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["version"] = 99.into();
    let future = v.to_string();
    assert!(matches!(
        checkpoint_from_str(&future),
        Err(Error::Checkpoint(CheckpointError::Version { found: 99, .. }))
    ));

    let mut other = Model::init(ModelConfig { ports: 40, ..small_config() }, 0).unwrap();
    match ckpt.restore_into(&mut other) {
        Err(Error::Checkpoint(CheckpointError::SegmentShape { segment, .. })) => {
            assert_eq!(segment, "layer0.block0.mesh.theta")
        }
        other => panic!("{other:?}"),
    }

    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_checkpoint(dir.path().join("absent.json")), Err(Error::Io { .. })));
}

#[test]
fn checkpoint_floats_carry_seventeen_digits() {
    let model = Model::init(small_config(), 3).unwrap();
    let text = checkpoint_to_string(&Checkpoint::from_model(&model, serde_json::json!({}), None, 3, 0).unwrap()).unwrap();
    let v = model.params()[0];
    assert!(text.contains(&format!("{v:.16e}")));
}

fn zero_model() -> Model {
    let zero = DynamicsSpec::autonomous(vec![Block::Gain(ComplexGain::new(0.0, 0.0).unwrap())]).unwrap();
    Model::with_layers(ModelConfig::trajectory(), vec![zero]).unwrap()
}

#[test]
fn zero_dynamics_trajectory_mse_in_closed_form() {
    let task = TrajectoryTask::standard();
    let pred = predict_trajectory(&zero_model(), &task).unwrap();
    assert!(pred.iter().all(|&p| p == (0.6, 0.3)));
    let (mse, _) = trajectory_mse(&pred, &task.targets).unwrap();
    // mean over t of |exp((-0.1 + i) t) z0 - z0|^2 / 2, z0 = 0.6 + 0.3i
    let expected: f64 = (0..200)
        .map(|k| {
            let t = 25.0 * k as f64 / 199.0;
            let r = (-0.1 * t).exp();
            let (x, y) = (r * (0.6 * t.cos() - 0.3 * t.sin()), r * (0.6 * t.sin() + 0.3 * t.cos()));
            ((x - 0.6).powi(2) + (y - 0.3).powi(2)) / 2.0
        })
        .sum::<f64>()
        / 200.0;
    assert!((mse - expected).abs() < 1e-12, "{mse} vs {expected}");
}

#[test]
fn self_generated_targets_have_zero_mse() {
    let model = Model::init(ModelConfig::trajectory(), 7).unwrap();
    let task = TrajectoryTask::standard();
    let pred = predict_trajectory(&model, &task).unwrap();
    let task = task.with_targets(pred).unwrap();
    let (loss, grad) = trajectory_gradient(&model, &task).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn trajectory_training_lowers_the_loss() {
    let mut model = Model::init(ModelConfig::trajectory(), 0).unwrap();
    let mut opt = OptimizerState::new(model.param_count());
    let config = TrainConfig {
        learning_rate: 0.002,
        epochs: 50,
        ..TrainConfig::default()
    };
    let curriculum = Curriculum {
        start_points: 10,
        growth: 2.0,
    };
    let report = train_trajectory(&config, &curriculum, &mut model, &mut opt, &TrajectoryTask::standard(), &mut |_, _| {})
        .unwrap();
    assert_eq!(report.losses.len(), 50 * curriculum.horizons(200).len());
    assert_eq!(report.predicted.len(), 200);
    assert!(report.losses[49] < report.losses[0]);
}

#[test]
fn curriculum_horizons() {
    let c = Curriculum::default();
    let h = c.horizons(200);
    assert_eq!(h.first(), Some(&10));
    assert_eq!(h.last(), Some(&200));
    assert!(h.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(Curriculum::full().horizons(200), vec![200]);
    assert!(Curriculum { start_points: 0, growth: 1.5 }.validate().is_err());
    assert!(Curriculum { start_points: 5, growth: 1.0 }.validate().is_err());
}
