use std::path::{Path, PathBuf};

use onode::data::{load_mnist_split, mnist_paths, Preprocessor, Split, TrajectoryTask};
use onode::field::{ReadoutSpec, CLASS_COUNT};
use onode::hardware::{hardware_report, Architecture};
use onode::train::{
    confusion_csv, energy_csv, evaluate, history_csv, load_checkpoint, parse_history_csv, predict_trajectory,
    save_checkpoint, train_classification, train_trajectory, trajectory_csv, trajectory_mse, Backend, Checkpoint,
    ClassificationSet, EpochRecord, Model, OptimizerState, Placement,
};
use serde::{Deserialize, Serialize};

use crate::args::{EvalArgs, ExportArgs, Shared};
use crate::config::{merge, read_overrides, resolve, CommandKind, RunConfig, Task};
use crate::error::{CliError, CliResult};
use crate::lock::RunLock;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const ENERGY_FILE: &str = "energy.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const LOSSES_FILE: &str = "losses.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const HARDWARE_FILE: &str = "hardware_report.json";

/// What a checkpoint stores besides parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct StoredRun {
    run: RunConfig,
    crop_scale: Option<f64>,
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn check_data(dir: &Path) -> CliResult<()> {
    let missing: Vec<String> = mnist_paths(dir)
        .into_iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Io(format!("missing MNIST files: {}", missing.join(", "))))
    }
}

fn limited(ds: onode::data::ImageDataset, limit: Option<usize>) -> onode::data::ImageDataset {
    match limit {
        Some(n) => ds.head(n),
        None => ds,
    }
}

fn placement(run: &RunConfig) -> Placement {
    match run.model.backend {
        Backend::Mzi => Placement::Ports {
            port_count: run.model.ports,
        },
        Backend::Dpu => Placement::Dpu,
    }
}

fn test_set(run: &RunConfig, pre: &Preprocessor) -> CliResult<ClassificationSet> {
    let test = limited(load_mnist_split(&run.data_dir, Split::Test)?, run.test_limit);
    Ok(ClassificationSet::encode(&test, pre, placement(run))?)
}

pub fn train_mnist(args: &Shared) -> CliResult<()> {
    let run = resolve(CommandKind::TrainMnist, args.config.as_deref(), &args.overrides)?;
    check_data(&run.data_dir)?;
    let _lock = RunLock::acquire(&run.out)?;
    let train_ds = limited(load_mnist_split(&run.data_dir, Split::Train)?, run.train_limit);
    let pre = Preprocessor::fit(run.preprocess, &train_ds)?;
    let train = ClassificationSet::encode(&train_ds, &pre, placement(&run))?;
    let test = test_set(&run, &pre)?;
    let readout = ReadoutSpec::centered(run.model.ports)?;
    let mut model = Model::init(run.model, run.train.seed)?;
    let mut opt = OptimizerState::new(model.param_count());
    eprintln!(
        "training {} parameters on {} images, testing on {}",
        model.param_count(),
        train.len(),
        test.len()
    );
    let report = train_classification(
        &run.train,
        &mut model,
        &mut opt,
        &train,
        &test,
        &readout,
        0,
        &mut |r: &EpochRecord| {
            eprintln!(
                "epoch {:>3}  loss {:.5}  train acc {:.4}  test acc {:.4}",
                r.epoch, r.train_loss, r.train_acc, r.test_acc
            )
        },
    )?;
    let stored = StoredRun {
        run: run.clone(),
        crop_scale: Some(pre.scale()),
    };
    write(&run.out.join(CONFIG_FILE), &to_json(&stored))?;
    write(&run.out.join(METRICS_FILE), &history_csv(&report.history))?;
    write(&run.out.join(CONFUSION_FILE), &confusion_csv(&report.metrics))?;
    write(&run.out.join(ENERGY_FILE), &energy_csv(&report.metrics))?;
    let ckpt = Checkpoint::from_model(
        &model,
        serde_json::to_value(&stored).expect("plain data"),
        Some(opt),
        run.train.seed,
        run.train.epochs,
    )?;
    save_checkpoint(run.out.join(CHECKPOINT_FILE), &ckpt)?;
    println!("final test accuracy: {}", report.metrics.accuracy);
    Ok(())
}

#[derive(Serialize)]
struct TrajectorySummary {
    final_mse: f64,
    epochs: usize,
}

pub fn train_trajectory_cmd(args: &Shared) -> CliResult<()> {
    let run = resolve(CommandKind::TrainTrajectory, args.config.as_deref(), &args.overrides)?;
    let _lock = RunLock::acquire(&run.out)?;
    let task = TrajectoryTask::standard();
    let mut model = Model::init(run.model, run.train.seed)?;
    let mut opt = OptimizerState::new(model.param_count());
    let report = train_trajectory(&run.train, &run.curriculum, &mut model, &mut opt, &task, &mut |epoch, loss| {
        if epoch % 500 == 0 {
            eprintln!("step {epoch:>5}  mse {loss:.6e}");
        }
    })?;
    let stored = StoredRun {
        run: run.clone(),
        crop_scale: None,
    };
    write(&run.out.join(CONFIG_FILE), &to_json(&stored))?;
    write(
        &run.out.join(TRAJECTORY_FILE),
        &trajectory_csv(&task.times, &report.predicted, &task.targets),
    )?;
    let mut losses = String::from("epoch,mse\n");
    for (i, l) in report.losses.iter().enumerate() {
        losses.push_str(&format!("{i},{l}\n"));
    }
    write(&run.out.join(LOSSES_FILE), &losses)?;
    write(
        &run.out.join(SUMMARY_FILE),
        &to_json(&TrajectorySummary {
            final_mse: report.final_mse,
            epochs: run.train.epochs,
        }),
    )?;
    let ckpt = Checkpoint::from_model(
        &model,
        serde_json::to_value(&stored).expect("plain data"),
        Some(opt),
        run.train.seed,
        run.train.epochs,
    )?;
    save_checkpoint(run.out.join(CHECKPOINT_FILE), &ckpt)?;
    println!("final MSE: {}", report.final_mse);
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary {
    task: Task,
    accuracy: Option<f64>,
    mse: Option<f64>,
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let stored: StoredRun = serde_json::from_value(ckpt.config.clone())
        .map_err(|e| CliError::Config(format!("checkpoint carries no run configuration: {e}")))?;
    let file = match &args.shared.config {
        Some(p) => read_overrides(p)?,
        None => Default::default(),
    };
    let ov = merge(file, &args.shared.overrides);
    let default_out = args
        .checkpoint
        .parent()
        .map_or_else(|| PathBuf::from("eval"), |p| p.join("eval"));
    let mut run = stored.run.clone().apply(&ov);
    if ov.out.is_none() {
        run.out = default_out;
    }
    run.validate()?;
    let mut model = Model::init(run.model, ckpt.seed)?;
    ckpt.restore_into(&mut model)?;
    let summary = match run.task {
        Task::MnistMzi | Task::MnistDpu => {
            check_data(&run.data_dir)?;
            let scale = stored
                .crop_scale
                .ok_or_else(|| CliError::Config("checkpoint has no crop scale".into()))?;
            let pre = Preprocessor::with_scale(run.preprocess, scale)?;
            let test = test_set(&run, &pre)?;
            let metrics = evaluate(&model, &test, &ReadoutSpec::centered(run.model.ports)?)?;
            let _lock = RunLock::acquire(&run.out)?;
            write(&run.out.join(CONFUSION_FILE), &confusion_csv(&metrics))?;
            write(&run.out.join(ENERGY_FILE), &energy_csv(&metrics))?;
            println!("test accuracy: {}", metrics.accuracy);
            EvalSummary {
                task: run.task,
                accuracy: Some(metrics.accuracy),
                mse: None,
            }
        }
        Task::Trajectory => {
            let task = TrajectoryTask::standard();
            let pred = predict_trajectory(&model, &task)?;
            let (mse, _) = trajectory_mse(&pred, &task.targets)?;
            let _lock = RunLock::acquire(&run.out)?;
            write(&run.out.join(TRAJECTORY_FILE), &trajectory_csv(&task.times, &pred, &task.targets))?;
            println!("MSE: {mse}");
            EvalSummary {
                task: run.task,
                accuracy: None,
                mse: Some(mse),
            }
        }
        Task::Hardware => return Err(CliError::Config("hardware runs have no checkpoint to evaluate".into())),
    };
    write(&run.out.join("eval.json"), &to_json(&summary))
}

pub fn hardware(args: &Shared) -> CliResult<()> {
    let run = resolve(CommandKind::HardwareReport, args.config.as_deref(), &args.overrides)?;
    let arch = Architecture {
        backend: run.model.backend,
        mode: run.model.mode,
        ports: run.model.ports,
        layers: run.model.layers,
        metalines: run.model.dpu.metalines,
        pitch_um: run.model.dpu.propagation.pitch * 1e6,
        method: run.model.solver.method,
        steps: run.model.solver.steps,
        compare_resnet_layers: run.compare_layers,
    };
    let report = hardware_report(&arch)?;
    let _lock = RunLock::acquire(&run.out)?;
    write(&run.out.join(HARDWARE_FILE), &to_json(&report))?;
    println!("backend            {:?}", arch.backend);
    println!("mode               {:?}", arch.mode);
    println!("hidden replicas    {}", report.hidden_replicas);
    match arch.backend {
        Backend::Mzi => {
            println!("MZI count          {}", report.mzi_count);
            println!("MZI area           {} um^2", report.mzi_area_um2);
        }
        Backend::Dpu => {
            println!("metalines          {}", report.metaline_count);
            println!("metaline area      {} um^2", report.metaline_area_um2);
        }
    }
    println!("step time          {} ps", report.step_time_ps);
    println!("passes/inference   {}", report.passes_per_inference);
    println!("latency            {} ps", report.latency_ps);
    println!(
        "area vs {}-layer resnet  {}",
        arch.compare_resnet_layers, report.area_ratio_vs_resnet
    );
    Ok(())
}

#[derive(Serialize)]
struct ClassificationExport {
    kind: &'static str,
    final_test_accuracy: f64,
    epochs: Vec<EpochRecord>,
    confusion: Vec<Vec<u64>>,
    energy_distribution: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct TrajectoryExport {
    kind: &'static str,
    final_mse: f64,
    losses: Vec<f64>,
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_grid<T: std::str::FromStr>(path: &Path) -> CliResult<Vec<Vec<T>>> {
    let text = read(path)?;
    let bad = || CliError::Io(format!("{}: malformed matrix", path.display()));
    let rows: Vec<Vec<T>> = text
        .lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').skip(1).map(|v| v.parse().map_err(|_| bad())).collect())
        .collect::<CliResult<_>>()?;
    if rows.len() != CLASS_COUNT || rows.iter().any(|r| r.len() != CLASS_COUNT) {
        return Err(bad());
    }
    Ok(rows)
}

fn copy(from: &Path, to: &Path) -> CliResult<()> {
    std::fs::copy(from, to).map(|_| ()).map_err(|e| CliError::io(from, e))
}

pub fn export(args: &ExportArgs) -> CliResult<()> {
    let dir = &args.run_dir;
    let out = args.out.clone().unwrap_or_else(|| dir.join("export"));
    let has = |f: &str| dir.join(f).is_file();
    if has(METRICS_FILE) && has(CONFUSION_FILE) && has(ENERGY_FILE) {
        let epochs = parse_history_csv(&read(&dir.join(METRICS_FILE))?).map_err(|e| CliError::Io(e.to_string()))?;
        let last = epochs
            .last()
            .ok_or_else(|| CliError::Io(format!("{} has no epochs", dir.join(METRICS_FILE).display())))?;
        let summary = ClassificationExport {
            kind: "classification",
            final_test_accuracy: last.test_acc,
            confusion: parse_grid(&dir.join(CONFUSION_FILE))?,
            energy_distribution: parse_grid(&dir.join(ENERGY_FILE))?,
            epochs,
        };
        let _lock = RunLock::acquire(&out)?;
        write(&out.join(SUMMARY_FILE), &to_json(&summary))?;
        for f in [METRICS_FILE, CONFUSION_FILE, ENERGY_FILE] {
            copy(&dir.join(f), &out.join(f))?;
        }
    } else if has(TRAJECTORY_FILE) && has(LOSSES_FILE) && has(SUMMARY_FILE) {
        let v: serde_json::Value = serde_json::from_str(&read(&dir.join(SUMMARY_FILE))?)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.join(SUMMARY_FILE).display())))?;
        let final_mse = v
            .get("final_mse")
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| CliError::Io("summary.json has no final_mse".into()))?;
        let losses = read(&dir.join(LOSSES_FILE))?
            .lines()
            .skip(1)
            .filter_map(|l| l.split(',').nth(1).and_then(|v| v.parse().ok()))
            .collect();
        let summary = TrajectoryExport {
            kind: "trajectory",
            final_mse,
            losses,
        };
        let _lock = RunLock::acquire(&out)?;
        write(&out.join(SUMMARY_FILE), &to_json(&summary))?;
        for f in [TRAJECTORY_FILE, LOSSES_FILE] {
            copy(&dir.join(f), &out.join(f))?;
        }
    } else {
        return Err(CliError::Io(format!(
            "{} holds no run output; expected {METRICS_FILE}, {CONFUSION_FILE} and {ENERGY_FILE} (classification) \
             or {TRAJECTORY_FILE}, {LOSSES_FILE} and {SUMMARY_FILE} (trajectory)",
            dir.display()
        )));
    }
    println!("wrote {}", out.join(SUMMARY_FILE).display());
    Ok(())
}
