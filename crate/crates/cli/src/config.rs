use std::path::{Path, PathBuf};

use onode::data::{Encoding, PreprocessConfig, DPU_SAMPLES, SPIRAL_SPAN};
use onode::odeflow::{GradientMode, Method, OdeSolveConfig};
use onode::train::{Backend, Curriculum, MeshInit, ModelConfig, ModelMode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::args::{BackendArg, EncodingArg, GradArg, MeshInitArg, ModeArg, Overrides, SolverArg};
use crate::error::{CliError, CliResult};

/// Mean input energy per training image for the classification tasks.
pub const DEFAULT_INPUT_ENERGY: f64 = 30.0;
/// Full-batch updates per horizon stage for the trajectory task.
pub const DEFAULT_TRAJECTORY_EPOCHS: usize = 600;
pub const DEFAULT_TRAJECTORY_LR: f64 = 0.002;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    MnistMzi,
    MnistDpu,
    Trajectory,
    Hardware,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    TrainMnist,
    TrainTrajectory,
    HardwareReport,
}

impl CommandKind {
    fn default_out(self) -> &'static str {
        match self {
            CommandKind::TrainMnist => "runs/train-mnist",
            CommandKind::TrainTrajectory => "runs/train-trajectory",
            CommandKind::HardwareReport => "runs/hardware-report",
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub curriculum: Curriculum,
    pub preprocess: PreprocessConfig,
    pub data_dir: PathBuf,
    pub out: PathBuf,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub compare_layers: usize,
}

impl RunConfig {
    pub fn defaults(command: CommandKind, backend: BackendArg) -> Self {
        let (task, model, preprocess) = match (command, backend) {
            (CommandKind::TrainTrajectory, _) => (Task::Trajectory, ModelConfig::trajectory(), PreprocessConfig::mzi()),
            (CommandKind::HardwareReport, BackendArg::Mzi) => (Task::Hardware, ModelConfig::mnist_mzi(), PreprocessConfig::mzi()),
            (CommandKind::HardwareReport, BackendArg::Dpu) => (Task::Hardware, ModelConfig::mnist_dpu(), PreprocessConfig::dpu()),
            (CommandKind::TrainMnist, BackendArg::Mzi) => (Task::MnistMzi, ModelConfig::mnist_mzi(), PreprocessConfig::mzi()),
            (CommandKind::TrainMnist, BackendArg::Dpu) => (Task::MnistDpu, ModelConfig::mnist_dpu(), PreprocessConfig::dpu()),
        };
        let mut train = TrainConfig::default();
        if task == Task::Trajectory {
            train.epochs = DEFAULT_TRAJECTORY_EPOCHS;
            train.learning_rate = DEFAULT_TRAJECTORY_LR;
        }
        Self {
            task,
            model,
            train,
            curriculum: Curriculum::default(),
            preprocess: PreprocessConfig {
                target_energy: DEFAULT_INPUT_ENERGY,
                ..preprocess
            },
            data_dir: PathBuf::from("data/mnist"),
            out: PathBuf::from(command.default_out()),
            train_limit: None,
            test_limit: None,
            compare_layers: 2,
        }
    }

    /// Applies every set field of `ov` on top of `self`.
    pub fn apply(mut self, ov: &Overrides) -> Self {
        let m = &mut self.model;
        if let Some(b) = ov.backend {
            m.backend = match b {
                BackendArg::Mzi => Backend::Mzi,
                BackendArg::Dpu => Backend::Dpu,
            };
        }
        if let Some(mode) = ov.mode {
            m.mode = match mode {
                ModeArg::Onode => ModelMode::Onode,
                ModeArg::Resnet => ModelMode::Resnet,
                ModeArg::Plain => ModelMode::Plain,
            };
        }
        set(&mut m.layers, ov.layers);
        set(&mut m.ports, ov.ports);
        if let Some(s) = ov.solver {
            m.solver.method = match s {
                SolverArg::Euler => Method::Euler,
                SolverArg::Midpoint => Method::Midpoint,
                SolverArg::Rk4 => Method::Rk4,
            };
        }
        if let Some(k) = ov.steps {
            m.solver.steps = k;
            m.solver.gradient_mode = GradientMode::default_for_steps(k);
        }
        if let Some(g) = ov.grad {
            m.solver.gradient_mode = match g {
                GradArg::Adjoint => GradientMode::Adjoint,
                GradArg::Discretize => GradientMode::Discretize,
            };
        }
        set(&mut m.train_activation, ov.train_activation);
        set(&mut m.activation.alpha, ov.alpha);
        set(&mut m.activation.gain, ov.gain);
        set(&mut m.activation.phase_bias, ov.phase_bias);
        if let Some(i) = ov.mesh_init {
            m.mesh_init = match i {
                MeshInitArg::Uniform => MeshInit::Uniform,
                MeshInitArg::Bar => MeshInit::Bar,
            };
        }
        set(&mut m.dpu.metalines, ov.metalines);
        set(&mut m.dpu.activation, ov.dpu_activation);
        let t = &mut self.train;
        set(&mut t.seed, ov.seed);
        set(&mut t.epochs, ov.epochs);
        set(&mut t.learning_rate, ov.lr);
        set(&mut t.batch_size, ov.batch);
        set(&mut self.curriculum.start_points, ov.horizon_start);
        set(&mut self.curriculum.growth, ov.horizon_growth);
        let p = &mut self.preprocess;
        set(&mut p.crop_size, ov.crop);
        set(&mut p.target_energy, ov.input_energy);
        if let Some(e) = ov.encoding {
            p.encoding = match e {
                EncodingArg::Complex => Encoding::Complex,
                EncodingArg::Magnitude => Encoding::Magnitude,
            };
        }
        if let Some(d) = &ov.data_dir {
            self.data_dir = d.clone();
        }
        if let Some(o) = &ov.out {
            self.out = o.clone();
        }
        if ov.train_limit.is_some() {
            self.train_limit = ov.train_limit;
        }
        if ov.test_limit.is_some() {
            self.test_limit = ov.test_limit;
        }
        set(&mut self.compare_layers, ov.compare_layers);
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        let cfg = |e: onode::error::Error| CliError::Config(e.to_string());
        self.model.validate().map_err(cfg)?;
        self.train.validate().map_err(cfg)?;
        self.curriculum.validate().map_err(cfg)?;
        if self.train.learning_rate <= 0.0 {
            return Err(CliError::Config(format!(
                "learning rate must be positive, got {}",
                self.train.learning_rate
            )));
        }
        if self.train_limit == Some(0) || self.test_limit == Some(0) {
            return Err(CliError::Config("dataset limits must be at least 1".into()));
        }
        if self.compare_layers == 0 {
            return Err(CliError::Config("comparison depth must be at least 1".into()));
        }
        match self.task {
            Task::MnistMzi | Task::MnistDpu => {
                self.preprocess.validate().map_err(cfg)?;
                let k = self.preprocess.crop_size;
                match self.model.backend {
                    Backend::Mzi if k * k > self.model.ports => {
                        return Err(CliError::Config(format!(
                            "{k}x{k} crop needs {} ports, only {} configured",
                            k * k,
                            self.model.ports
                        )))
                    }
                    Backend::Dpu if self.model.ports != DPU_SAMPLES || k != 4 => {
                        return Err(CliError::Config(format!(
                            "the DPU pipeline needs a 4x4 crop and {DPU_SAMPLES} samples (got crop {k}, {} samples)",
                            self.model.ports
                        )))
                    }
                    _ => {}
                }
                if self.model.ports < onode::field::CLASS_COUNT {
                    return Err(CliError::Config("need at least 10 output ports".into()));
                }
            }
            Task::Trajectory => {
                if self.model.backend != Backend::Mzi || self.model.mode != ModelMode::Onode {
                    return Err(CliError::Config(
                        "the trajectory task runs the MZI backend in onode mode".into(),
                    ));
                }
            }
            Task::Hardware => {}
        }
        Ok(())
    }

    /// Solver span covering the trajectory samples.
    pub fn fix_trajectory_span(&mut self) {
        if self.task == Task::Trajectory {
            self.model.solver = OdeSolveConfig {
                t0: 0.0,
                t1: SPIRAL_SPAN,
                ..self.model.solver
            };
        }
    }
}

fn set<T: Clone>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

/// Reads a `--config` file.
pub fn read_overrides(path: &Path) -> CliResult<Overrides> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Flags on top of the config file.
pub fn merge(file: Overrides, flags: &Overrides) -> Overrides {
    macro_rules! pick {
        ($($f:ident),*) => { Overrides { $($f: flags.$f.clone().or(file.$f),)* } };
    }
    pick!(
        seed, out, data_dir, backend, mode, layers, ports, solver, steps, grad, epochs, lr, batch, train_limit,
        test_limit, crop, encoding, input_energy, train_activation, alpha, gain, phase_bias, mesh_init,
        horizon_start, horizon_growth, metalines,
        dpu_activation, compare_layers
    )
}

/// Built-in defaults, then the config file, then flags; validated.
pub fn resolve(command: CommandKind, config: Option<&Path>, flags: &Overrides) -> CliResult<RunConfig> {
    let file = match config {
        Some(p) => read_overrides(p)?,
        None => Overrides::default(),
    };
    let ov = merge(file, flags);
    let mut run = RunConfig::defaults(command, ov.backend.unwrap_or(BackendArg::Mzi)).apply(&ov);
    run.fix_trajectory_span();
    run.validate()?;
    Ok(run)
}
