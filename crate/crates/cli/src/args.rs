use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "onode", version, about = "Train and evaluate optical neural ODE models on simulated photonic hardware")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an MNIST classifier on the MZI or DPU backend.
    TrainMnist(Shared),
    /// Fit the spiral trajectory with a continuous-time model.
    TrainTrajectory(Shared),
    /// Recompute test metrics from a checkpoint.
    Eval(EvalArgs),
    /// Report MZI/metaline counts, active area and latency.
    HardwareReport(Shared),
    /// Merge the metric files of a run directory into one summary.
    Export(ExportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendArg {
    Mzi,
    Dpu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Onode,
    Resnet,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverArg {
    Euler,
    Midpoint,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradArg {
    Adjoint,
    Discretize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshInitArg {
    Uniform,
    Bar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingArg {
    Complex,
    Magnitude,
}

/// Settings that may come from a `--config` JSON file or from flags.
/// Every field is optional; unset fields keep the built-in default.
#[derive(Clone, Debug, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// RNG seed for initialization and shuffling [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: runs/<command>]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory holding the four MNIST IDX files [default: data/mnist]
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Photonic backend [default: mzi]
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Model mode [default: onode]
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Hidden layers (chain length for onode/plain, depth for resnet) [default: 1; trajectory 2]
    #[arg(long)]
    pub layers: Option<usize>,
    /// Waveguide ports or DPU samples [default: 72 mzi, 400 dpu, 9 trajectory]
    #[arg(long)]
    pub ports: Option<usize>,
    /// Fixed-step solver [default: rk4]
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Solver steps over the time span [default: 4; trajectory 199]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Gradient mode [default: discretize for steps <= 8, adjoint otherwise]
    #[arg(long, value_enum)]
    pub grad: Option<GradArg>,
    /// Training epochs; full-batch updates per horizon stage for the trajectory task [default: 30; trajectory 600]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate [default: 0.01; trajectory 0.002]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size [default: 100]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Use only the first N training images [default: all]
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Use only the first N test images [default: all]
    #[arg(long)]
    pub test_limit: Option<usize>,
    /// Central Fourier crop size [default: 6 mzi, 4 dpu]
    #[arg(long)]
    pub crop: Option<usize>,
    /// Input encoding of Fourier coefficients [default: complex]
    #[arg(long, value_enum)]
    pub encoding: Option<EncodingArg>,
    /// Mean input energy per training image [default: 30 mzi, 30 dpu]
    #[arg(long)]
    pub input_energy: Option<f64>,
    /// Train the activation constants [default: true]
    #[arg(long)]
    pub train_activation: Option<bool>,
    /// Activation tap fraction [default: 0.1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Activation phase gain [default: pi]
    #[arg(long)]
    pub gain: Option<f64>,
    /// Activation phase bias [default: pi]
    #[arg(long)]
    pub phase_bias: Option<f64>,
    /// MZI phase initialization [default: uniform; trajectory bar]
    #[arg(long, value_enum)]
    pub mesh_init: Option<MeshInitArg>,
    /// Trajectory samples fitted by the first horizon stage [default: 10]
    #[arg(long)]
    pub horizon_start: Option<usize>,
    /// Growth factor of the fitted horizon between stages [default: 1.2]
    #[arg(long)]
    pub horizon_growth: Option<f64>,
    /// Metalines per DPU stack [default: 4]
    #[arg(long)]
    pub metalines: Option<usize>,
    /// Follow each DPU stack by an activation [default: false]
    #[arg(long)]
    pub dpu_activation: Option<bool>,
    /// Residual depth of the comparison network in hardware reports [default: 2]
    #[arg(long)]
    pub compare_layers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Shared {
    /// JSON file with any of the settings below; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by a training command
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Run directory written by a training command
    pub run_dir: PathBuf,
    /// Destination [default: <run_dir>/export]
    #[arg(long)]
    pub out: Option<PathBuf>,
}
