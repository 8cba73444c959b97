use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::blocks::{ActivationParams, Block, DiffractiveStackParams, MziMeshParams, PropagationSpec, Segment};
use crate::error::{Error, Result};
use crate::field::Fields;
use crate::odeflow::{
    backward, integrate, residual_backward, residual_batch, BatchSolve, CompiledDynamics, DynamicsGrad,
    DynamicsSpec, Method, OdeSolveConfig, Schedule, TimePolicy,
};

/// Largest activation tap fraction reachable by training.
pub const ALPHA_MAX: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Mzi,
    Dpu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    /// One chain of hidden layers used as `f` in an ODE solve.
    Onode,
    /// `layers` cascaded residual updates `h + f_l(h)`, one hidden layer each.
    Resnet,
    /// The chain of hidden layers applied once.
    Plain,
}

/// Starting point for MZI phases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshInit {
    /// All phases uniform in `[0, 2pi)`.
    #[default]
    Uniform,
    /// Units in the bar state, `phi` and output phases uniform.
    Bar,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpuConfig {
    pub metalines: usize,
    pub propagation: PropagationSpec,
    /// Follow each diffractive stack by an activation.
    pub activation: bool,
}

impl Default for DpuConfig {
    fn default() -> Self {
        Self {
            metalines: 4,
            propagation: PropagationSpec::default(),
            activation: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backend: Backend,
    pub mode: ModelMode,
    /// Hidden layers: in the chain for onode/plain, residual layers for resnet.
    pub layers: usize,
    pub ports: usize,
    pub solver: OdeSolveConfig,
    pub activation: ActivationParams,
    pub train_activation: bool,
    #[serde(default)]
    pub mesh_init: MeshInit,
    pub dpu: DpuConfig,
    #[serde(default)]
    pub time_policy: TimePolicy,
}

impl ModelConfig {
    pub fn mnist_mzi() -> Self {
        Self {
            backend: Backend::Mzi,
            mode: ModelMode::Onode,
            layers: 1,
            ports: 72,
            solver: OdeSolveConfig::new(Method::Rk4, 0.0, 1.0, 4),
            activation: ActivationParams::default(),
            train_activation: true,
            mesh_init: MeshInit::Uniform,
            dpu: DpuConfig::default(),
            time_policy: TimePolicy::Autonomous,
        }
    }

    pub fn mnist_dpu() -> Self {
        Self {
            backend: Backend::Dpu,
            ports: crate::data::DPU_SAMPLES,
            ..Self::mnist_mzi()
        }
    }

    pub fn trajectory() -> Self {
        Self {
            layers: 2,
            ports: 9,
            solver: OdeSolveConfig::new(Method::Rk4, 0.0, 25.0, 199),
            mesh_init: MeshInit::Bar,
            ..Self::mnist_mzi()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("model needs at least one hidden layer".into()));
        }
        if self.ports == 0 {
            return Err(Error::Config("model needs at least one port".into()));
        }
        if self.mode == ModelMode::Onode {
            self.solver.validate()?;
        }
        self.activation.validate()?;
        if self.backend == Backend::Dpu {
            if self.dpu.metalines == 0 {
                return Err(Error::Config("DPU needs at least one metaline".into()));
            }
            self.dpu.propagation.validate()?;
        }
        Ok(())
    }

    fn hidden_layer<R: rand::Rng>(&self, rng: &mut R) -> Result<Vec<Block>> {
        Ok(match self.backend {
            Backend::Mzi => vec![
                Block::Mesh(match self.mesh_init {
                    MeshInit::Uniform => MziMeshParams::random(self.ports, rng)?,
                    MeshInit::Bar => MziMeshParams::random_bar(self.ports, rng)?,
                }),
                Block::Activation(self.activation),
            ],
            Backend::Dpu => {
                let mut v = vec![Block::Diffractive(DiffractiveStackParams::random(
                    self.ports,
                    self.dpu.metalines,
                    self.dpu.propagation,
                    rng,
                )?)];
                if self.dpu.activation {
                    v.push(Block::Activation(self.activation));
                }
                v
            }
        })
    }

    fn layer_count(&self) -> usize {
        match self.mode {
            ModelMode::Resnet => self.layers,
            ModelMode::Onode | ModelMode::Plain => 1,
        }
    }
}

/// Trainable photonic network: dynamics layers plus how they are applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    layers: Vec<DynamicsSpec>,
}

impl Model {
    /// Random phases from a SplitMix64 stream seeded with `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SplitMix64::seed_from_u64(seed);
        let per_layer = match config.mode {
            ModelMode::Resnet => 1,
            ModelMode::Onode | ModelMode::Plain => config.layers,
        };
        let layers = (0..config.layer_count())
            .map(|_| {
                let mut chain = Vec::new();
                for _ in 0..per_layer {
                    chain.extend(config.hidden_layer(&mut rng)?);
                }
                DynamicsSpec::new(chain, config.time_policy)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, layers })
    }

    /// A model over caller-built dynamics (one per residual layer, otherwise one).
    pub fn with_layers(config: ModelConfig, layers: Vec<DynamicsSpec>) -> Result<Self> {
        config.validate()?;
        if layers.len() != config.layer_count() {
            return Err(Error::shape("model layers", config.layer_count(), layers.len()));
        }
        for l in &layers {
            l.check_ports(config.ports)?;
        }
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[DynamicsSpec] {
        &self.layers
    }

    pub fn port_count(&self) -> usize {
        self.config.ports
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DynamicsSpec::param_count).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(DynamicsSpec::params).collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape("model parameters", self.param_count(), flat.len()));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.param_count();
            l.set_params(&flat[offset..offset + n])?;
            offset += n;
        }
        Ok(())
    }

    /// Segments prefixed with `layer{l}.`.
    pub fn segments(&self) -> Vec<Segment> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, d)| {
                d.segments().into_iter().map(move |s| Segment {
                    name: format!("layer{l}.{}", s.name),
                    shape: s.shape,
                })
            })
            .collect()
    }

    /// `true` for every parameter updated by training.
    pub fn trainable_mask(&self) -> Vec<bool> {
        self.segments()
            .iter()
            .flat_map(|s| {
                let frozen = s.name.ends_with(".activation") && !self.config.train_activation;
                std::iter::repeat_n(!frozen, s.len())
            })
            .collect()
    }

    /// Clamps activation `alpha` entries of a flat parameter vector into
    /// `[0, ALPHA_MAX]` so an optimizer step cannot leave the valid range.
    pub fn project_params(&self, params: &mut [f64]) {
        let mut offset = 0;
        for s in self.segments() {
            if s.name.ends_with(".activation") {
                params[offset] = params[offset].clamp(0.0, ALPHA_MAX);
            }
            offset += s.len();
        }
    }

    /// Number of mesh or metaline copies physically needed.
    pub fn hidden_replicas(&self) -> usize {
        match self.config.mode {
            ModelMode::Resnet => self.layers.len(),
            ModelMode::Onode | ModelMode::Plain => self.config.layers,
        }
    }

    pub fn compile(&self) -> CompiledModel {
        CompiledModel {
            mode: self.config.mode,
            solver: self.config.solver,
            dynamics: self.layers.iter().map(DynamicsSpec::compile).collect(),
        }
    }
}

/// Forward record needed by [`CompiledModel::backward`].
#[derive(Clone, Debug)]
pub enum Tape {
    Onode { solve: BatchSolve, schedule: Schedule },
    Resnet { states: Vec<Fields> },
    Plain { input: Fields },
}

#[derive(Clone, Debug)]
pub struct CompiledModel {
    mode: ModelMode,
    solver: OdeSolveConfig,
    dynamics: Vec<CompiledDynamics>,
}

impl CompiledModel {
    pub fn check_input(&self, h0: &Fields) -> Result<()> {
        for d in &self.dynamics {
            d.check_ports(h0.ncols())?;
        }
        Ok(())
    }

    /// Output fields for a batch, and the tape for a later backward pass.
    pub fn forward(&self, h0: &Fields, keep_tape: bool) -> Result<(Fields, Option<Tape>)> {
        self.check_input(h0)?;
        Ok(match self.mode {
            ModelMode::Onode => {
                let schedule = Schedule::uniform(&self.solver);
                let save = keep_tape && self.solver.gradient_mode == crate::odeflow::GradientMode::Discretize;
                let solve = integrate(&self.dynamics[0], h0, &schedule, &self.solver, save);
                let out = solve.final_state().to_owned();
                (out, keep_tape.then_some(Tape::Onode { solve, schedule }))
            }
            ModelMode::Resnet => {
                let mut states = residual_batch(&self.dynamics, h0);
                let out = states.last().expect("input is kept").to_owned();
                if !keep_tape {
                    states.clear();
                }
                (out, keep_tape.then_some(Tape::Resnet { states }))
            }
            ModelMode::Plain => {
                let out = self.dynamics[0].eval(h0, 0.0);
                (out, keep_tape.then(|| Tape::Plain { input: h0.to_owned() }))
            }
        })
    }

    /// States at each of `times` (ODE mode only).
    pub fn sample(&self, h0: &Fields, times: &[f64], keep_tape: bool) -> Result<(Vec<Fields>, Option<Tape>)> {
        self.check_input(h0)?;
        if self.mode != ModelMode::Onode {
            return Err(Error::Config("trajectory sampling needs the onode mode".into()));
        }
        let schedule = Schedule::sampled(times, &self.solver)?;
        let save = keep_tape && self.solver.gradient_mode == crate::odeflow::GradientMode::Discretize;
        let solve = integrate(&self.dynamics[0], h0, &schedule, &self.solver, save);
        let obs = solve.observations.clone();
        Ok((obs, keep_tape.then_some(Tape::Onode { solve, schedule })))
    }

    /// Per-layer parameter gradients for observation cotangents (one for
    /// [`forward`](Self::forward), one per time for [`sample`](Self::sample)).
    pub fn backward(&self, tape: &Tape, cotangents: &[Fields]) -> Result<Vec<DynamicsGrad>> {
        match tape {
            Tape::Onode { solve, schedule } => {
                let (_, g) = backward(&self.dynamics[0], solve, schedule, &self.solver, cotangents)?;
                Ok(vec![g])
            }
            Tape::Resnet { states } => {
                let gy = single(cotangents)?;
                Ok(residual_backward(&self.dynamics, states, gy).1)
            }
            Tape::Plain { input } => {
                let gy = single(cotangents)?;
                let mut g = self.dynamics[0].zero_grad();
                self.dynamics[0].eval_and_pullback(input, 0.0, gy, &mut g, 1.0);
                Ok(vec![g])
            }
        }
    }

    /// Flat gradient in [`Model::params`] layout.
    pub fn finalize(&self, grads: &[DynamicsGrad]) -> Vec<f64> {
        self.dynamics
            .iter()
            .zip(grads)
            .flat_map(|(d, g)| d.finalize(g))
            .collect()
    }
}

fn single(cotangents: &[Fields]) -> Result<&Fields> {
    match cotangents {
        [c] => Ok(c),
        _ => Err(Error::shape("output cotangents", 1, cotangents.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_sizes() {
        let m = Model::init(ModelConfig::mnist_mzi(), 0).unwrap();
        assert_eq!(m.param_count(), 2 * 2556 + 72 + 3);
        let d = Model::init(ModelConfig::mnist_dpu(), 0).unwrap();
        assert_eq!(d.param_count(), 1600);
        let mut cfg = ModelConfig::mnist_mzi();
        cfg.mode = ModelMode::Resnet;
        cfg.layers = 2;
        let r = Model::init(cfg, 0).unwrap();
        assert_eq!(r.layers().len(), 2);
        assert_eq!(r.hidden_replicas(), 2);
        let t = Model::init(ModelConfig::trajectory(), 0).unwrap();
        assert_eq!(t.layers()[0].chain().len(), 4);
    }

    #[test]
    fn mask_freezes_activation() {
        let mut cfg = ModelConfig::trajectory();
        cfg.train_activation = false;
        let m = Model::init(cfg, 1).unwrap();
        let mask = m.trainable_mask();
        assert_eq!(mask.len(), m.param_count());
        assert_eq!(mask.iter().filter(|&&b| !b).count(), 6);
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = Model::init(ModelConfig::trajectory(), 5).unwrap();
        assert_eq!(a, Model::init(ModelConfig::trajectory(), 5).unwrap());
        assert_ne!(a.params(), Model::init(ModelConfig::trajectory(), 6).unwrap().params());
    }
}
