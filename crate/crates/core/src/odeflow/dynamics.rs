use ndarray::Zip;
use serde::{Deserialize, Serialize};

use crate::blocks::{Block, BlockGrad, CompiledBlock, Segment};
use crate::error::{Error, Result};
use crate::field::{Fields, OpticalState, C64};

/// How the time argument enters the right-hand side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum TimePolicy {
    /// `f(h, t) = chain(h)`.
    #[default]
    Autonomous,
    /// `f(h, t) = chain(exp(i omega0 t) h)`.
    TimeInjected { omega0: f64 },
}

/// Ordered chain of photonic blocks defining `dh/dt = f(h, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSpec {
    chain: Vec<Block>,
    #[serde(default)]
    time_policy: TimePolicy,
}

impl DynamicsSpec {
    pub fn new(chain: Vec<Block>, time_policy: TimePolicy) -> Result<Self> {
        let mut ports: Option<usize> = None;
        for (i, b) in chain.iter().enumerate() {
            if let (Some(expected), Some(found)) = (ports, b.port_count()) {
                if expected != found {
                    return Err(Error::shape(format!("chain block {i} ({})", b.kind()), expected, found));
                }
            }
            ports = ports.or(b.port_count());
        }
        if let TimePolicy::TimeInjected { omega0 } = time_policy {
            if !omega0.is_finite() {
                return Err(Error::Config("time-injection frequency must be finite".into()));
            }
        }
        Ok(Self { chain, time_policy })
    }

    pub fn autonomous(chain: Vec<Block>) -> Result<Self> {
        Self::new(chain, TimePolicy::Autonomous)
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    pub fn chain_mut(&mut self) -> &mut [Block] {
        &mut self.chain
    }

    pub fn time_policy(&self) -> TimePolicy {
        self.time_policy
    }

    /// Port count fixed by the chain, if any block binds one.
    pub fn port_count(&self) -> Option<usize> {
        self.chain.iter().find_map(Block::port_count)
    }

    pub fn param_count(&self) -> usize {
        self.chain.iter().map(Block::param_count).sum()
    }

    /// Concatenation of each block's parameters in chain order.
    pub fn params(&self) -> Vec<f64> {
        self.chain.iter().flat_map(Block::params).collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape("dynamics parameters", self.param_count(), flat.len()));
        }
        let mut offset = 0;
        for b in &mut self.chain {
            let n = b.param_count();
            b.set_params(&flat[offset..offset + n])?;
            offset += n;
        }
        Ok(())
    }

    /// Segments prefixed with `block{i}.{kind}.`.
    pub fn segments(&self) -> Vec<Segment> {
        self.chain
            .iter()
            .enumerate()
            .flat_map(|(i, b)| {
                b.segments().into_iter().map(move |s| Segment {
                    name: format!("block{i}.{}.{}", b.kind(), s.name),
                    shape: s.shape,
                })
            })
            .collect()
    }

    pub fn check_ports(&self, ports: usize) -> Result<()> {
        match self.port_count() {
            Some(n) if n != ports => Err(Error::shape("dynamics input", n, ports)),
            _ => Ok(()),
        }
    }

    pub fn compile(&self) -> CompiledDynamics {
        CompiledDynamics {
            blocks: self.chain.iter().map(Block::compile).collect(),
            time_policy: self.time_policy,
            ports: self.port_count(),
        }
    }
}

/// Gradient accumulators for every block of a chain.
pub type DynamicsGrad = Vec<BlockGrad>;

/// A [`DynamicsSpec`] with block operators prepared for batched evaluation.
#[derive(Clone, Debug)]
pub struct CompiledDynamics {
    blocks: Vec<CompiledBlock>,
    time_policy: TimePolicy,
    ports: Option<usize>,
}

impl CompiledDynamics {
    pub fn port_count(&self) -> Option<usize> {
        self.ports
    }

    pub fn check_ports(&self, ports: usize) -> Result<()> {
        match self.ports {
            Some(n) if n != ports => Err(Error::shape("dynamics input", n, ports)),
            _ => Ok(()),
        }
    }

    fn injection(&self, t: f64) -> Option<C64> {
        match self.time_policy {
            TimePolicy::Autonomous => None,
            TimePolicy::TimeInjected { omega0 } => Some(C64::from_polar(1.0, omega0 * t)),
        }
    }

    /// `f(h, t)` for every row of `h`.
    pub fn eval(&self, h: &Fields, t: f64) -> Fields {
        let mut x = match self.injection(t) {
            Some(e) => h.mapv(|v| v * e),
            None => h.to_owned(),
        };
        for b in &self.blocks {
            x = b.forward(&x);
        }
        x
    }

    pub fn zero_grad(&self) -> DynamicsGrad {
        self.blocks.iter().map(CompiledBlock::zero_grad).collect()
    }

    /// Evaluates `f(h, t)` and pulls `gy` back through it. Returns
    /// `(f(h, t), dh)`; parameter sensitivities times `weight` go to `grad`.
    pub fn eval_and_pullback(
        &self,
        h: &Fields,
        t: f64,
        gy: &Fields,
        grad: &mut DynamicsGrad,
        weight: f64,
    ) -> (Fields, Fields) {
        let injection = self.injection(t);
        let mut inputs = Vec::with_capacity(self.blocks.len());
        let mut x = match injection {
            Some(e) => h.mapv(|v| v * e),
            None => h.to_owned(),
        };
        for b in &self.blocks {
            let y = b.forward(&x);
            inputs.push(x);
            x = y;
        }
        let out = x;
        let mut g = gy.to_owned();
        for ((b, input), acc) in self.blocks.iter().zip(&inputs).zip(grad.iter_mut()).rev() {
            g = b.pullback(input, &g, acc, weight);
        }
        if let Some(e) = injection {
            let ec = e.conj();
            Zip::from(&mut g).for_each(|v| *v *= ec);
        }
        (out, g)
    }

    /// Flattens accumulated block gradients into the chain parameter layout.
    pub fn finalize(&self, grad: &DynamicsGrad) -> Vec<f64> {
        self.blocks
            .iter()
            .zip(grad)
            .flat_map(|(b, g)| b.finalize(g))
            .collect()
    }
}

/// `f(h, t)` of the chain for a single state.
pub fn eval_rhs(dynamics: &DynamicsSpec, state: &OpticalState, t: f64) -> Result<OpticalState> {
    dynamics.check_ports(state.port_count())?;
    let out = dynamics.compile().eval(&state.to_fields(), t);
    OpticalState::from_fields(&out)
}
