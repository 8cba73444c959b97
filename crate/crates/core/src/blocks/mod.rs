//! Differentiable photonic layers.
//!
//! Every block has a forward map on optical fields and an exact
//! vector-Jacobian product. Cotangents of complex amplitudes follow the
//! real/imaginary convention: for a real loss `L` and amplitude `z = x + iy`
//! the cotangent is `dL/dx + i dL/dy`. For a complex-linear map `y = A z`
//! this makes the input cotangent `A^H` applied to the output cotangent.

pub mod activation;
pub mod diffractive;
pub mod gain;
pub mod mzi;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

pub use activation::{eo_activation, ActivationParams};
pub use diffractive::{
    angular_spectrum_propagate, dpu_forward, metaline_modulate, DiffractiveStackParams, PropagationSpec,
    Propagator,
};
pub use gain::ComplexGain;
pub use mzi::{mesh_forward, mzi_transfer, MziMeshParams, MziUnit};

use crate::error::{Error, Result};
use crate::field::{Fields, OpticalState, C64};
pub use diffractive::CompiledStack;

/// One photonic layer with its trainable parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Block {
    Mesh(MziMeshParams),
    Activation(ActivationParams),
    Diffractive(DiffractiveStackParams),
    Gain(ComplexGain),
}

/// Name and shape of a contiguous slice of a parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub shape: Vec<usize>,
}

impl Segment {
    pub fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            shape,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Block {
    /// Port count the block is bound to; `None` for elementwise blocks.
    pub fn port_count(&self) -> Option<usize> {
        match self {
            Block::Mesh(m) => Some(m.port_count()),
            Block::Activation(_) => None,
            Block::Diffractive(d) => Some(d.sample_count()),
            Block::Gain(_) => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Block::Mesh(_) => "mesh",
            Block::Activation(_) => "activation",
            Block::Diffractive(_) => "diffractive",
            Block::Gain(_) => "gain",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Block::Mesh(m) => m.param_count(),
            Block::Activation(_) => ActivationParams::PARAM_COUNT,
            Block::Diffractive(d) => d.param_count(),
            Block::Gain(_) => ComplexGain::PARAM_COUNT,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Block::Mesh(m) => m.params(),
            Block::Activation(a) => a.params().to_vec(),
            Block::Diffractive(d) => d.params().to_vec(),
            Block::Gain(g) => g.params().to_vec(),
        }
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        match self {
            Block::Mesh(m) => m.set_params(flat),
            Block::Activation(a) => a.set_params(flat),
            Block::Diffractive(d) => d.set_params(flat),
            Block::Gain(g) => g.set_params(flat),
        }
    }

    /// Named slices of [`params`](Self::params), in order.
    pub fn segments(&self) -> Vec<Segment> {
        match self {
            Block::Mesh(m) => vec![
                Segment::new("theta", vec![m.units().len()]),
                Segment::new("phi", vec![m.units().len()]),
                Segment::new("output_phases", vec![m.port_count()]),
            ],
            Block::Activation(_) => vec![Segment::new("activation", vec![3])],
            Block::Diffractive(d) => vec![Segment::new("phases", vec![d.layer_count(), d.sample_count()])],
            Block::Gain(_) => vec![Segment::new("gain", vec![2])],
        }
    }

    pub fn forward(&self, state: &OpticalState) -> Result<OpticalState> {
        match self {
            Block::Mesh(m) => mesh_forward(m, state),
            Block::Activation(a) => Ok(eo_activation(a, state)),
            Block::Diffractive(d) => dpu_forward(d, state),
            Block::Gain(g) => Ok(g.apply(state)),
        }
    }

    pub fn compile(&self) -> CompiledBlock {
        match self {
            Block::Mesh(m) => {
                let u = m.unitary();
                CompiledBlock::Mesh {
                    transpose: u.t().to_owned(),
                    conjugate: u.mapv(|v| v.conj()),
                    params: m.clone(),
                }
            }
            Block::Activation(a) => CompiledBlock::Activation(*a),
            Block::Diffractive(d) => CompiledBlock::Diffractive(CompiledStack::new(d)),
            Block::Gain(g) => CompiledBlock::Gain(*g),
        }
    }
}

/// A block with its parameter-dependent operators precomputed for batched
/// evaluation.
#[derive(Clone, Debug)]
pub enum CompiledBlock {
    Mesh {
        params: MziMeshParams,
        /// `U^T`, so a row batch maps as `X U^T`.
        transpose: Array2<C64>,
        /// `conj(U)`, so row cotangents pull back as `G conj(U)`.
        conjugate: Array2<C64>,
    },
    Activation(ActivationParams),
    Diffractive(CompiledStack),
    Gain(ComplexGain),
}

/// Parameter-gradient accumulator for one block.
///
/// Meshes accumulate the outer product `sum gy x^H` and convert it to phase
/// gradients once in [`CompiledBlock::finalize`].
#[derive(Clone, Debug, PartialEq)]
pub enum BlockGrad {
    Mesh(Array2<C64>),
    Activation([f64; 3]),
    Diffractive(Vec<f64>),
    Gain([f64; 2]),
}

impl BlockGrad {
    pub fn scaled_add(&mut self, weight: f64, other: &BlockGrad) {
        match (self, other) {
            (BlockGrad::Mesh(a), BlockGrad::Mesh(b)) => a.scaled_add(C64::new(weight, 0.0), b),
            (BlockGrad::Activation(a), BlockGrad::Activation(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += weight * y;
                }
            }
            (BlockGrad::Diffractive(a), BlockGrad::Diffractive(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += weight * y;
                }
            }
            (BlockGrad::Gain(a), BlockGrad::Gain(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += weight * y;
                }
            }
            _ => panic!("gradient accumulators of different block kinds"),
        }
    }
}

impl CompiledBlock {
    pub fn port_count(&self) -> Option<usize> {
        match self {
            CompiledBlock::Mesh { params, .. } => Some(params.port_count()),
            CompiledBlock::Activation(_) => None,
            CompiledBlock::Diffractive(s) => Some(s.propagator.samples()),
            CompiledBlock::Gain(_) => None,
        }
    }

    pub fn zero_grad(&self) -> BlockGrad {
        match self {
            CompiledBlock::Mesh { params, .. } => {
                let n = params.port_count();
                BlockGrad::Mesh(Array2::zeros((n, n)))
            }
            CompiledBlock::Activation(_) => BlockGrad::Activation([0.0; 3]),
            CompiledBlock::Diffractive(s) => BlockGrad::Diffractive(vec![0.0; s.param_len()]),
            CompiledBlock::Gain(_) => BlockGrad::Gain([0.0; 2]),
        }
    }

    pub fn forward(&self, x: &Fields) -> Fields {
        match self {
            CompiledBlock::Mesh { transpose, .. } => x.dot(transpose),
            CompiledBlock::Activation(a) => x.mapv(|z| a.respond(z)),
            CompiledBlock::Diffractive(stack) => {
                let mut y = x.to_owned();
                let mut scratch = stack.propagator.scratch();
                for mut row in y.rows_mut() {
                    stack.forward_row(row.as_slice_mut().expect("standard layout"), &mut scratch);
                }
                y
            }
            CompiledBlock::Gain(g) => {
                let c = g.value();
                x.mapv(|z| c * z)
            }
        }
    }

    /// Input cotangent for block input `x` and output cotangent `gy`;
    /// parameter sensitivities times `weight` are added to `grad`.
    pub fn pullback(&self, x: &Fields, gy: &Fields, grad: &mut BlockGrad, weight: f64) -> Fields {
        match (self, grad) {
            (CompiledBlock::Mesh { conjugate, .. }, BlockGrad::Mesh(outer)) => {
                if weight != 0.0 {
                    let xc = x.mapv(|v| v.conj());
                    ndarray::linalg::general_mat_mul(C64::new(weight, 0.0), &gy.t(), &xc, C64::new(1.0, 0.0), outer);
                }
                gy.dot(conjugate)
            }
            (CompiledBlock::Activation(a), BlockGrad::Activation(g)) => {
                let mut out = Fields::zeros(x.raw_dim());
                Zip::from(&mut out).and(x).and(gy).for_each(|o, &z, &g_y| {
                    *o = a.pullback(z, g_y, weight, g);
                });
                out
            }
            (CompiledBlock::Diffractive(stack), BlockGrad::Diffractive(g)) => {
                let mut out = x.to_owned();
                let mut scratch = stack.propagator.scratch();
                let mut stash = Vec::new();
                for (mut row, up) in out.rows_mut().into_iter().zip(gy.rows()) {
                    stack.pullback_row(
                        row.as_slice_mut().expect("standard layout"),
                        up.as_slice().expect("standard layout"),
                        g,
                        weight,
                        &mut scratch,
                        &mut stash,
                    );
                }
                out
            }
            (CompiledBlock::Gain(c), BlockGrad::Gain(g)) => {
                let mut out = Fields::zeros(x.raw_dim());
                Zip::from(&mut out).and(x).and(gy).for_each(|o, &z, &g_y| {
                    *o = c.pullback(z, g_y, weight, g);
                });
                out
            }
            _ => panic!("gradient accumulator does not match block kind"),
        }
    }

    /// Converts an accumulator into a gradient in the block's parameter layout.
    pub fn finalize(&self, grad: &BlockGrad) -> Vec<f64> {
        match (self, grad) {
            (CompiledBlock::Mesh { params, .. }, BlockGrad::Mesh(outer)) => params.param_grad_from_outer(outer),
            (CompiledBlock::Activation(_), BlockGrad::Activation(g)) => g.to_vec(),
            (CompiledBlock::Diffractive(_), BlockGrad::Diffractive(g)) => g.clone(),
            (CompiledBlock::Gain(_), BlockGrad::Gain(g)) => g.to_vec(),
            _ => panic!("gradient accumulator does not match block kind"),
        }
    }
}

/// Sensitivities returned by [`block_vjp`].
#[derive(Clone, Debug, PartialEq)]
pub struct Cotangents {
    pub state: Vec<C64>,
    pub params: Vec<f64>,
}

/// Exact reverse-mode sensitivities of a real loss through one block:
/// the cotangent of the input state and the gradient with respect to the
/// block's own parameters (in [`Block::params`] layout).
pub fn block_vjp(block: &Block, input: &OpticalState, upstream: &[C64]) -> Result<Cotangents> {
    if let Some(n) = block.port_count() {
        if input.port_count() != n {
            return Err(Error::shape(format!("{} input", block.kind()), n, input.port_count()));
        }
    }
    if upstream.len() != input.port_count() {
        return Err(Error::shape(
            format!("{} upstream cotangent", block.kind()),
            input.port_count(),
            upstream.len(),
        ));
    }
    let compiled = block.compile();
    let x = input.to_fields();
    let gy = Array2::from_shape_vec((1, upstream.len()), upstream.to_vec()).expect("row shape");
    let mut grad = compiled.zero_grad();
    let gx = compiled.pullback(&x, &gy, &mut grad, 1.0);
    Ok(Cotangents {
        state: gx.into_raw_vec_and_offset().0,
        params: compiled.finalize(&grad),
    })
}
