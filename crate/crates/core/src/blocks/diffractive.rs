//! Diffractive stacks of phase-only metalines separated by slab propagation.
//!
//! Propagation uses the 1D scalar angular-spectrum transfer function
//! `H(q) = exp(i d sqrt(k^2 - kx(q)^2))`, with evanescent components
//! (`kx^2 > k^2`) decaying as `exp(-d sqrt(kx^2 - k^2))`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{OpticalState, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Slab propagation constants. All lengths in metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationSpec {
    pub wavelength: f64,
    pub effective_index: f64,
    pub pitch: f64,
    pub layer_distance: f64,
}

impl Default for PropagationSpec {
    fn default() -> Self {
        Self {
            wavelength: 1.55e-6,
            effective_index: 2.85,
            pitch: 0.5e-6,
            layer_distance: 50e-6,
        }
    }
}

impl PropagationSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.wavelength, self.effective_index, self.pitch];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(
                "wavelength, effective index and pitch must be positive".into(),
            ));
        }
        if !(self.layer_distance.is_finite() && self.layer_distance >= 0.0) {
            return Err(Error::Config("layer distance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        TAU * self.effective_index / self.wavelength
    }

    /// Transverse spatial frequency of DFT bin `q` for `samples` points.
    pub fn spatial_frequency(&self, q: usize, samples: usize) -> f64 {
        let signed = if 2 * q < samples { q as f64 } else { q as f64 - samples as f64 };
        TAU * signed / (samples as f64 * self.pitch)
    }

    pub fn transfer(&self, distance: f64, samples: usize) -> Vec<C64> {
        let k2 = self.wavenumber().powi(2);
        (0..samples)
            .map(|q| {
                let kx2 = self.spatial_frequency(q, samples).powi(2);
                if kx2 <= k2 {
                    C64::from_polar(1.0, distance * (k2 - kx2).sqrt())
                } else {
                    C64::new((-distance * (kx2 - k2).sqrt()).exp(), 0.0)
                }
            })
            .collect()
    }
}

/// Precomputed FFT plans and transfer function for one propagation distance.
#[derive(Clone)]
pub struct Propagator {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    transfer: Vec<C64>,
    scratch_len: usize,
}

impl fmt::Debug for Propagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Propagator")
            .field("samples", &self.transfer.len())
            .finish()
    }
}

impl Propagator {
    pub fn new(spec: &PropagationSpec, distance: f64, samples: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(samples);
        let inverse = planner.plan_fft_inverse(samples);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            transfer: spec.transfer(distance, samples),
            scratch_len,
        }
    }

    pub fn samples(&self) -> usize {
        self.transfer.len()
    }

    pub fn scratch(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.scratch_len]
    }

    /// Propagates `field` in place. With `adjoint` the conjugate transfer
    /// function is used, which applies the adjoint operator.
    pub fn apply(&self, field: &mut [C64], scratch: &mut [C64], adjoint: bool) {
        self.forward.process_with_scratch(field, scratch);
        let scale = 1.0 / field.len() as f64;
        if adjoint {
            for (a, h) in field.iter_mut().zip(&self.transfer) {
                *a *= h.conj() * scale;
            }
        } else {
            for (a, h) in field.iter_mut().zip(&self.transfer) {
                *a *= h * scale;
            }
        }
        self.inverse.process_with_scratch(field, scratch);
    }
}

/// Multiplies sample `m` by `exp(i phases[m])`.
pub fn metaline_modulate(phases: &[f64], state: &OpticalState) -> Result<OpticalState> {
    if phases.len() != state.port_count() {
        return Err(Error::shape("metaline", phases.len(), state.port_count()));
    }
    let out = state
        .amplitudes()
        .iter()
        .zip(phases)
        .map(|(a, &p)| a * phase_factor(p))
        .collect();
    OpticalState::new(out)
}

#[inline]
pub(crate) fn phase_factor(phase: f64) -> C64 {
    C64::from_polar(1.0, phase.rem_euclid(TAU))
}

/// Free propagation of the field by `distance` through the slab.
pub fn angular_spectrum_propagate(spec: &PropagationSpec, distance: f64, state: &OpticalState) -> Result<OpticalState> {
    spec.validate()?;
    if !(distance.is_finite() && distance >= 0.0) {
        return Err(Error::Argument(format!("propagation distance {distance} must be >= 0")));
    }
    let prop = Propagator::new(spec, distance, state.port_count());
    let mut field = state.amplitudes().to_vec();
    let mut scratch = prop.scratch();
    prop.apply(&mut field, &mut scratch, false);
    OpticalState::new(field)
}

/// `layer_count` metalines of `sample_count` phases each, stored layer-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffractiveStackParams {
    sample_count: usize,
    layer_count: usize,
    phases: Vec<f64>,
    propagation: PropagationSpec,
}

impl DiffractiveStackParams {
    pub fn new(sample_count: usize, layer_count: usize, phases: Vec<f64>, propagation: PropagationSpec) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::Argument("diffractive stack needs at least one sample".into()));
        }
        if phases.len() != sample_count * layer_count {
            return Err(Error::shape(
                "diffractive phases",
                sample_count * layer_count,
                phases.len(),
            ));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("diffractive phases".into()));
        }
        propagation.validate()?;
        Ok(Self {
            sample_count,
            layer_count,
            phases,
            propagation,
        })
    }

    pub fn zeros(sample_count: usize, layer_count: usize, propagation: PropagationSpec) -> Result<Self> {
        Self::new(sample_count, layer_count, vec![0.0; sample_count * layer_count], propagation)
    }

    pub fn random<R: Rng + ?Sized>(
        sample_count: usize,
        layer_count: usize,
        propagation: PropagationSpec,
        rng: &mut R,
    ) -> Result<Self> {
        let phases = (0..sample_count * layer_count)
            .map(|_| rng.random_range(0.0..TAU))
            .collect();
        Self::new(sample_count, layer_count, phases, propagation)
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn layer_count(&self) -> usize {
        self.layer_count
    }

    pub fn propagation(&self) -> &PropagationSpec {
        &self.propagation
    }

    pub fn layer_phases(&self, layer: usize) -> &[f64] {
        &self.phases[layer * self.sample_count..(layer + 1) * self.sample_count]
    }

    pub fn param_count(&self) -> usize {
        self.phases.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.phases
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.phases.len() {
            return Err(Error::shape("diffractive phases", self.phases.len(), flat.len()));
        }
        if flat.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("diffractive phases".into()));
        }
        self.phases.copy_from_slice(flat);
        Ok(())
    }

    pub(crate) fn modulations(&self) -> Vec<C64> {
        self.phases.iter().map(|&p| phase_factor(p)).collect()
    }
}

/// `L` rounds of (propagate, modulate) followed by a final propagation to
/// the readout plane.
pub fn dpu_forward(params: &DiffractiveStackParams, state: &OpticalState) -> Result<OpticalState> {
    if state.port_count() != params.sample_count {
        return Err(Error::shape("diffractive stack input", params.sample_count, state.port_count()));
    }
    let stack = CompiledStack::new(params);
    let mut field = state.amplitudes().to_vec();
    let mut scratch = stack.propagator.scratch();
    stack.forward_row(&mut field, &mut scratch);
    OpticalState::new(field)
}

/// Diffractive stack with its propagator and modulation factors prepared.
#[derive(Clone, Debug)]
pub struct CompiledStack {
    pub(crate) propagator: Propagator,
    modulations: Vec<C64>,
    samples: usize,
    layers: usize,
}

impl CompiledStack {
    pub(crate) fn new(params: &DiffractiveStackParams) -> Self {
        Self {
            propagator: Propagator::new(
                &params.propagation,
                params.propagation.layer_distance,
                params.sample_count,
            ),
            modulations: params.modulations(),
            samples: params.sample_count,
            layers: params.layer_count,
        }
    }

    pub(crate) fn param_len(&self) -> usize {
        self.samples * self.layers
    }

    pub(crate) fn forward_row(&self, field: &mut [C64], scratch: &mut [C64]) {
        for layer in 0..self.layers {
            self.propagator.apply(field, scratch, false);
            let m = &self.modulations[layer * self.samples..(layer + 1) * self.samples];
            for (a, e) in field.iter_mut().zip(m) {
                *a *= e;
            }
        }
        self.propagator.apply(field, scratch, false);
    }

    /// Overwrites `field` (the block input) with its cotangent given the
    /// output cotangent `upstream`; accumulates `weight` times the phase
    /// gradient into `grad`.
    pub(crate) fn pullback_row(
        &self,
        field: &mut [C64],
        upstream: &[C64],
        grad: &mut [f64],
        weight: f64,
        scratch: &mut [C64],
        stash: &mut Vec<C64>,
    ) {
        let m_len = self.samples;
        stash.clear();
        for layer in 0..self.layers {
            self.propagator.apply(field, scratch, false);
            let m = &self.modulations[layer * m_len..(layer + 1) * m_len];
            for (a, e) in field.iter_mut().zip(m) {
                *a *= e;
            }
            stash.extend_from_slice(field);
        }
        field.copy_from_slice(upstream);
        self.propagator.apply(field, scratch, true);
        for layer in (0..self.layers).rev() {
            let out = &stash[layer * m_len..(layer + 1) * m_len];
            let m = &self.modulations[layer * m_len..(layer + 1) * m_len];
            let g = &mut grad[layer * m_len..(layer + 1) * m_len];
            for (((gv, a), y), e) in g.iter_mut().zip(field.iter_mut()).zip(out).zip(m) {
                *gv += weight * (a.conj() * I * y).re;
                *a *= e.conj();
            }
            self.propagator.apply(field, scratch, true);
        }
    }
}
