//! Uniform complex gain `f(z) = c z` on every port. Not a photonic element;
//! it expresses linear reference dynamics such as `dz/dt = (-0.1 + i) z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{OpticalState, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexGain {
    pub re: f64,
    pub im: f64,
}

impl ComplexGain {
    pub const PARAM_COUNT: usize = 2;

    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::NonFinite("complex gain".into()));
        }
        Ok(Self { re, im })
    }

    pub fn from_complex(c: C64) -> Result<Self> {
        Self::new(c.re, c.im)
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }

    /// `[re, im]`.
    pub fn params(&self) -> [f64; 2] {
        [self.re, self.im]
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != Self::PARAM_COUNT {
            return Err(Error::shape("gain parameters", Self::PARAM_COUNT, flat.len()));
        }
        *self = Self::new(flat[0], flat[1])?;
        Ok(())
    }

    pub fn apply(&self, state: &OpticalState) -> OpticalState {
        let c = self.value();
        let out = state.amplitudes().iter().map(|&z| c * z).collect();
        OpticalState::new(out).expect("finite gain of finite input is finite")
    }

    #[inline]
    pub(crate) fn pullback(&self, z: C64, gy: C64, weight: f64, grad: &mut [f64; 2]) -> C64 {
        let p = gy.conj() * z;
        grad[0] += weight * p.re;
        grad[1] += weight * (p * C64::new(0.0, 1.0)).re;
        self.value().conj() * gy
    }
}
