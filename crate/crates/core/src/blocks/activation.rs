//! Electro-optic activation: a tapped fraction `alpha` of the optical power
//! drives a phase shift on the remaining signal,
//!
//! ```text
//! f(z) = i sqrt(1 - alpha) e^{-i D/2} cos(D/2) z,   D = gain * alpha * |z|^2 + phase_bias
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{OpticalState, C64};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationParams {
    pub alpha: f64,
    pub gain: f64,
    pub phase_bias: f64,
}

impl Default for ActivationParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gain: PI,
            phase_bias: PI,
        }
    }
}

impl ActivationParams {
    pub const PARAM_COUNT: usize = 3;

    pub fn new(alpha: f64, gain: f64, phase_bias: f64) -> Result<Self> {
        let p = Self {
            alpha,
            gain,
            phase_bias,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Argument(format!(
                "activation alpha {} outside [0, 1)",
                self.alpha
            )));
        }
        if !(self.gain.is_finite() && self.phase_bias.is_finite()) {
            return Err(Error::NonFinite("activation gain/phase bias".into()));
        }
        Ok(())
    }

    /// `[alpha, gain, phase_bias]`.
    pub fn params(&self) -> [f64; 3] {
        [self.alpha, self.gain, self.phase_bias]
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != Self::PARAM_COUNT {
            return Err(Error::shape("activation parameters", Self::PARAM_COUNT, flat.len()));
        }
        let next = Self {
            alpha: flat[0],
            gain: flat[1],
            phase_bias: flat[2],
        };
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// Scalar response for one amplitude.
    #[inline]
    pub fn respond(&self, z: C64) -> C64 {
        let delta = self.gain * self.alpha * z.norm_sqr() + self.phase_bias;
        let w = (C64::new(1.0, 0.0) + C64::from_polar(1.0, -delta)) * 0.5;
        I * (1.0 - self.alpha).sqrt() * w * z
    }

    /// Reverse-mode step for one amplitude: returns the input cotangent and
    /// adds `weight` times the parameter sensitivities to `grad`.
    #[inline]
    pub(crate) fn pullback(&self, z: C64, gy: C64, weight: f64, grad: &mut [f64; 3]) -> C64 {
        let r = z.norm_sqr();
        let delta = self.gain * self.alpha * r + self.phase_bias;
        let e = C64::from_polar(1.0, -delta);
        let w = (C64::new(1.0, 0.0) + e) * 0.5;
        let dw = -I * e * 0.5;
        let root = (1.0 - self.alpha).sqrt();
        let c = I * root;
        let dc = -I / (2.0 * root);

        let s = (gy.conj() * c * z * dw).re;
        grad[0] += weight * (s * self.gain * r + (gy.conj() * dc * w * z).re);
        grad[1] += weight * s * self.alpha * r;
        grad[2] += weight * s;
        (c * w).conj() * gy + z * (2.0 * s * self.gain * self.alpha)
    }
}

/// Applies the activation to every port.
pub fn eo_activation(params: &ActivationParams, state: &OpticalState) -> OpticalState {
    let out = state.amplitudes().iter().map(|&z| params.respond(z)).collect();
    OpticalState::new(out).expect("bounded response of finite input is finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        for p in [ActivationParams::default(), ActivationParams::new(0.5, 2.0, 0.3).unwrap()] {
            assert_eq!(p.respond(C64::new(0.0, 0.0)), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn default_response_at_unit_amplitude() {
        let p = ActivationParams::default();
        let f = p.respond(C64::new(1.0, 0.0));
        // sqrt(0.9) * |cos(0.55 pi)|
        let expected = 0.9f64.sqrt() * (0.55 * PI).cos().abs();
        assert!((f.norm() - expected).abs() < 1e-14);
        assert!((f.norm() - 0.148_41).abs() < 1e-5);
    }

    #[test]
    fn phase_equivariance() {
        let p = ActivationParams::default();
        let z = C64::new(0.5, 0.2);
        let rot = C64::from_polar(1.0, 0.7);
        let lhs = p.respond(rot * z);
        let rhs = rot * p.respond(z);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn magnitude_bound() {
        let p = ActivationParams::new(0.3, 7.0, -1.1).unwrap();
        for k in 0..200 {
            let z = C64::from_polar(0.05 * k as f64, 0.37 * k as f64);
            assert!(p.respond(z).norm() <= (1.0 - p.alpha).sqrt() * z.norm() + 1e-14);
        }
    }

    #[test]
    fn validation() {
        assert!(ActivationParams::new(1.0, 1.0, 0.0).is_err());
        assert!(ActivationParams::new(-0.1, 1.0, 0.0).is_err());
        assert!(ActivationParams::new(0.1, f64::NAN, 0.0).is_err());
        let mut p = ActivationParams::default();
        assert!(p.set_params(&[0.2, 1.0]).is_err());
        p.set_params(&[0.2, 1.0, 0.5]).unwrap();
        assert_eq!(p.params(), [0.2, 1.0, 0.5]);
    }

    #[test]
    fn eo_activation_is_elementwise() {
        let p = ActivationParams::default();
        let s = OpticalState::new(vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)]).unwrap();
        let out = eo_activation(&p, &s);
        assert_eq!(out.amplitudes()[1], p.respond(C64::new(0.0, 2.0)));
    }
}
