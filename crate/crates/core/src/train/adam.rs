use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(param_count: usize) -> Self {
        Self {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_update(opt: &mut OptimizerState, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != opt.len() || opt.second_moment.len() != opt.len() {
        return Err(Error::shape("optimizer state", opt.len(), params.len()));
    }
    if grads.len() != params.len() {
        return Err(Error::shape("gradient", params.len(), grads.len()));
    }
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = 1.0 - opt.beta1.powi(t);
    let c2 = 1.0 - opt.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(opt.first_moment.iter_mut())
        .zip(opt.second_moment.iter_mut())
    {
        *m = opt.beta1 * *m + (1.0 - opt.beta1) * g;
        *v = opt.beta2 * *v + (1.0 - opt.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + opt.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut opt = OptimizerState::new(2);
        opt.first_moment = vec![0.5, -0.5];
        let mut p = vec![1.0, 2.0];
        let mut zero_moments = OptimizerState::new(2);
        adam_update(&mut zero_moments, &mut p, &[0.0, 0.0], 0.01).unwrap();
        assert_eq!(p, vec![1.0, 2.0]);
        adam_update(&mut opt, &mut [0.0, 0.0], &[0.0, 0.0], 0.01).unwrap();
        assert_eq!(opt.first_moment, vec![0.45, -0.45]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = OptimizerState::new(3);
        let mut p = vec![0.0; 3];
        adam_update(&mut opt, &mut p, &[2.0, -0.5, 1e-3], 0.01).unwrap();
        for (x, s) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((x - 0.01 * s).abs() < 1e-7);
        }
    }

    #[test]
    fn two_step_trace() {
        // g1 = 1, g2 = 0.5, lr = 0.1, p0 = 0:
        // step 1: m = 0.1, v = 0.001, m^ = 1, v^ = 1 -> p = -0.1 (+eps)
        // step 2: m = 0.14, v = 0.001249, m^ = 0.14/0.19, v^ = 0.001249/0.001999
        let mut opt = OptimizerState::new(1);
        let mut p = vec![0.0];
        adam_update(&mut opt, &mut p, &[1.0], 0.1).unwrap();
        adam_update(&mut opt, &mut p, &[0.5], 0.1).unwrap();
        let s1 = 0.1 * 1.0 / (1.0 + 1e-8);
        let m_hat: f64 = 0.14 / 0.19;
        let v_hat: f64 = 0.001_249 / 0.001_999;
        let s2 = 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] + s1 + s2).abs() < 1e-12);
        assert!((p[0] - (-0.193_217_96)).abs() < 1e-6);
        assert_eq!(opt.step, 2);
    }

    #[test]
    fn shape_mismatch() {
        let mut opt = OptimizerState::new(2);
        assert!(adam_update(&mut opt, &mut [0.0; 3], &[0.0; 3], 0.1).is_err());
        assert!(adam_update(&mut opt, &mut [0.0; 2], &[0.0; 1], 0.1).is_err());
    }
}
