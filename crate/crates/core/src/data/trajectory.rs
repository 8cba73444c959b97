use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPIRAL_DECAY: f64 = -0.1;
pub const SPIRAL_START: (f64, f64) = (0.6, 0.3);
pub const SPIRAL_SPAN: f64 = 25.0;
pub const SPIRAL_SAMPLES: usize = 200;

/// Closed-form solution of `dx/dt = A x` with `A = [[-0.1, -1], [1, -0.1]]`.
pub fn spiral_reference(x0: (f64, f64), times: &[f64]) -> Result<Vec<(f64, f64)>> {
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Argument(format!(
            "times must be strictly ascending ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(times
        .iter()
        .map(|&t| {
            let r = (SPIRAL_DECAY * t).exp();
            let (s, c) = t.sin_cos();
            (r * (x0.0 * c - x0.1 * s), r * (x0.0 * s + x0.1 * c))
        })
        .collect())
}

/// `n` evenly spaced times from `0` to `span` inclusive.
pub fn uniform_times(span: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| span * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTask {
    pub matrix: [[f64; 2]; 2],
    pub initial: (f64, f64),
    pub times: Vec<f64>,
    pub targets: Vec<(f64, f64)>,
}

impl TrajectoryTask {
    pub fn new(initial: (f64, f64), times: Vec<f64>) -> Result<Self> {
        let targets = spiral_reference(initial, &times)?;
        Ok(Self {
            matrix: [[SPIRAL_DECAY, -1.0], [1.0, SPIRAL_DECAY]],
            initial,
            times,
            targets,
        })
    }

    /// 200 uniform samples on `[0, 25]` from `(0.6, 0.3)`.
    pub fn standard() -> Self {
        Self::new(SPIRAL_START, uniform_times(SPIRAL_SPAN, SPIRAL_SAMPLES)).expect("uniform times ascend")
    }

    /// Targets replaced by externally generated points (same length as `times`).
    pub fn with_targets(mut self, targets: Vec<(f64, f64)>) -> Result<Self> {
        if targets.len() != self.times.len() {
            return Err(Error::shape("trajectory targets", self.times.len(), targets.len()));
        }
        self.targets = targets;
        Ok(self)
    }
}
