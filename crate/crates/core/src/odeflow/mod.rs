//! Fixed-step integration of `dh/dt = f(h, t)` over photonic block chains,
//! the residual cascade, and reverse-mode gradients through both.

mod dynamics;
mod gradients;
mod solver;

pub use dynamics::{eval_rhs, CompiledDynamics, DynamicsGrad, DynamicsSpec, TimePolicy};
pub use gradients::{adjoint_backward, adjoint_gradients, backward, discretize_gradients, Gradients};
pub use solver::{
    discretize_backward, integrate, residual_backward, residual_batch, residual_forward, sample_trajectory,
    solve_ivp, BatchSolve, GradientMode, Method, OdeSolveConfig, Schedule, SolveRecord,
};
