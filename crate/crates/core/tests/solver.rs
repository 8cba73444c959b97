mod common;

use common::*;
use onode::blocks::{ActivationParams, Block, ComplexGain, MziMeshParams};
use onode::field::{OpticalState, C64};
use onode::odeflow::{
    adjoint_gradients, residual_forward, sample_trajectory, solve_ivp, DynamicsSpec, GradientMode, Method,
    OdeSolveConfig,
};
use std::f64::consts::PI;

fn zero_dynamics() -> DynamicsSpec {
    DynamicsSpec::autonomous(vec![Block::Gain(ComplexGain::new(0.0, 0.0).unwrap())]).unwrap()
}

#[test]
fn zero_dynamics_keep_the_state() {
    let mut r = rng(1);
    let h0 = random_state(5, &mut r);
    for method in [Method::Euler, Method::Midpoint, Method::Rk4] {
        let rec = solve_ivp(&zero_dynamics(), &h0, &OdeSolveConfig::new(method, 0.0, 1.0, 7)).unwrap();
        assert_eq!(rec.final_state, h0);
    }
    let samples = sample_trajectory(&zero_dynamics(), &h0, &[0.0, 0.3, 2.0], &rk4(4)).unwrap();
    assert!(samples.iter().all(|s| *s == h0));
}

#[test]
fn empty_chain_is_identity_rhs() {
    let h0 = OpticalState::new(vec![C64::new(1.0, 0.0)]).unwrap();
    let rec = solve_ivp(&DynamicsSpec::autonomous(vec![]).unwrap(), &h0, &rk4(200)).unwrap();
    assert!((rec.final_state.amplitudes()[0].re - 1f64.exp()).abs() < 1e-10);
}

#[test]
fn euler_single_step_decay() {
    let h0 = OpticalState::new(vec![C64::new(1.0, 0.0)]).unwrap();
    let rec = solve_ivp(
        &linear(C64::new(-1.0, 0.0)),
        &h0,
        &OdeSolveConfig::new(Method::Euler, 0.0, 1.0, 1),
    )
    .unwrap();
    assert_eq!(rec.final_state.amplitudes()[0], C64::new(0.0, 0.0));
}

#[test]
fn spiral_step_matches_exponential() {
    // exp(-0.1 + i) (0.6 + 0.3i)
    let expected = C64::new(0.064_913_116_066_635_77, 0.603_502_382_967_632_7);
    let z0 = OpticalState::new(vec![C64::new(0.6, 0.3)]).unwrap();
    let rec = solve_ivp(&linear(C64::new(-0.1, 1.0)), &z0, &rk4(100)).unwrap();
    assert!((rec.final_state.amplitudes()[0] - expected).norm() < 1e-8);
}

#[test]
fn one_revolution_sample() {
    let z0 = C64::new(0.6, 0.3);
    let out = sample_trajectory(
        &linear(C64::new(-0.1, 1.0)),
        &OpticalState::new(vec![z0]).unwrap(),
        &[0.0, 2.0 * PI],
        &rk4(64),
    )
    .unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].amplitudes()[0], z0);
    // exp(-0.2 pi)
    let decay = 0.533_488_091_091_103_3;
    assert!((out[1].amplitudes()[0] - z0 * decay).norm() < 1e-6);
}

#[test]
fn single_time_returns_initial_state() {
    let mut r = rng(2);
    let h0 = random_state(3, &mut r);
    let out = sample_trajectory(&small_net(3, &mut r), &h0, &[0.0], &rk4(4)).unwrap();
    assert_eq!(out, vec![h0]);
}

#[test]
fn non_ascending_times_rejected() {
    let h0 = OpticalState::new(vec![C64::new(1.0, 0.0)]).unwrap();
    let d = linear(C64::new(0.0, 1.0));
    assert!(sample_trajectory(&d, &h0, &[0.0, 0.5, 0.5], &rk4(4)).is_err());
    assert!(sample_trajectory(&d, &h0, &[0.0, 0.5, 0.2], &rk4(4)).is_err());
    assert!(sample_trajectory(&d, &h0, &[], &rk4(4)).is_err());
}

#[test]
fn convergence_orders() {
    let steps = [4, 8, 16, 32];
    for (method, nominal) in [(Method::Euler, 1.0), (Method::Midpoint, 2.0), (Method::Rk4, 4.0)] {
        let p = convergence_order(method, &steps);
        assert!((p - nominal).abs() <= 0.3, "{method:?}: {p}");
    }
}

#[test]
fn spiral_reference_matches_fine_rk4() {
    let worst = spiral_reference_error();
    assert!(worst <= 1e-8, "{worst:e}");
}

#[test]
fn euler_single_step_bitwise_equals_residual_layer() {
    for seed in 0..4 {
        let mut r = rng(seed);
        let net = small_net(6, &mut r);
        let h0 = random_state(6, &mut r);
        let ode = solve_ivp(&net, &h0, &OdeSolveConfig::new(Method::Euler, 0.0, 1.0, 1)).unwrap();
        let res = residual_forward(std::slice::from_ref(&net), &h0).unwrap();
        assert_eq!(ode.final_state, res);
    }
}

#[test]
fn two_residual_layers_by_hand() {
    let h0 = OpticalState::new(vec![C64::new(1.0, 0.5), C64::new(-0.25, 2.0)]).unwrap();
    let a = C64::new(0.5, -1.0);
    let b = C64::new(-0.2, 0.3);
    let out = residual_forward(&[linear(a), linear(b)], &h0).unwrap();
    for (k, z) in h0.amplitudes().iter().enumerate() {
        let h1 = z + a * z;
        let h2 = h1 + b * h1;
        assert!((out.amplitudes()[k] - h2).norm() < 1e-15);
    }
}

#[test]
fn bar_state_mesh_rhs_preserves_energy() {
    let mesh = MziMeshParams::uniform(2, PI, 0.0).unwrap();
    let d = DynamicsSpec::autonomous(vec![Block::Mesh(mesh)]).unwrap();
    let h = OpticalState::new(vec![C64::new(0.3, 0.1), C64::new(-0.5, 0.8)]).unwrap();
    let f = onode::odeflow::eval_rhs(&d, &h, 0.0).unwrap();
    assert!((f.total_energy() - h.total_energy()).abs() < 1e-14);
    // theta = pi, phi = 0: T = i e^{i pi/2} diag(1, -1) = diag(-1, 1)
    assert!((f.amplitudes()[0] + h.amplitudes()[0]).norm() < 1e-15);
    assert!((f.amplitudes()[1] - h.amplitudes()[1]).norm() < 1e-15);
}

#[test]
fn solves_are_deterministic() {
    let mut r = rng(3);
    let net = DynamicsSpec::autonomous(vec![
        Block::Mesh(MziMeshParams::random(9, &mut r).unwrap()),
        Block::Activation(ActivationParams::default()),
    ])
    .unwrap();
    let h0 = random_state(9, &mut r);
    let a = solve_ivp(&net, &h0, &rk4(13)).unwrap();
    let b = solve_ivp(&net, &h0, &rk4(13)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn adjoint_memory_is_independent_of_steps() {
    let mut r = rng(4);
    let net = small_net(4, &mut r);
    let h0 = random_state(4, &mut r);
    let cot = random_amps(4, &mut r);
    for k in [4, 64, 512] {
        let g = adjoint_gradients(&net, &h0, &rk4(k), &cot).unwrap();
        assert_eq!(g.stored_states, 1);
        let disc = solve_ivp(&net, &h0, &rk4(k).with_gradient_mode(GradientMode::Discretize)).unwrap();
        assert_eq!(disc.saved_states.unwrap().len(), k + 1);
    }
}
