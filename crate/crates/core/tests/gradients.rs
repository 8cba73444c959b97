mod common;

use common::*;
use onode::blocks::{ActivationParams, Block, DiffractiveStackParams, MziMeshParams, PropagationSpec};
use onode::data::{spiral_reference, uniform_times, TrajectoryTask};
use onode::field::{OpticalState, ReadoutSpec, C64};
use onode::odeflow::{discretize_gradients, solve_ivp, DynamicsSpec, GradientMode, Method, OdeSolveConfig, TimePolicy};
use onode::train::{
    fd_gradient_oracle, intensity_cross_entropy, predict_trajectory, relative_error,
    trajectory_gradient, trajectory_mse, Backend, DpuConfig, Model, ModelConfig, ModelMode, FD_EPS,
};
use proptest::prelude::*;

#[test]
fn every_block_vjp_matches_finite_differences() {
    for seed in 0..5 {
        let mut r = rng(seed);
        for n in [2, 5, 16] {
            let x = random_state(n, &mut r);
            let u = random_amps(n, &mut r);
            for b in sample_blocks(n, &mut r) {
                let e = block_vjp_errors(&b, &x, &u);
                assert!(e.state <= 1e-5, "{} n={n} state {:e}", b.kind(), e.state);
                assert!(e.params <= 1e-5, "{} n={n} params {:e}", b.kind(), e.params);
            }
        }
    }
}

#[test]
fn activation_vjp_at_high_power() {
    let mut r = rng(9);
    let b = Block::Activation(ActivationParams::default());
    let x = OpticalState::new(random_amps(6, &mut r).into_iter().map(|z| z * 3.0).collect()).unwrap();
    let u = random_amps(6, &mut r);
    let e = block_vjp_errors(&b, &x, &u);
    assert!(e.state <= 1e-5 && e.params <= 1e-5, "{e:?}");
}

#[test]
fn discretize_matches_finite_differences() {
    let mut r = rng(11);
    let net = small_net(8, &mut r);
    assert!(net.param_count() <= 200);
    let h0 = random_state(8, &mut r);
    let w: Vec<f64> = (0..8).map(|k| 0.5 + 0.1 * k as f64).collect();
    let e = end_to_end(&net, &h0, &rk4(4), &w);
    assert!(e.discretize_vs_fd <= 1e-5, "{e:?}");
    assert!(e.state_discretize_vs_fd <= 1e-5, "{e:?}");
}

#[test]
fn adjoint_discretize_and_fd_agree() {
    for seed in [12, 13] {
        let mut r = rng(seed);
        let net = small_net(8, &mut r);
        let h0 = random_state(8, &mut r);
        let w: Vec<f64> = (0..8).map(|_| rand::Rng::random_range(&mut r, 0.1..1.0)).collect();
        let e = end_to_end(&net, &h0, &rk4(32), &w);
        assert!(e.adjoint_vs_discretize <= 1e-3, "{e:?}");
        assert!(e.adjoint_vs_fd <= 1e-4, "{e:?}");
        assert!(e.discretize_vs_fd <= 1e-4, "{e:?}");
        assert!(e.state_adjoint_vs_fd <= 1e-4, "{e:?}");
    }
}

#[test]
fn every_method_and_time_injection() {
    let mut r = rng(14);
    for method in [Method::Euler, Method::Midpoint, Method::Rk4] {
        let mesh = MziMeshParams::random(4, &mut r).unwrap();
        let net = DynamicsSpec::new(
            vec![Block::Mesh(mesh), Block::Activation(ActivationParams::new(0.3, 1.5, 0.4).unwrap())],
            TimePolicy::TimeInjected { omega0: 1.3 },
        )
        .unwrap();
        let h0 = random_state(4, &mut r);
        let e = end_to_end(&net, &h0, &OdeSolveConfig::new(method, 0.0, 1.0, 6), &[1.0, 0.2, 0.7, 0.4]);
        assert!(e.discretize_vs_fd <= 1e-5 && e.state_discretize_vs_fd <= 1e-5, "{method:?} {e:?}");
    }
}

#[test]
fn renormalized_solve_gradient() {
    let mut r = rng(15);
    let net = small_net(5, &mut r);
    let h0 = random_state(5, &mut r);
    let config = OdeSolveConfig {
        renormalize: true,
        ..rk4(3)
    }
    .with_gradient_mode(GradientMode::Discretize);
    let w = [1.0, 0.0, 0.3, 0.8, 0.1];
    let rec = solve_ivp(&net, &h0, &config).unwrap();
    assert!((rec.final_state.total_energy() - 1.0).abs() < 1e-12);
    let (_, cot) = weighted_energy(rec.final_state.amplitudes(), &w);
    let g = discretize_gradients(&net, &rec, &config, &cot).unwrap();
    let fd = fd_gradient_oracle(
        |p| {
            let mut n = net.clone();
            n.set_params(p).unwrap();
            weighted_energy(solve_ivp(&n, &h0, &config).unwrap().final_state.amplitudes(), &w).0
        },
        &net.params(),
        FD_EPS,
    );
    assert!(relative_error(&g.params, &fd) <= 1e-5);
}

#[test]
fn cross_entropy_cotangent_on_72_ports() {
    let mut r = rng(16);
    let spec = ReadoutSpec::centered(72).unwrap();
    let x = random_state(72, &mut r);
    let (_, cot) = intensity_cross_entropy(&x, &spec, 3).unwrap();
    let fd = fd_state_cotangent(
        |z| intensity_cross_entropy(&OpticalState::new(z.to_vec()).unwrap(), &spec, 3).unwrap().0,
        x.amplitudes(),
    );
    assert!(relative_error(&flatten(&cot), &flatten(&fd)) <= 1e-6);
}

fn small_mzi(mode: ModelMode, layers: usize, steps: usize) -> ModelConfig {
    ModelConfig {
        mode,
        layers,
        ports: 12,
        solver: rk4(steps),
        ..ModelConfig::mnist_mzi()
    }
}

fn check_classification(model: &Model, seed: u64) {
    let e = model_gradient_error(model, seed);
    assert!(e <= 1e-4, "{:?}: {e:e}", model.config().mode);
}

#[test]
fn model_gradients_match_finite_differences() {
    let configs = [
        small_mzi(ModelMode::Onode, 1, 4),
        small_mzi(ModelMode::Onode, 1, 12),
        small_mzi(ModelMode::Resnet, 1, 4),
        ModelConfig {
            ports: 10,
            train_activation: false,
            ..small_mzi(ModelMode::Resnet, 2, 4)
        },
        small_mzi(ModelMode::Plain, 1, 4),
        ModelConfig {
            train_activation: false,
            ..small_mzi(ModelMode::Onode, 1, 4)
        },
        ModelConfig {
            backend: Backend::Dpu,
            ports: 16,
            dpu: DpuConfig {
                metalines: 2,
                ..DpuConfig::default()
            },
            ..small_mzi(ModelMode::Onode, 1, 4)
        },
        ModelConfig {
            backend: Backend::Dpu,
            ports: 16,
            dpu: DpuConfig {
                metalines: 2,
                activation: true,
                ..DpuConfig::default()
            },
            ..small_mzi(ModelMode::Plain, 1, 4)
        },
    ];
    for (i, cfg) in configs.into_iter().enumerate() {
        let model = Model::init(cfg, 20 + i as u64).unwrap();
        let trainable = model.trainable_mask().iter().filter(|&&m| m).count();
        assert!(trainable <= 200, "{trainable}");
        check_classification(&model, 30 + i as u64);
    }
}

#[test]
fn trajectory_gradient_matches_finite_differences() {
    let cfg = ModelConfig {
        ports: 3,
        ..ModelConfig::trajectory()
    };
    let model = Model::init(cfg, 5).unwrap();
    let times = uniform_times(2.0, 6);
    let targets = spiral_reference((0.6, 0.3), &times).unwrap();
    let task = TrajectoryTask::new((0.6, 0.3), times).unwrap().with_targets(targets).unwrap();
    let (_, grad) = trajectory_gradient(&model, &task).unwrap();
    let fd = fd_gradient_oracle(
        |p| {
            let mut m = model.clone();
            m.set_params(p).unwrap();
            trajectory_mse(&predict_trajectory(&m, &task).unwrap(), &task.targets).unwrap().0
        },
        &model.params(),
        FD_EPS,
    );
    assert!(relative_error(&grad, &fd) <= 1e-4);
}

#[test]
fn diffractive_stack_gradient_on_task_geometry() {
    let mut r = rng(17);
    let stack = DiffractiveStackParams::random(64, 2, PropagationSpec::default(), &mut r).unwrap();
    let x = random_state(64, &mut r);
    let u = random_amps(64, &mut r);
    let e = block_vjp_errors(&Block::Diffractive(stack), &x, &u);
    assert!(e.state <= 1e-5 && e.params <= 1e-5, "{e:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_vjp_holds_for_random_phases(seed in any::<u64>(), n in 2usize..9) {
        let mut r = rng(seed);
        let b = Block::Mesh(MziMeshParams::random(n, &mut r).unwrap());
        let x = random_state(n, &mut r);
        let u = random_amps(n, &mut r);
        let e = block_vjp_errors(&b, &x, &u);
        prop_assert!(e.state <= 1e-5 && e.params <= 1e-5, "{:?}", e);
    }

    #[test]
    fn activation_vjp_holds_for_random_constants(
        alpha in 0.0f64..0.95, gain in -5.0f64..5.0, bias in -4.0f64..4.0, re in -1.5f64..1.5, im in -1.5f64..1.5,
    ) {
        let b = Block::Activation(ActivationParams::new(alpha, gain, bias).unwrap());
        let x = OpticalState::new(vec![C64::new(re, im), C64::new(im, -re)]).unwrap();
        let e = block_vjp_errors(&b, &x, &[C64::new(0.3, -1.0), C64::new(1.0, 0.4)]);
        prop_assert!(e.state <= 1e-5 && e.params <= 1e-5, "{:?}", e);
    }
}
