#![allow(dead_code)]

use onode::blocks::{
    block_vjp, ActivationParams, Block, ComplexGain, DiffractiveStackParams, MziMeshParams, PropagationSpec,
};
use onode::field::{OpticalState, C64};
use onode::odeflow::{adjoint_gradients, discretize_gradients, solve_ivp, DynamicsSpec, GradientMode, Method, OdeSolveConfig};
use onode::train::{fd_gradient_oracle, relative_error, FD_EPS};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

pub fn random_amps(n: usize, rng: &mut SplitMix64) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn random_state(n: usize, rng: &mut SplitMix64) -> OpticalState {
    OpticalState::new(random_amps(n, rng)).unwrap()
}

pub fn flatten(v: &[C64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Central differences of `loss` over the real and imaginary part of every
/// amplitude, returned in cotangent form `dL/dRe + i dL/dIm`.
pub fn fd_state_cotangent(mut loss: impl FnMut(&[C64]) -> f64, x: &[C64]) -> Vec<C64> {
    let g = fd_gradient_oracle(
        |flat| {
            let z: Vec<C64> = flat.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
            loss(&z)
        },
        &flatten(x),
        FD_EPS,
    );
    g.chunks(2).map(|c| C64::new(c[0], c[1])).collect()
}

/// `Re <u, y>`, whose cotangent with respect to `y` is `u`.
pub fn projection(u: &[C64], y: &[C64]) -> f64 {
    u.iter().zip(y).map(|(a, b)| (a.conj() * b).re).sum()
}

/// One block of every kind on `n` ports with randomized parameters.
pub fn sample_blocks(n: usize, rng: &mut SplitMix64) -> Vec<Block> {
    let spec = PropagationSpec {
        layer_distance: 8e-6,
        ..PropagationSpec::default()
    };
    vec![
        Block::Mesh(MziMeshParams::random(n, rng).unwrap()),
        Block::Activation(
            ActivationParams::new(rng.random_range(0.05..0.6), rng.random_range(0.5..4.0), rng.random_range(-2.0..2.0))
                .unwrap(),
        ),
        Block::Diffractive(DiffractiveStackParams::random(n, 3, spec, rng).unwrap()),
        Block::Gain(ComplexGain::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).unwrap()),
    ]
}

#[derive(Clone, Copy, Debug)]
pub struct VjpErrors {
    pub state: f64,
    pub params: f64,
}

/// Relative errors of [`block_vjp`] against central differences.
pub fn block_vjp_errors(block: &Block, x: &OpticalState, u: &[C64]) -> VjpErrors {
    let ct = block_vjp(block, x, u).unwrap();
    let fd_state = fd_state_cotangent(
        |z| projection(u, block.forward(&OpticalState::new(z.to_vec()).unwrap()).unwrap().amplitudes()),
        x.amplitudes(),
    );
    let fd_params = fd_gradient_oracle(
        |p| {
            let mut b = block.clone();
            b.set_params(p).unwrap();
            projection(u, b.forward(x).unwrap().amplitudes())
        },
        &block.params(),
        FD_EPS,
    );
    VjpErrors {
        state: relative_error(&flatten(&ct.state), &flatten(&fd_state)),
        params: relative_error(&ct.params, &fd_params),
    }
}

/// Mesh followed by activation on `n` ports.
pub fn small_net(n: usize, rng: &mut SplitMix64) -> DynamicsSpec {
    DynamicsSpec::autonomous(vec![
        Block::Mesh(MziMeshParams::random(n, rng).unwrap()),
        Block::Activation(ActivationParams::new(0.2, 2.0, 1.0).unwrap()),
    ])
    .unwrap()
}

/// `sum_k w_k |h_k|^2` and its cotangent `2 w_k h_k`.
pub fn weighted_energy(h: &[C64], w: &[f64]) -> (f64, Vec<C64>) {
    let loss = h.iter().zip(w).map(|(z, w)| w * z.norm_sqr()).sum();
    let cot = h.iter().zip(w).map(|(z, w)| z * (2.0 * w)).collect();
    (loss, cot)
}

fn final_loss(net: &DynamicsSpec, h0: &OpticalState, config: &OdeSolveConfig, w: &[f64]) -> f64 {
    let rec = solve_ivp(net, h0, config).unwrap();
    weighted_energy(rec.final_state.amplitudes(), w).0
}

#[derive(Clone, Copy, Debug)]
pub struct EndToEnd {
    pub discretize_vs_fd: f64,
    pub adjoint_vs_fd: f64,
    pub adjoint_vs_discretize: f64,
    pub state_discretize_vs_fd: f64,
    pub state_adjoint_vs_fd: f64,
}

/// Three-way comparison of parameter and initial-state gradients.
pub fn end_to_end(net: &DynamicsSpec, h0: &OpticalState, config: &OdeSolveConfig, w: &[f64]) -> EndToEnd {
    let disc_cfg = config.with_gradient_mode(GradientMode::Discretize);
    let rec = solve_ivp(net, h0, &disc_cfg).unwrap();
    let (_, cot) = weighted_energy(rec.final_state.amplitudes(), w);
    let disc = discretize_gradients(net, &rec, &disc_cfg, &cot).unwrap();
    let adj = adjoint_gradients(net, h0, config, &cot).unwrap();
    let fd_params = fd_gradient_oracle(
        |p| {
            let mut n = net.clone();
            n.set_params(p).unwrap();
            final_loss(&n, h0, config, w)
        },
        &net.params(),
        FD_EPS,
    );
    let fd_state = fd_state_cotangent(
        |z| final_loss(net, &OpticalState::new(z.to_vec()).unwrap(), config, w),
        h0.amplitudes(),
    );
    EndToEnd {
        discretize_vs_fd: relative_error(&disc.params, &fd_params),
        adjoint_vs_fd: relative_error(&adj.params, &fd_params),
        adjoint_vs_discretize: relative_error(&adj.params, &disc.params),
        state_discretize_vs_fd: relative_error(&flatten(&disc.state), &flatten(&fd_state)),
        state_adjoint_vs_fd: relative_error(&flatten(&adj.state), &flatten(&fd_state)),
    }
}

pub fn rk4(steps: usize) -> OdeSolveConfig {
    OdeSolveConfig::new(Method::Rk4, 0.0, 1.0, steps)
}

/// `dz/dt = c z` on every port.
pub fn linear(c: C64) -> DynamicsSpec {
    DynamicsSpec::autonomous(vec![Block::Gain(ComplexGain::from_complex(c).unwrap())]).unwrap()
}

/// Final-state error of `dz/dt = (-0.1 + i) z` over `[0, 1]` from `z0 = 0.6 + 0.3i`.
pub fn spiral_error(method: Method, steps: usize) -> f64 {
    let lambda = C64::new(-0.1, 1.0);
    let z0 = C64::new(0.6, 0.3);
    let rec = solve_ivp(
        &linear(lambda),
        &OpticalState::new(vec![z0]).unwrap(),
        &OdeSolveConfig::new(method, 0.0, 1.0, steps),
    )
    .unwrap();
    (rec.final_state.amplitudes()[0] - lambda.exp() * z0).norm()
}

/// Least-squares slope of `log2(error)` against `log2(step size)`.
pub fn convergence_order(method: Method, steps: &[usize]) -> f64 {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .map(|&k| ((1.0 / k as f64).log2(), spiral_error(method, k).log2()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `max |(U^H U - I)_ij|` of a mesh transfer matrix.
pub fn unitarity_defect(mesh: &MziMeshParams) -> f64 {
    let u = mesh.unitary();
    let n = u.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                s += u[(k, i)].conj() * u[(k, j)];
            }
            if i == j {
                s -= 1.0;
            }
            worst = worst.max(s.norm());
        }
    }
    worst
}

/// Random readout intensities; some rows exactly tied or all zero.
pub fn random_intensities(count: usize, rng: &mut SplitMix64) -> (Vec<[f64; 10]>, Vec<usize>) {
    let rows = (0..count)
        .map(|i| {
            let mut row = [0.0; 10];
            match i % 7 {
                5 => row = [0.25; 10],
                6 => {}
                _ => row.iter_mut().for_each(|v| *v = rng.random_range(0.0..3.0)),
            }
            row
        })
        .collect();
    let labels = (0..count).map(|_| rng.random_range(0..10)).collect();
    (rows, labels)
}

/// Checks the metric invariants on one intensity set; returns a description of the first violation.
pub fn metric_invariant_violation(rows: &[[f64; 10]], labels: &[usize], scale: f64) -> Option<String> {
    use onode::train::{argmax, metrics_from_intensities};
    let m = metrics_from_intensities(rows, labels);
    for c in 0..10 {
        let count = labels.iter().filter(|&&l| l == c).count() as u64;
        let row_sum: u64 = m.confusion[c].iter().sum();
        if row_sum != count {
            return Some(format!("confusion row {c} sums to {row_sum}, class has {count}"));
        }
        let e: f64 = m.energy_distribution[c].iter().sum();
        if count > 0 && (e - 1.0).abs() > 1e-9 {
            return Some(format!("energy row {c} sums to {e}"));
        }
    }
    for r in rows {
        let scaled = r.map(|v| v * scale);
        if argmax(&scaled) != argmax(r) {
            return Some(format!("argmax changed under scaling by {scale}"));
        }
    }
    let correct = rows.iter().zip(labels).filter(|(r, &l)| argmax(r) == l).count();
    if (m.accuracy - correct as f64 / rows.len() as f64).abs() > 0.0 {
        return Some("accuracy disagrees with argmax count".into());
    }
    None
}

/// Class `c` lights a 4x4 patch at a class-specific position, plus noise.
pub fn patch_digits(n: usize, seed: u64) -> onode::data::ImageDataset {
    let mut r = rng(seed);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 10;
        let mut img = ndarray::Array2::from_shape_fn((28, 28), |_| r.random_range(0.0..0.1));
        let (row, col) = (4 + 2 * (c / 5) * 5, 2 + 5 * (c % 5));
        for y in row..row + 4 {
            for x in col..col + 4 {
                img[(y, x)] = 1.0;
            }
        }
        images.push(img);
        labels.push(c as u8);
    }
    onode::data::ImageDataset::from_images(&images, labels).unwrap()
}

/// Relative error of a model's masked classification gradient against central differences.
pub fn model_gradient_error(model: &onode::train::Model, seed: u64) -> f64 {
    use onode::train::classification_gradient;
    let mut r = rng(seed);
    let n = model.port_count();
    let mut inputs = onode::field::Fields::zeros((3, n));
    for (i, z) in inputs.iter_mut().enumerate() {
        *z = random_amps(1, &mut r)[0] * if i % 3 == 0 { 1.5 } else { 0.7 };
    }
    let labels = [2, 7, 0];
    let readout = onode::field::ReadoutSpec::centered(n).unwrap();
    let (_, grad) = classification_gradient(model, &inputs, &labels, &readout).unwrap();
    let mask = model.trainable_mask();
    let fd: Vec<f64> = fd_gradient_oracle(
        |p| {
            let mut m = model.clone();
            m.set_params(p).unwrap();
            classification_gradient(&m, &inputs, &labels, &readout).unwrap().0
        },
        &model.params(),
        FD_EPS,
    )
    .into_iter()
    .zip(&mask)
    .map(|(g, &m)| if m { g } else { 0.0 })
    .collect();
    relative_error(&grad, &fd)
}

/// Largest distance between the closed-form spiral and a 1000-step RK4 solve over the sampled times.
pub fn spiral_reference_error() -> f64 {
    use onode::data::{spiral_reference, uniform_times, SPIRAL_SPAN, SPIRAL_START};
    let times = uniform_times(SPIRAL_SPAN, 200);
    let reference = spiral_reference(SPIRAL_START, &times).unwrap();
    let z0 = OpticalState::new(vec![C64::new(SPIRAL_START.0, SPIRAL_START.1)]).unwrap();
    let solved = onode::odeflow::sample_trajectory(
        &linear(C64::new(-0.1, 1.0)),
        &z0,
        &times,
        &OdeSolveConfig::new(Method::Rk4, 0.0, SPIRAL_SPAN, 1000),
    )
    .unwrap();
    solved
        .iter()
        .zip(&reference)
        .map(|(s, &(x, y))| (s.amplitudes()[0] - C64::new(x, y)).norm())
        .fold(0.0, f64::max)
}
