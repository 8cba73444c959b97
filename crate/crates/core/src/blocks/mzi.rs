//! Mach-Zehnder interferometer meshes.
//!
//! Each unit acts on an adjacent port pair `(top, top + 1)` with
//!
//! ```text
//! T(theta, phi) = i e^{i theta/2} [[e^{i phi} sin(theta/2),  cos(theta/2)],
//!                                  [e^{i phi} cos(theta/2), -sin(theta/2)]]
//! ```
//!
//! and the mesh finishes with a diagonal screen of output phases.

use std::f64::consts::TAU;

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{OpticalState, C64};

pub type Mat2 = [[C64; 2]; 2];

const I: C64 = C64::new(0.0, 1.0);

/// 2x2 transfer matrix of one MZI with internal phase `theta` and external phase `phi`.
pub fn mzi_transfer(theta: f64, phi: f64) -> Mat2 {
    let g = I * C64::from_polar(1.0, theta / 2.0);
    let e = C64::from_polar(1.0, phi);
    let (s, c) = (theta / 2.0).sin_cos();
    [[g * e * s, g * c], [g * e * c, -g * s]]
}

/// Partial derivatives of [`mzi_transfer`] with respect to `theta` and `phi`.
fn mzi_transfer_derivatives(theta: f64, phi: f64) -> (Mat2, Mat2) {
    let g = I * C64::from_polar(1.0, theta / 2.0);
    let e = C64::from_polar(1.0, phi);
    let (s, c) = (theta / 2.0).sin_cos();
    let t = [[g * e * s, g * c], [g * e * c, -g * s]];
    let half_i = I * 0.5;
    let d_theta = [
        [half_i * t[0][0] + g * e * (c / 2.0), half_i * t[0][1] - g * (s / 2.0)],
        [half_i * t[1][0] - g * e * (s / 2.0), half_i * t[1][1] - g * (c / 2.0)],
    ];
    let d_phi = [[I * g * e * s, C64::new(0.0, 0.0)], [I * g * e * c, C64::new(0.0, 0.0)]];
    (d_theta, d_phi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MziUnit {
    pub top: usize,
    pub theta: f64,
    pub phi: f64,
}

/// Parameters of an `N`-port mesh: units in application order plus `N`
/// output phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MziMeshParams {
    port_count: usize,
    units: Vec<MziUnit>,
    output_phases: Vec<f64>,
}

/// Top ports of the rectangular mesh in application order: `N` columns,
/// alternately starting at port 0 and port 1.
pub fn rectangular_layout(port_count: usize) -> Vec<usize> {
    let mut tops = Vec::with_capacity(full_unit_count(port_count));
    for column in 0..port_count {
        let mut top = column % 2;
        while top + 1 < port_count {
            tops.push(top);
            top += 2;
        }
    }
    tops
}

pub fn full_unit_count(port_count: usize) -> usize {
    port_count * port_count.saturating_sub(1) / 2
}

impl MziMeshParams {
    pub fn new(port_count: usize, units: Vec<MziUnit>, output_phases: Vec<f64>) -> Result<Self> {
        if port_count == 0 {
            return Err(Error::Argument("mesh needs at least one port".into()));
        }
        if output_phases.len() != port_count {
            return Err(Error::shape("mesh output phases", port_count, output_phases.len()));
        }
        for (k, u) in units.iter().enumerate() {
            if u.top + 1 >= port_count {
                return Err(Error::Argument(format!(
                    "MZI {k} couples ports ({}, {}) outside {port_count} ports",
                    u.top,
                    u.top + 1
                )));
            }
            if !(u.theta.is_finite() && u.phi.is_finite()) {
                return Err(Error::NonFinite(format!("MZI {k} phase")));
            }
        }
        if output_phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("mesh output phase".into()));
        }
        Ok(Self {
            port_count,
            units,
            output_phases,
        })
    }

    /// Full rectangular mesh with the given phases (`thetas` and `phis` in
    /// unit order, one entry per unit).
    pub fn rectangular(port_count: usize, thetas: &[f64], phis: &[f64], output_phases: Vec<f64>) -> Result<Self> {
        let tops = rectangular_layout(port_count);
        if thetas.len() != tops.len() {
            return Err(Error::shape("mesh theta", tops.len(), thetas.len()));
        }
        if phis.len() != tops.len() {
            return Err(Error::shape("mesh phi", tops.len(), phis.len()));
        }
        let units = tops
            .into_iter()
            .zip(thetas.iter().zip(phis))
            .map(|(top, (&theta, &phi))| MziUnit { top, theta, phi })
            .collect();
        Self::new(port_count, units, output_phases)
    }

    /// Rectangular mesh with every phase drawn uniformly from `[0, 2pi)`.
    pub fn random<R: Rng + ?Sized>(port_count: usize, rng: &mut R) -> Result<Self> {
        let count = full_unit_count(port_count);
        let thetas: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..TAU)).collect();
        let phis: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..TAU)).collect();
        let out = (0..port_count).map(|_| rng.random_range(0.0..TAU)).collect();
        Self::rectangular(port_count, &thetas, &phis, out)
    }

    /// Every unit in the bar state (`theta = pi`, a diagonal transfer) with
    /// uniform random `phi` and output phases.
    pub fn random_bar<R: Rng + ?Sized>(port_count: usize, rng: &mut R) -> Result<Self> {
        let count = full_unit_count(port_count);
        let phis: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..TAU)).collect();
        let out = (0..port_count).map(|_| rng.random_range(0.0..TAU)).collect();
        Self::rectangular(port_count, &vec![std::f64::consts::PI; count], &phis, out)
    }

    /// Rectangular mesh with every unit set to the same phases and a zero output screen.
    pub fn uniform(port_count: usize, theta: f64, phi: f64) -> Result<Self> {
        let count = full_unit_count(port_count);
        Self::rectangular(port_count, &vec![theta; count], &vec![phi; count], vec![0.0; port_count])
    }

    pub fn port_count(&self) -> usize {
        self.port_count
    }

    pub fn units(&self) -> &[MziUnit] {
        &self.units
    }

    pub fn output_phases(&self) -> &[f64] {
        &self.output_phases
    }

    pub fn is_full(&self) -> bool {
        self.units.len() == full_unit_count(self.port_count)
    }

    pub fn param_count(&self) -> usize {
        2 * self.units.len() + self.port_count
    }

    /// Flat layout: all thetas, then all phis, then the output phases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.units.iter().map(|u| u.theta));
        out.extend(self.units.iter().map(|u| u.phi));
        out.extend_from_slice(&self.output_phases);
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape("mesh parameters", self.param_count(), flat.len()));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mesh parameters".into()));
        }
        let n = self.units.len();
        for (k, u) in self.units.iter_mut().enumerate() {
            u.theta = flat[k];
            u.phi = flat[n + k];
        }
        self.output_phases.copy_from_slice(&flat[2 * n..]);
        Ok(())
    }

    /// Applies the mesh in unit order to every column of a `(ports, columns)` array.
    pub fn apply_columns(&self, mut cols: ArrayViewMut2<'_, C64>) {
        debug_assert_eq!(cols.nrows(), self.port_count);
        for u in &self.units {
            let t = mzi_transfer(u.theta, u.phi);
            apply_pair(&mut cols, u.top, &t);
        }
        for (p, &psi) in self.output_phases.iter().enumerate() {
            let e = C64::from_polar(1.0, psi);
            cols.row_mut(p).mapv_inplace(|a| a * e);
        }
    }

    /// The `N x N` transfer matrix `U`; column `j` is the mesh response to port `j`.
    pub fn unitary(&self) -> Array2<C64> {
        let mut u = Array2::eye(self.port_count);
        self.apply_columns(u.view_mut());
        u
    }

    /// Reverse-mode sensitivities for inputs `x` (columns) given output
    /// cotangents `upstream`. Returns the input cotangents and the gradient
    /// in [`params`](Self::params) layout.
    ///
    /// Inputs are rebuilt on the way back by inverting each unit, so no
    /// intermediate fields are stored.
    pub fn vjp_columns(&self, x: ArrayView2<'_, C64>, upstream: ArrayView2<'_, C64>) -> (Array2<C64>, Vec<f64>) {
        let n_units = self.units.len();
        let mut grad = vec![0.0; self.param_count()];
        let mut y = x.to_owned();
        self.apply_columns(y.view_mut());
        let mut gy = upstream.to_owned();

        for (p, &psi) in self.output_phases.iter().enumerate() {
            let e = C64::from_polar(1.0, psi);
            let ec = e.conj();
            let mut acc = 0.0;
            for (yv, gv) in y.row_mut(p).iter_mut().zip(gy.row_mut(p).iter_mut()) {
                acc += (gv.conj() * I * *yv).re;
                *yv *= ec;
                *gv *= ec;
            }
            grad[2 * n_units + p] = acc;
        }

        for (k, u) in self.units.iter().enumerate().rev() {
            let t = mzi_transfer(u.theta, u.phi);
            let th = hermitian(&t);
            apply_pair(&mut y.view_mut(), u.top, &th);
            // E[r][c] = sum over columns of conj(gy_r) * x_c
            let mut e = [[C64::new(0.0, 0.0); 2]; 2];
            {
                let (y0, y1) = (y.row(u.top), y.row(u.top + 1));
                let (g0, g1) = (gy.row(u.top), gy.row(u.top + 1));
                for j in 0..y0.len() {
                    let (c0, c1) = (g0[j].conj(), g1[j].conj());
                    e[0][0] += c0 * y0[j];
                    e[0][1] += c0 * y1[j];
                    e[1][0] += c1 * y0[j];
                    e[1][1] += c1 * y1[j];
                }
            }
            let (dt, dp) = mzi_transfer_derivatives(u.theta, u.phi);
            grad[k] = contract(&dt, &e);
            grad[n_units + k] = contract(&dp, &e);
            apply_pair(&mut gy.view_mut(), u.top, &th);
        }
        (gy, grad)
    }

    /// Gradient of `Re <G, dU>` where `G = sum_b gy_b x_b^H` has been
    /// accumulated over a batch. Equivalent to [`vjp_columns`](Self::vjp_columns)
    /// with identity inputs.
    pub fn param_grad_from_outer(&self, outer: &Array2<C64>) -> Vec<f64> {
        let eye = Array2::eye(self.port_count);
        self.vjp_columns(eye.view(), outer.view()).1
    }
}

fn hermitian(t: &Mat2) -> Mat2 {
    [[t[0][0].conj(), t[1][0].conj()], [t[0][1].conj(), t[1][1].conj()]]
}

fn contract(d: &Mat2, e: &[[C64; 2]; 2]) -> f64 {
    (d[0][0] * e[0][0] + d[0][1] * e[0][1] + d[1][0] * e[1][0] + d[1][1] * e[1][1]).re
}

fn apply_pair(cols: &mut ArrayViewMut2<'_, C64>, top: usize, t: &Mat2) {
    let (mut upper, mut lower) = cols.view_mut().split_at(Axis(0), top + 1);
    let mut a = upper.row_mut(top);
    let mut b = lower.row_mut(0);
    for (x0, x1) in a.iter_mut().zip(b.iter_mut()) {
        let (u, v) = (*x0, *x1);
        *x0 = t[0][0] * u + t[0][1] * v;
        *x1 = t[1][0] * u + t[1][1] * v;
    }
}

/// Applies each unit to its port pair in mesh order, then the output phase screen.
pub fn mesh_forward(params: &MziMeshParams, state: &OpticalState) -> Result<OpticalState> {
    if state.port_count() != params.port_count {
        return Err(Error::shape("mesh input", params.port_count, state.port_count()));
    }
    let mut col = Array2::from_shape_vec((params.port_count, 1), state.amplitudes().to_vec())
        .expect("column shape");
    params.apply_columns(col.view_mut());
    OpticalState::new(col.into_raw_vec_and_offset().0)
}
