use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::dynamics::{CompiledDynamics, DynamicsGrad, DynamicsSpec};
use crate::error::{Error, Result};
use crate::field::{Fields, OpticalState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    Midpoint,
    Rk4,
}

impl Method {
    pub(crate) fn tableau(self) -> &'static Tableau {
        match self {
            Method::Euler => &EULER,
            Method::Midpoint => &MIDPOINT,
            Method::Rk4 => &RK4,
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Method::Euler => 1,
            Method::Midpoint => 2,
            Method::Rk4 => 4,
        }
    }

    pub fn stages(self) -> usize {
        self.tableau().b.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Adjoint,
    Discretize,
}

impl GradientMode {
    /// Exact backprop for short solves, constant-memory adjoint beyond eight steps.
    pub fn default_for_steps(steps: usize) -> Self {
        if steps <= 8 {
            GradientMode::Discretize
        } else {
            GradientMode::Adjoint
        }
    }
}

/// Explicit Runge-Kutta coefficients; `a` is strictly lower triangular.
pub(crate) struct Tableau {
    pub a: &'static [&'static [f64]],
    pub b: &'static [f64],
    pub c: &'static [f64],
}

static EULER: Tableau = Tableau {
    a: &[&[]],
    b: &[1.0],
    c: &[0.0],
};

static MIDPOINT: Tableau = Tableau {
    a: &[&[], &[0.5]],
    b: &[0.0, 1.0],
    c: &[0.0, 0.5],
};

static RK4: Tableau = Tableau {
    a: &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0]],
    b: &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
    c: &[0.0, 0.5, 0.5, 1.0],
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeSolveConfig {
    pub method: Method,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub gradient_mode: GradientMode,
    /// Rescale every row to unit energy after each step.
    #[serde(default)]
    pub renormalize: bool,
}

impl Default for OdeSolveConfig {
    fn default() -> Self {
        Self::new(Method::Rk4, 0.0, 1.0, 4)
    }
}

impl OdeSolveConfig {
    pub fn new(method: Method, t0: f64, t1: f64, steps: usize) -> Self {
        Self {
            method,
            t0,
            t1,
            steps,
            gradient_mode: GradientMode::default_for_steps(steps),
            renormalize: false,
        }
    }

    pub fn with_gradient_mode(mut self, mode: GradientMode) -> Self {
        self.gradient_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t1.is_finite()) || self.t1 <= self.t0 {
            return Err(Error::Config(format!(
                "time span must satisfy t1 > t0, got [{}, {}]",
                self.t0, self.t1
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("solver needs at least one step".into()));
        }
        if self.renormalize && self.gradient_mode == GradientMode::Adjoint {
            return Err(Error::Config(
                "per-step renormalization is not a continuous flow; use discretize gradients".into(),
            ));
        }
        Ok(())
    }

    pub fn step_size(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }
}

/// Fixed sequence of solver steps with observation points.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    /// `(t_start, dt)` of every step, in order.
    pub steps: Vec<(f64, f64)>,
    /// `marks[k]` is the number of completed steps when observation `k` is taken.
    pub marks: Vec<usize>,
}

impl Schedule {
    /// `K` equal steps over `[t0, t1]`, observed once at the end.
    pub fn uniform(config: &OdeSolveConfig) -> Self {
        let dt = config.step_size();
        let steps = (0..config.steps)
            .map(|n| (config.t0 + n as f64 * dt, dt))
            .collect();
        Self {
            steps,
            marks: vec![config.steps],
        }
    }

    /// Steps through each interval between requested times with at least one
    /// step per interval and a step no longer than `(t1 - t0) / K`.
    pub fn sampled(times: &[f64], config: &OdeSolveConfig) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Argument("no sample times requested".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Argument("sample times must be finite".into()));
        }
        if times[0] < config.t0 {
            return Err(Error::Argument(format!(
                "first sample time {} precedes t0 = {}",
                times[0], config.t0
            )));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Argument(format!(
                "sample times must be strictly ascending ({} then {})",
                w[0], w[1]
            )));
        }
        let nominal = config.step_size();
        let mut steps = Vec::new();
        let mut marks = Vec::with_capacity(times.len());
        let mut t = config.t0;
        for &target in times {
            let span = target - t;
            if span > 0.0 {
                let n = ((span / nominal) - 1e-9).ceil().max(1.0) as usize;
                let dt = span / n as f64;
                for k in 0..n {
                    steps.push((t + k as f64 * dt, dt));
                }
            }
            marks.push(steps.len());
            t = target;
        }
        Ok(Self { steps, marks })
    }
}

/// Result of a batched forward sweep.
#[derive(Clone, Debug)]
pub struct BatchSolve {
    /// State at each observation of the schedule.
    pub observations: Vec<Fields>,
    /// State at the start of every step, then the final state; present only
    /// when saving was requested.
    pub saved_states: Option<Vec<Fields>>,
    pub evaluations: usize,
}

impl BatchSolve {
    pub fn final_state(&self) -> &Fields {
        self.observations.last().expect("schedule has at least one observation")
    }
}

pub(crate) fn axpy(y: &mut Fields, s: f64, x: &Fields) {
    Zip::from(y).and(x).for_each(|y, &x| *y += x * s);
}

/// One explicit RK step from `h` at time `t` with step `dt`.
fn rk_step(dynamics: &CompiledDynamics, method: Method, h: &Fields, t: f64, dt: f64) -> Fields {
    let tab = method.tableau();
    let mut ks: Vec<Fields> = Vec::with_capacity(tab.b.len());
    for (i, row) in tab.a.iter().enumerate() {
        let k = if i == 0 {
            dynamics.eval(h, t + tab.c[i] * dt)
        } else {
            let mut y = h.to_owned();
            for (j, &aij) in row.iter().enumerate() {
                if aij != 0.0 {
                    axpy(&mut y, dt * aij, &ks[j]);
                }
            }
            dynamics.eval(&y, t + tab.c[i] * dt)
        };
        ks.push(k);
    }
    let mut next = h.to_owned();
    for (k, &b) in ks.iter().zip(tab.b) {
        if b != 0.0 {
            axpy(&mut next, dt * b, k);
        }
    }
    next
}

pub(crate) fn renormalize_rows(h: &mut Fields) {
    for mut row in h.rows_mut() {
        let norm = row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
}

/// Cotangent of `u / |u|` per row.
pub(crate) fn renormalize_pullback(u: &Fields, gy: &Fields) -> Fields {
    let mut out = gy.to_owned();
    for (mut o, row) in out.rows_mut().into_iter().zip(u.rows()) {
        let norm = row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let proj: f64 = row.iter().zip(o.iter()).map(|(y, g)| (y.conj() * g).re).sum::<f64>() / norm;
        Zip::from(&mut o).and(&row).for_each(|g, &y| {
            *g = (*g - y * (proj / norm)) / norm;
        });
    }
    out
}

/// Runs the schedule forward from `h0`.
pub fn integrate(
    dynamics: &CompiledDynamics,
    h0: &Fields,
    schedule: &Schedule,
    config: &OdeSolveConfig,
    save: bool,
) -> BatchSolve {
    let mut h = h0.to_owned();
    let mut saved = save.then(|| Vec::with_capacity(schedule.steps.len() + 1));
    let mut observations = Vec::with_capacity(schedule.marks.len());
    let mut marks = schedule.marks.iter().peekable();
    while marks.next_if(|&&m| m == 0).is_some() {
        observations.push(h.clone());
    }
    for (n, &(t, dt)) in schedule.steps.iter().enumerate() {
        if let Some(s) = saved.as_mut() {
            s.push(h.clone());
        }
        h = rk_step(dynamics, config.method, &h, t, dt);
        if config.renormalize {
            renormalize_rows(&mut h);
        }
        while marks.next_if(|&&m| m == n + 1).is_some() {
            observations.push(h.clone());
        }
    }
    if let Some(s) = saved.as_mut() {
        s.push(h);
    }
    BatchSolve {
        observations,
        saved_states: saved,
        evaluations: schedule.steps.len() * config.method.stages(),
    }
}

/// Reverse-mode pass through one stored step. Returns the cotangent of the
/// step's starting state; parameter sensitivities go to `grad`.
pub(crate) fn rk_step_pullback(
    dynamics: &CompiledDynamics,
    config: &OdeSolveConfig,
    h: &Fields,
    t: f64,
    dt: f64,
    gy: &Fields,
    grad: &mut DynamicsGrad,
) -> Fields {
    let tab = config.method.tableau();
    let stages = tab.b.len();
    let mut inputs: Vec<Fields> = Vec::with_capacity(stages);
    let mut ks: Vec<Fields> = Vec::with_capacity(stages);
    for row in tab.a.iter() {
        let mut y = h.to_owned();
        for (j, &aij) in row.iter().enumerate() {
            if aij != 0.0 {
                axpy(&mut y, dt * aij, &ks[j]);
            }
        }
        let i = inputs.len();
        ks.push(dynamics.eval(&y, t + tab.c[i] * dt));
        inputs.push(y);
    }
    let g_out = if config.renormalize {
        let mut u = h.to_owned();
        for (k, &b) in ks.iter().zip(tab.b) {
            if b != 0.0 {
                axpy(&mut u, dt * b, k);
            }
        }
        renormalize_pullback(&u, gy)
    } else {
        gy.to_owned()
    };

    let mut gh = g_out.clone();
    let mut g_inputs: Vec<Option<Fields>> = vec![None; stages];
    for i in (0..stages).rev() {
        let mut gk = Fields::zeros(h.raw_dim());
        if tab.b[i] != 0.0 {
            axpy(&mut gk, dt * tab.b[i], &g_out);
        }
        for j in i + 1..stages {
            let aji = tab.a[j].get(i).copied().unwrap_or(0.0);
            if aji != 0.0 {
                if let Some(gj) = &g_inputs[j] {
                    axpy(&mut gk, dt * aji, gj);
                }
            }
        }
        let (_, gyi) = dynamics.eval_and_pullback(&inputs[i], t + tab.c[i] * dt, &gk, grad, 1.0);
        axpy(&mut gh, 1.0, &gyi);
        g_inputs[i] = Some(gyi);
    }
    gh
}

/// Exact reverse-mode gradient of a stored forward sweep. `cotangents[k]`
/// is the loss cotangent at observation `k`.
pub fn discretize_backward(
    dynamics: &CompiledDynamics,
    solve: &BatchSolve,
    schedule: &Schedule,
    config: &OdeSolveConfig,
    cotangents: &[Fields],
) -> Result<(Fields, DynamicsGrad)> {
    let saved = solve
        .saved_states
        .as_ref()
        .ok_or_else(|| Error::State("forward solve kept no saved states".into()))?;
    if saved.len() != schedule.steps.len() + 1 {
        return Err(Error::State(format!(
            "expected {} saved states, found {}",
            schedule.steps.len() + 1,
            saved.len()
        )));
    }
    check_cotangents(schedule, cotangents, &saved[0])?;
    let mut grad = dynamics.zero_grad();
    let mut gh = Fields::zeros(saved[0].raw_dim());
    let mut k = schedule.marks.len();
    for n in (0..schedule.steps.len()).rev() {
        while k > 0 && schedule.marks[k - 1] == n + 1 {
            k -= 1;
            axpy(&mut gh, 1.0, &cotangents[k]);
        }
        let (t, dt) = schedule.steps[n];
        gh = rk_step_pullback(dynamics, config, &saved[n], t, dt, &gh, &mut grad);
    }
    while k > 0 {
        k -= 1;
        axpy(&mut gh, 1.0, &cotangents[k]);
    }
    Ok((gh, grad))
}

pub(crate) fn check_cotangents(schedule: &Schedule, cotangents: &[Fields], like: &Fields) -> Result<()> {
    if cotangents.len() != schedule.marks.len() {
        return Err(Error::shape("observation cotangents", schedule.marks.len(), cotangents.len()));
    }
    for c in cotangents {
        if c.raw_dim() != like.raw_dim() {
            return Err(Error::shape("cotangent ports", like.ncols(), c.ncols()));
        }
    }
    Ok(())
}

/// Solution of a single-state initial value problem.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveRecord {
    pub final_state: OpticalState,
    /// States at the start of every step plus the final state (discretize mode only).
    pub saved_states: Option<Vec<OpticalState>>,
    pub evaluations: usize,
}

fn to_states(fields: &[Fields]) -> Result<Vec<OpticalState>> {
    fields.iter().map(OpticalState::from_fields).collect()
}

/// Integrates `dh/dt = f(h, t)` from `t0` to `t1` with `K` fixed steps.
pub fn solve_ivp(dynamics: &DynamicsSpec, h0: &OpticalState, config: &OdeSolveConfig) -> Result<SolveRecord> {
    config.validate()?;
    dynamics.check_ports(h0.port_count())?;
    let compiled = dynamics.compile();
    let schedule = Schedule::uniform(config);
    let save = config.gradient_mode == GradientMode::Discretize;
    let solve = integrate(&compiled, &h0.to_fields(), &schedule, config, save);
    Ok(SolveRecord {
        final_state: OpticalState::from_fields(solve.final_state())?,
        saved_states: solve.saved_states.as_deref().map(to_states).transpose()?,
        evaluations: solve.evaluations,
    })
}

/// States at each requested time from one forward sweep.
pub fn sample_trajectory(
    dynamics: &DynamicsSpec,
    h0: &OpticalState,
    times: &[f64],
    config: &OdeSolveConfig,
) -> Result<Vec<OpticalState>> {
    config.validate()?;
    dynamics.check_ports(h0.port_count())?;
    let schedule = Schedule::sampled(times, config)?;
    let solve = integrate(&dynamics.compile(), &h0.to_fields(), &schedule, config, false);
    to_states(&solve.observations)
}

/// Residual cascade `h <- h + f_T(h)`, one layer per entry of `layers`.
/// Layer `T` sees time `T`.
pub fn residual_forward(layers: &[DynamicsSpec], h0: &OpticalState) -> Result<OpticalState> {
    for l in layers {
        l.check_ports(h0.port_count())?;
    }
    let compiled: Vec<CompiledDynamics> = layers.iter().map(DynamicsSpec::compile).collect();
    let out = residual_batch(&compiled, &h0.to_fields());
    OpticalState::from_fields(out.last().expect("input is always kept"))
}

/// Residual cascade on a batch; returns the input of every layer followed by the output.
pub fn residual_batch(layers: &[CompiledDynamics], h0: &Fields) -> Vec<Fields> {
    let mut states = Vec::with_capacity(layers.len() + 1);
    let mut h = h0.to_owned();
    for (i, layer) in layers.iter().enumerate() {
        let f = layer.eval(&h, i as f64);
        let mut next = h.clone();
        axpy(&mut next, 1.0, &f);
        states.push(h);
        h = next;
    }
    states.push(h);
    states
}

/// Reverse pass of [`residual_batch`]; `states` is its output.
pub fn residual_backward(layers: &[CompiledDynamics], states: &[Fields], gy: &Fields) -> (Fields, Vec<DynamicsGrad>) {
    let mut grads: Vec<DynamicsGrad> = layers.iter().map(CompiledDynamics::zero_grad).collect();
    let mut g = gy.to_owned();
    for (i, layer) in layers.iter().enumerate().rev() {
        let (_, gf) = layer.eval_and_pullback(&states[i], i as f64, &g, &mut grads[i], 1.0);
        axpy(&mut g, 1.0, &gf);
    }
    (g, grads)
}
