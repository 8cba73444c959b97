use super::dynamics::{CompiledDynamics, DynamicsGrad, DynamicsSpec};
use super::solver::{
    axpy, check_cotangents, discretize_backward, integrate, BatchSolve, GradientMode, OdeSolveConfig, Schedule,
    SolveRecord,
};
use crate::error::{Error, Result};
use crate::field::{Fields, OpticalState, C64};

/// Adjoint sweep for a batch: integrates the state, its adjoint and the
/// parameter accumulator backward over `schedule`. Only the observed states
/// of `solve` are used; nothing per step is stored.
pub fn adjoint_backward(
    dynamics: &CompiledDynamics,
    solve: &BatchSolve,
    schedule: &Schedule,
    config: &OdeSolveConfig,
    cotangents: &[Fields],
) -> Result<(Fields, DynamicsGrad)> {
    if config.renormalize {
        return Err(Error::Config("adjoint gradients need a solve without renormalization".into()));
    }
    if solve.observations.len() != schedule.marks.len() {
        return Err(Error::State(format!(
            "expected {} observed states, found {}",
            schedule.marks.len(),
            solve.observations.len()
        )));
    }
    check_cotangents(schedule, cotangents, &solve.observations[0])?;
    let tab = config.method.tableau();
    let stages = tab.b.len();
    let mut grad = dynamics.zero_grad();
    let mut a = Fields::zeros(solve.observations[0].raw_dim());
    let mut h = solve.final_state().to_owned();
    let mut k = schedule.marks.len();
    let mut kh: Vec<Fields> = Vec::with_capacity(stages);
    let mut ka: Vec<Fields> = Vec::with_capacity(stages);
    for n in (0..schedule.steps.len()).rev() {
        while k > 0 && schedule.marks[k - 1] == n + 1 {
            k -= 1;
            h.assign(&solve.observations[k]);
            axpy(&mut a, 1.0, &cotangents[k]);
        }
        let (t, dt) = schedule.steps[n];
        let t_end = t + dt;
        let s = -dt;
        kh.clear();
        ka.clear();
        for (i, row) in tab.a.iter().enumerate() {
            let mut hi = h.to_owned();
            let mut ai = a.to_owned();
            for (j, &aij) in row.iter().enumerate() {
                if aij != 0.0 {
                    axpy(&mut hi, s * aij, &kh[j]);
                    axpy(&mut ai, s * aij, &ka[j]);
                }
            }
            let (f, mut vjp) = dynamics.eval_and_pullback(&hi, t_end - tab.c[i] * dt, &ai, &mut grad, dt * tab.b[i]);
            vjp.mapv_inplace(|v| -v);
            kh.push(f);
            ka.push(vjp);
        }
        for ((khi, kai), &b) in kh.iter().zip(&ka).zip(tab.b) {
            if b != 0.0 {
                axpy(&mut h, s * b, khi);
                axpy(&mut a, s * b, kai);
            }
        }
    }
    while k > 0 {
        k -= 1;
        axpy(&mut a, 1.0, &cotangents[k]);
    }
    Ok((a, grad))
}

/// Backward pass in the configured gradient mode. `solve` must come from
/// [`integrate`] with states saved whenever the mode is discretize.
pub fn backward(
    dynamics: &CompiledDynamics,
    solve: &BatchSolve,
    schedule: &Schedule,
    config: &OdeSolveConfig,
    cotangents: &[Fields],
) -> Result<(Fields, DynamicsGrad)> {
    match config.gradient_mode {
        GradientMode::Discretize => discretize_backward(dynamics, solve, schedule, config, cotangents),
        GradientMode::Adjoint => adjoint_backward(dynamics, solve, schedule, config, cotangents),
    }
}

/// Gradients of a real loss with respect to the initial state and the chain parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub state: Vec<C64>,
    pub params: Vec<f64>,
    /// Number of full states held for the backward pass.
    pub stored_states: usize,
}

fn single_cotangent(cot: &[C64], ports: usize) -> Result<Fields> {
    if cot.len() != ports {
        return Err(Error::shape("loss cotangent", ports, cot.len()));
    }
    Ok(Fields::from_shape_vec((1, ports), cot.to_vec()).expect("row shape"))
}

/// Backpropagation through the unrolled solve stored in `record`.
pub fn discretize_gradients(
    dynamics: &DynamicsSpec,
    record: &SolveRecord,
    config: &OdeSolveConfig,
    loss_cotangent: &[C64],
) -> Result<Gradients> {
    config.validate()?;
    let saved = record
        .saved_states
        .as_ref()
        .ok_or_else(|| Error::State("solve record has no saved states".into()))?;
    let fields: Vec<Fields> = saved.iter().map(OpticalState::to_fields).collect();
    let ports = record.final_state.port_count();
    let solve = BatchSolve {
        observations: vec![record.final_state.to_fields()],
        evaluations: record.evaluations,
        saved_states: Some(fields),
    };
    let compiled = dynamics.compile();
    let schedule = Schedule::uniform(config);
    let cot = single_cotangent(loss_cotangent, ports)?;
    let (gh, grad) = discretize_backward(&compiled, &solve, &schedule, config, &[cot])?;
    Ok(Gradients {
        state: gh.into_raw_vec_and_offset().0,
        params: compiled.finalize(&grad),
        stored_states: saved.len(),
    })
}

/// Gradients by integrating the adjoint system backward from `t1`, with the
/// state reconstructed along the way instead of stored.
pub fn adjoint_gradients(
    dynamics: &DynamicsSpec,
    h0: &OpticalState,
    config: &OdeSolveConfig,
    loss_cotangent: &[C64],
) -> Result<Gradients> {
    let config = OdeSolveConfig {
        gradient_mode: GradientMode::Adjoint,
        ..*config
    };
    config.validate()?;
    dynamics.check_ports(h0.port_count())?;
    let compiled = dynamics.compile();
    let schedule = Schedule::uniform(&config);
    let solve = integrate(&compiled, &h0.to_fields(), &schedule, &config, false);
    let cot = single_cotangent(loss_cotangent, h0.port_count())?;
    let (gh, grad) = adjoint_backward(&compiled, &solve, &schedule, &config, &[cot])?;
    Ok(Gradients {
        state: gh.into_raw_vec_and_offset().0,
        params: compiled.finalize(&grad),
        stored_states: solve.observations.len(),
    })
}
