use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::field::{read_intensities, row_intensities, Fields, OpticalState, ReadoutSpec, C64, CLASS_COUNT};

fn check_label(label: usize) -> Result<()> {
    if label >= CLASS_COUNT {
        return Err(Error::Argument(format!("label {label} is not a class index")));
    }
    Ok(())
}

/// Softmax cross-entropy over readout intensities, and `dL/dI`.
pub fn softmax_cross_entropy(intensities: &[f64; CLASS_COUNT], label: usize) -> (f64, [f64; CLASS_COUNT]) {
    let max = intensities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; CLASS_COUNT];
    let mut sum = 0.0;
    for (p, &i) in p.iter_mut().zip(intensities) {
        *p = (i - max).exp();
        sum += *p;
    }
    let loss = sum.ln() + max - intensities[label];
    for v in &mut p {
        *v /= sum;
    }
    p[label] -= 1.0;
    (loss, p)
}

fn row_loss(row: ArrayView1<'_, C64>, spec: &ReadoutSpec, label: usize, cot: &mut [C64]) -> f64 {
    let (loss, d_int) = softmax_cross_entropy(&row_intensities(row, spec), label);
    for (&port, d) in spec.ports().iter().zip(d_int) {
        cot[port] = row[port] * (2.0 * d);
    }
    loss
}

/// Cross-entropy of the readout intensities of one state, with the state cotangent.
pub fn intensity_cross_entropy(state: &OpticalState, spec: &ReadoutSpec, label: usize) -> Result<(f64, Vec<C64>)> {
    check_label(label)?;
    read_intensities(state, spec)?;
    let mut cot = vec![C64::new(0.0, 0.0); state.port_count()];
    let loss = row_loss(ArrayView1::from(state.amplitudes()), spec, label, &mut cot);
    Ok((loss, cot))
}

/// Mean cross-entropy over a batch and its cotangent (already divided by the batch size).
pub fn batch_cross_entropy(outputs: &Fields, spec: &ReadoutSpec, labels: &[usize]) -> Result<(f64, Fields)> {
    if outputs.nrows() != labels.len() {
        return Err(Error::shape("batch labels", outputs.nrows(), labels.len()));
    }
    if outputs.ncols() != spec.port_count() {
        return Err(Error::shape("readout ports", spec.port_count(), outputs.ncols()));
    }
    let mut cot = Fields::zeros(outputs.raw_dim());
    let mut total = 0.0;
    for ((row, mut c), &label) in outputs.rows().into_iter().zip(cot.rows_mut()).zip(labels) {
        check_label(label)?;
        total += row_loss(row, spec, label, c.as_slice_mut().expect("standard layout"));
    }
    let n = labels.len().max(1) as f64;
    cot.mapv_inplace(|v| v / n);
    Ok((total / n, cot))
}

/// Mean over points and both coordinates of the squared error, with the
/// cotangent for each predicted point.
pub fn trajectory_mse(predicted: &[(f64, f64)], target: &[(f64, f64)]) -> Result<(f64, Vec<(f64, f64)>)> {
    if predicted.len() != target.len() {
        return Err(Error::Argument(format!(
            "trajectory lengths differ: {} predicted, {} target",
            predicted.len(),
            target.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Argument("empty trajectory".into()));
    }
    let n = 2.0 * predicted.len() as f64;
    let mut loss = 0.0;
    let cot = predicted
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let (dx, dy) = (p.0 - t.0, p.1 - t.1);
            loss += dx * dx + dy * dy;
            (2.0 * dx / n, 2.0 * dy / n)
        })
        .collect();
    Ok((loss / n, cot))
}
