use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use super::adam::{adam_update, OptimizerState};
use super::loss::{batch_cross_entropy, trajectory_mse};
use super::metrics::{EpochRecord, Metrics, MetricsBuilder};
use super::model::Model;
use crate::data::{dpu_input_pipeline, make_batches, ImageDataset, Preprocessor, TrajectoryTask};
use crate::error::{Error, Result};
use crate::field::{centered_offset, mean_amplitude, row_intensities, Fields, ReadoutSpec, C64};

const EVAL_CHUNK: usize = 500;

/// Where a flattened crop lands in the model input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "placement", rename_all = "snake_case")]
pub enum Placement {
    /// Contiguous, centered among `port_count` ports.
    Ports { port_count: usize },
    /// Padded to 50 samples and upsampled to 400.
    Dpu,
}

/// Preprocessed crops with labels, expanded to model inputs on demand.
#[derive(Clone, Debug)]
pub struct ClassificationSet {
    crops: Array2<C64>,
    crop_size: usize,
    labels: Vec<usize>,
    placement: Placement,
}

impl ClassificationSet {
    pub fn encode(dataset: &ImageDataset, pre: &Preprocessor, placement: Placement) -> Result<Self> {
        let k = pre.config().crop_size;
        match placement {
            Placement::Ports { port_count } if k * k > port_count => {
                return Err(Error::Config(format!(
                    "{k}x{k} crop does not fit into {port_count} ports"
                )))
            }
            Placement::Dpu if k != 4 => {
                return Err(Error::Config(format!("the DPU pipeline takes a 4x4 crop, not {k}x{k}")))
            }
            _ => {}
        }
        let mut crops = Array2::zeros((dataset.len(), k * k));
        for (i, mut row) in crops.rows_mut().into_iter().enumerate() {
            row.assign(&ndarray::ArrayView1::from(pre.crop(dataset.image(i)).as_slice().expect("owned crop")));
        }
        Ok(Self {
            crops,
            crop_size: k,
            labels: dataset.labels().iter().map(|&l| l as usize).collect(),
            placement,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn input_ports(&self) -> usize {
        match self.placement {
            Placement::Ports { port_count } => port_count,
            Placement::Dpu => crate::data::DPU_SAMPLES,
        }
    }

    /// Model inputs for the given items, one per row.
    pub fn inputs(&self, indices: &[usize]) -> Fields {
        let n = self.input_ports();
        let mut out = Fields::zeros((indices.len(), n));
        for (mut row, &i) in out.rows_mut().into_iter().zip(indices) {
            let crop = self.crops.row(i);
            match self.placement {
                Placement::Ports { port_count } => {
                    let off = centered_offset(port_count, crop.len());
                    row.slice_mut(ndarray::s![off..off + crop.len()]).assign(&crop);
                }
                Placement::Dpu => {
                    let grid = crop
                        .to_owned()
                        .into_shape_with_order((self.crop_size, self.crop_size))
                        .expect("square crop");
                    let v = dpu_input_pipeline(grid.view()).expect("4x4 crop");
                    row.assign(&ndarray::ArrayView1::from(&v));
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 100,
            epochs: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted so that frozen runs can be replayed.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seed of the shuffle for `epoch`: the `epoch`-th SplitMix64 output from `seed`.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    let mut rng = SplitMix64::seed_from_u64(seed);
    for _ in 0..epoch {
        rng.next_u64();
    }
    rng.next_u64()
}

/// Accuracy, confusion and energy distribution of `model` on `set`.
pub fn evaluate(model: &Model, set: &ClassificationSet, readout: &ReadoutSpec) -> Result<Metrics> {
    if readout.port_count() != model.port_count() {
        return Err(Error::shape("readout ports", model.port_count(), readout.port_count()));
    }
    let compiled = model.compile();
    let mut builder = MetricsBuilder::default();
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let (out, _) = compiled.forward(&set.inputs(chunk), false)?;
        for (row, &i) in out.rows().into_iter().zip(chunk) {
            builder.push(&row_intensities(row, readout), set.labels[i]);
        }
    }
    Ok(builder.finish())
}

fn masked(mut grad: Vec<f64>, mask: &[bool]) -> Vec<f64> {
    for (g, &m) in grad.iter_mut().zip(mask) {
        if !m {
            *g = 0.0;
        }
    }
    grad
}

fn apply_step(model: &mut Model, opt: &mut OptimizerState, grad: &[f64], lr: f64) -> Result<()> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("parameter gradient".into()));
    }
    let mut params = model.params();
    adam_update(opt, &mut params, grad, lr)?;
    model.project_params(&mut params);
    model.set_params(&params)
}

/// Loss and flat masked gradient of the mean batch cross-entropy.
pub fn classification_gradient(
    model: &Model,
    inputs: &Fields,
    labels: &[usize],
    readout: &ReadoutSpec,
) -> Result<(f64, Vec<f64>)> {
    let compiled = model.compile();
    let (out, tape) = compiled.forward(inputs, true)?;
    let (loss, cot) = batch_cross_entropy(&out, readout, labels)?;
    let grads = compiled.backward(&tape.expect("tape requested"), &[cot])?;
    Ok((loss, masked(compiled.finalize(&grads), &model.trainable_mask())))
}

#[derive(Clone, Debug)]
pub struct ClassificationReport {
    pub history: Vec<EpochRecord>,
    /// Test metrics after the last epoch, with `loss_curve` filled in.
    pub metrics: Metrics,
}

/// Mini-batch Adam training; `observer` sees every finished epoch.
pub fn train_classification(
    config: &TrainConfig,
    model: &mut Model,
    opt: &mut OptimizerState,
    train: &ClassificationSet,
    test: &ClassificationSet,
    readout: &ReadoutSpec,
    start_epoch: usize,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<ClassificationReport> {
    config.validate()?;
    if opt.len() != model.param_count() {
        return Err(Error::shape("optimizer state", model.param_count(), opt.len()));
    }
    if train.input_ports() != model.port_count() || test.input_ports() != model.port_count() {
        return Err(Error::shape("task inputs", model.port_count(), train.input_ports()));
    }
    let mut history = Vec::with_capacity(config.epochs);
    let mut metrics = None;
    for epoch in start_epoch..start_epoch + config.epochs {
        let batches = make_batches(train.len(), config.batch_size, epoch_seed(config.seed, epoch))?;
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in &batches {
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let compiled = model.compile();
            let (out, tape) = compiled.forward(&train.inputs(batch), true)?;
            let (loss, cot) = batch_cross_entropy(&out, readout, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss in epoch {epoch}")));
            }
            for (row, &l) in out.rows().into_iter().zip(&labels) {
                correct += usize::from(super::metrics::argmax(&row_intensities(row, readout)) == l);
            }
            loss_sum += loss * batch.len() as f64;
            let grads = compiled.backward(&tape.expect("tape requested"), &[cot])?;
            let grad = masked(compiled.finalize(&grads), &model.trainable_mask());
            apply_step(model, opt, &grad, config.learning_rate)?;
        }
        let m = evaluate(model, test, readout)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len().max(1) as f64,
            train_acc: correct as f64 / train.len().max(1) as f64,
            test_acc: m.accuracy,
        };
        observer(&record);
        history.push(record);
        metrics = Some(m);
    }
    let mut metrics = metrics.expect("at least one epoch");
    metrics.loss_curve = history.clone();
    Ok(ClassificationReport { history, metrics })
}

/// Decoded trajectory of `model` from the task's initial point.
pub fn predict_trajectory(model: &Model, task: &TrajectoryTask) -> Result<Vec<(f64, f64)>> {
    let h0 = trajectory_input(model, task)?;
    let (obs, _) = model.compile().sample(&h0, &task.times, false)?;
    Ok(decode_all(&obs))
}

fn trajectory_input(model: &Model, task: &TrajectoryTask) -> Result<Fields> {
    Ok(crate::field::encode_trajectory_input(task.initial, model.port_count())?.to_fields())
}

fn decode_all(obs: &[Fields]) -> Vec<(f64, f64)> {
    obs.iter()
        .map(|f| {
            let m = mean_amplitude(f.row(0));
            (m.re, m.im)
        })
        .collect()
}

/// MSE over the task and its flat masked gradient.
pub fn trajectory_gradient(model: &Model, task: &TrajectoryTask) -> Result<(f64, Vec<f64>)> {
    let h0 = trajectory_input(model, task)?;
    let compiled = model.compile();
    let (obs, tape) = compiled.sample(&h0, &task.times, true)?;
    let (loss, cot) = trajectory_mse(&decode_all(&obs), &task.targets)?;
    let n = model.port_count() as f64;
    let cots: Vec<Fields> = cot
        .iter()
        .map(|&(gx, gy)| Fields::from_elem((1, model.port_count()), C64::new(gx / n, gy / n)))
        .collect();
    let grads = compiled.backward(&tape.expect("tape requested"), &cots)?;
    Ok((loss, masked(compiled.finalize(&grads), &model.trainable_mask())))
}

#[derive(Clone, Debug)]
pub struct TrajectoryReport {
    /// MSE over the active horizon before each update.
    pub losses: Vec<f64>,
    pub final_mse: f64,
    pub predicted: Vec<(f64, f64)>,
}

/// Growing fit horizon for trajectory training: the first stage fits the
/// first `start_points` samples, each later stage `growth` times as many,
/// the last stage all of them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub start_points: usize,
    pub growth: f64,
}

impl Default for Curriculum {
    fn default() -> Self {
        Self {
            start_points: 10,
            growth: 1.2,
        }
    }
}

impl Curriculum {
    /// A single stage over every sample.
    pub fn full() -> Self {
        Self {
            start_points: usize::MAX,
            growth: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.start_points == 0 {
            return Err(Error::Config("curriculum must start with at least one point".into()));
        }
        if !(self.growth.is_finite() && self.growth > 1.0) {
            return Err(Error::Config(format!(
                "curriculum growth must exceed 1, got {}",
                self.growth
            )));
        }
        Ok(())
    }

    /// Sample counts of each stage, strictly increasing and ending at `total`.
    pub fn horizons(&self, total: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut n = self.start_points as f64;
        while (n as usize) < total {
            if out.last() != Some(&(n as usize)) {
                out.push(n as usize);
            }
            n *= self.growth;
        }
        out.push(total);
        out
    }
}

/// Full-batch Adam on the trajectory MSE. Each curriculum stage runs
/// `config.epochs` updates on a prefix of the samples.
pub fn train_trajectory(
    config: &TrainConfig,
    curriculum: &Curriculum,
    model: &mut Model,
    opt: &mut OptimizerState,
    task: &TrajectoryTask,
    observer: &mut dyn FnMut(usize, f64),
) -> Result<TrajectoryReport> {
    config.validate()?;
    curriculum.validate()?;
    if opt.len() != model.param_count() {
        return Err(Error::shape("optimizer state", model.param_count(), opt.len()));
    }
    let horizons = curriculum.horizons(task.times.len());
    let mut losses = Vec::with_capacity(config.epochs * horizons.len());
    for n in horizons {
        let stage = TrajectoryTask {
            times: task.times[..n].to_vec(),
            targets: task.targets[..n].to_vec(),
            ..task.clone()
        };
        for _ in 0..config.epochs {
            let step = losses.len();
            let (loss, grad) = trajectory_gradient(model, &stage)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("trajectory loss at step {step}")));
            }
            observer(step, loss);
            losses.push(loss);
            apply_step(model, opt, &grad, config.learning_rate)?;
        }
    }
    let predicted = predict_trajectory(model, task)?;
    let (final_mse, _) = trajectory_mse(&predicted, &task.targets)?;
    if !final_mse.is_finite() {
        return Err(Error::NonFinite("final trajectory loss".into()));
    }
    Ok(TrajectoryReport {
        losses,
        final_mse,
        predicted,
    })
}
