use serde::{Deserialize, Serialize};

use crate::field::CLASS_COUNT;

/// Index of the largest intensity; the lowest index wins ties.
pub fn argmax(intensities: &[f64; CLASS_COUNT]) -> usize {
    let mut best = 0;
    for (i, &v) in intensities.iter().enumerate().skip(1) {
        if v > intensities[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Rows are true classes, columns predictions.
    pub confusion: [[u64; CLASS_COUNT]; CLASS_COUNT],
    /// Row `c`: mean normalized readout intensity over samples of class `c`.
    pub energy_distribution: [[f64; CLASS_COUNT]; CLASS_COUNT],
    pub loss_curve: Vec<EpochRecord>,
}

/// Streaming accumulator behind [`Metrics`].
#[derive(Clone, Debug)]
pub struct MetricsBuilder {
    confusion: [[u64; CLASS_COUNT]; CLASS_COUNT],
    energy_sum: [[f64; CLASS_COUNT]; CLASS_COUNT],
    correct: u64,
    total: u64,
}

impl Default for MetricsBuilder {
    fn default() -> Self {
        Self {
            confusion: [[0; CLASS_COUNT]; CLASS_COUNT],
            energy_sum: [[0.0; CLASS_COUNT]; CLASS_COUNT],
            correct: 0,
            total: 0,
        }
    }
}

impl MetricsBuilder {
    pub fn push(&mut self, intensities: &[f64; CLASS_COUNT], label: usize) -> usize {
        let pred = argmax(intensities);
        self.confusion[label][pred] += 1;
        self.total += 1;
        if pred == label {
            self.correct += 1;
        }
        let sum: f64 = intensities.iter().sum();
        let row = &mut self.energy_sum[label];
        if sum > 0.0 {
            for (acc, &v) in row.iter_mut().zip(intensities) {
                *acc += v / sum;
            }
        } else {
            for acc in row.iter_mut() {
                *acc += 1.0 / CLASS_COUNT as f64;
            }
        }
        pred
    }

    pub fn finish(self) -> Metrics {
        let mut energy = [[0.0; CLASS_COUNT]; CLASS_COUNT];
        for c in 0..CLASS_COUNT {
            let n: u64 = self.confusion[c].iter().sum();
            if n > 0 {
                for p in 0..CLASS_COUNT {
                    energy[c][p] = self.energy_sum[c][p] / n as f64;
                }
            }
        }
        Metrics {
            accuracy: if self.total == 0 {
                0.0
            } else {
                self.correct as f64 / self.total as f64
            },
            confusion: self.confusion,
            energy_distribution: energy,
            loss_curve: Vec::new(),
        }
    }
}

/// Metrics from precomputed readout intensities.
pub fn metrics_from_intensities(intensities: &[[f64; CLASS_COUNT]], labels: &[usize]) -> Metrics {
    let mut b = MetricsBuilder::default();
    for (i, &l) in intensities.iter().zip(labels) {
        b.push(i, l);
    }
    b.finish()
}
