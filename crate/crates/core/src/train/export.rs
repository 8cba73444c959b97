use std::fmt::Write as _;
use std::path::Path;

use super::metrics::{EpochRecord, Metrics};
use crate::error::{Error, Result};
use crate::field::CLASS_COUNT;

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,test_acc";
pub const TRAJECTORY_HEADER: &str = "t,x_pred,y_pred,x_true,y_true";

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = format!("{HISTORY_HEADER}\n");
    for r in history {
        writeln!(s, "{},{},{},{}", r.epoch, r.train_loss, r.train_acc, r.test_acc).expect("write to String");
    }
    s
}

fn grid_csv<T: std::fmt::Display>(row_label: &str, col_prefix: &str, rows: &[[T; CLASS_COUNT]; CLASS_COUNT]) -> String {
    let mut s = String::from(row_label);
    for c in 0..CLASS_COUNT {
        write!(s, ",{col_prefix}{c}").expect("write to String");
    }
    s.push('\n');
    for (i, row) in rows.iter().enumerate() {
        write!(s, "{i}").expect("write to String");
        for v in row {
            write!(s, ",{v}").expect("write to String");
        }
        s.push('\n');
    }
    s
}

/// Confusion counts: rows are true classes, columns `pred_0..pred_9`.
pub fn confusion_csv(metrics: &Metrics) -> String {
    grid_csv("true_class", "pred_", &metrics.confusion)
}

/// Energy distribution: rows are true classes, columns `port_0..port_9`.
pub fn energy_csv(metrics: &Metrics) -> String {
    grid_csv("true_class", "port_", &metrics.energy_distribution)
}

pub fn trajectory_csv(times: &[f64], predicted: &[(f64, f64)], target: &[(f64, f64)]) -> String {
    let mut s = format!("{TRAJECTORY_HEADER}\n");
    for ((t, p), q) in times.iter().zip(predicted).zip(target) {
        writeln!(s, "{t},{},{},{},{}", p.0, p.1, q.0, q.1).expect("write to String");
    }
    s
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a file written by [`history_csv`].
pub fn parse_history_csv(text: &str) -> Result<Vec<EpochRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(Error::Argument(format!("metrics CSV must start with `{HISTORY_HEADER}`")));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::Argument(format!("malformed metrics row `{l}`"));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(EpochRecord {
                epoch: f[0].parse().map_err(|_| bad())?,
                train_loss: f[1].parse().map_err(|_| bad())?,
                train_acc: f[2].parse().map_err(|_| bad())?,
                test_acc: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
