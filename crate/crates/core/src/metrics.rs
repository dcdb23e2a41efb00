//! Evaluation metrics and the per-run report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::LayerGains;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {pred} predictions, {target} targets")]
    Length { pred: usize, target: usize },
    #[error("target has zero variance")]
    ZeroVariance,
    #[error("target contains zero at index {0}")]
    ZeroTarget(usize),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

fn check<T, U>(pred: &[T], target: &[U]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(MetricsError::Length {
            pred: pred.len(),
            target: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], labels: &[usize]) -> Result<f64> {
    check(pred, labels)?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Row-wise argmax of `[n, k]` scores; ties go to the lowest index.
pub fn argmax_rows(scores: &[f64], k: usize) -> Vec<usize> {
    scores
        .chunks(k)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check(pred, target)?;
    let s: f64 = pred.iter().zip(target).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(s / pred.len() as f64)
}

pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    check(pred, target)?;
    let s: f64 = pred.iter().zip(target).map(|(p, t)| (t - p).abs()).sum();
    Ok(s / pred.len() as f64)
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    mse(pred, target).map(f64::sqrt)
}

/// `1 - SS_res / SS_tot`, with `SS_tot` about the target mean.
pub fn r2(pred: &[f64], target: &[f64]) -> Result<f64> {
    check(pred, target)?;
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean of `|(t - p) / t|`, as a fraction.
pub fn mape(pred: &[f64], target: &[f64]) -> Result<f64> {
    check(pred, target)?;
    if let Some(i) = target.iter().position(|&t| t == 0.0) {
        return Err(MetricsError::ZeroTarget(i));
    }
    let s: f64 = pred.iter().zip(target).map(|(p, t)| ((t - p) / t).abs()).sum();
    Ok(s / pred.len() as f64)
}

/// One row of a learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Gains of every APALU layer after one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSnapshot {
    pub epoch: usize,
    pub layers: Vec<LayerGains>,
}

/// Outcome of one training run. Metrics not meaningful for the task are
/// absent; `mape` is absent when some target is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricsReport {
    pub task: String,
    pub activation: String,
    pub seed: u64,
    pub epochs: usize,
    pub steps: u64,
    pub train_loss: f64,
    pub accuracy: Option<f64>,
    pub mae: Option<f64>,
    pub mse: Option<f64>,
    pub rmse: Option<f64>,
    pub r2: Option<f64>,
    pub mape: Option<f64>,
    pub train_mse: Option<f64>,
    pub curve: Vec<EpochRecord>,
    pub initial_gains: Vec<LayerGains>,
    pub final_gains: Vec<LayerGains>,
    pub gain_trajectory: Vec<GainSnapshot>,
    pub wall_clock_seconds: f64,
}

impl MetricsReport {
    /// Fills the regression metrics from test predictions. `r2` and `mape`
    /// are left out when undefined.
    pub fn set_regression(&mut self, pred: &[f64], target: &[f64]) -> Result<()> {
        let m = mse(pred, target)?;
        self.mse = Some(m);
        self.rmse = Some(m.sqrt());
        self.mae = Some(mae(pred, target)?);
        self.r2 = r2(pred, target).ok();
        self.mape = mape(pred, target).ok();
        Ok(())
    }

    /// Pretty JSON with the wall-clock field zeroed, for comparisons across
    /// runs.
    pub fn to_json_without_timing(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_seconds = 0.0;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    pub fn curve_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
        let mut s = String::from("epoch,train_loss,val_loss,accuracy\n");
        for r in &self.curve {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.epoch,
                r.train_loss,
                opt(r.val_loss),
                opt(r.accuracy)
            ));
        }
        s
    }
}
