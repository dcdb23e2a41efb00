//! Config-driven training runs and activation comparisons.
//!
//! Each run draws its randomness from three ChaCha8 streams keyed by the run
//! seed: weight init (stream 0), APALU gain init (stream 1) and per-epoch
//! shuffling (stream 2, reseeded with `seed + epoch`). Weight tensors are
//! therefore identical for every activation given the same seed.

mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activations::{ActivationKind, ActivationParams};
use crate::data::{self, ColumnRef, DataError, Dataset, Targets};
use crate::engine::{EngineError, Tape, Tensor};
use crate::metrics::{self, EpochRecord, GainSnapshot, MetricsError, MetricsReport};
use crate::nn::{self, Model, ModelSpec, NnError, OutputHead};
use crate::optim::{OptimError, Optimizer};
use crate::par;

pub use config::{ApaluInit, DataConfig, ExperimentConfig, ModelConfig, Standardize, Task};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("training diverged in epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error(transparent)]
    Model(#[from] NnError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl From<EngineError> for RunError {
    fn from(e: EngineError) -> Self {
        Self::Model(NnError::Engine(e))
    }
}

pub type Result<T> = std::result::Result<T, RunError>;

pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

/// Rows evaluated per forward pass outside training.
const EVAL_CHUNK: usize = 1024;

/// Data loaded once per experiment, before any seed-dependent preparation.
#[derive(Debug, Clone)]
pub enum ExperimentData {
    /// Fixed train and test sets.
    Fixed { train: Dataset, test: Dataset },
    /// A single table split per seed.
    Table(Dataset),
    /// Windowed series, split chronologically.
    Series(Dataset),
}

/// Train and test sets for one seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
}

impl ExperimentData {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let d = &cfg.data;
        match cfg.task {
            Task::MnistMlp => {
                let dir = d.mnist_dir.as_ref().expect("validated");
                let [ti, tl, si, sl] = MNIST_FILES.map(|f| dir.join(f));
                let mut train = data::load_mnist_idx(&ti, &tl)?;
                let mut test = data::load_mnist_idx(&si, &sl)?;
                if let Some(n) = d.train_limit {
                    train = train.take(n);
                }
                if let Some(n) = d.test_limit {
                    test = test.take(n);
                }
                Ok(Self::Fixed { train, test })
            }
            Task::CsvRegression => {
                let path = d.csv_path.as_ref().expect("validated");
                let target = match &d.target_column {
                    Some(c) => c.parse().expect("infallible"),
                    None => ColumnRef::Index(last_column(path)?),
                };
                Ok(Self::Table(data::load_csv_regression(path, &target)?))
            }
            Task::FunctionFit => {
                let ds = data::synth_function(d.function, d.interval[0], d.interval[1], d.points, d.noise_std, d.data_seed)?;
                Ok(Self::Fixed {
                    train: ds.clone(),
                    test: ds,
                })
            }
            Task::TimeseriesGru => {
                let series = data::random_walk(d.series_len, 100.0, d.drift, d.volatility, d.data_seed)?;
                Ok(Self::Series(data::window_time_series(&series, d.lookback)?))
            }
        }
    }

    /// Splits and standardizes for one seed.
    pub fn prepare(&self, cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
        let d = &cfg.data;
        let (std_x, std_y) = match cfg.task {
            Task::MnistMlp => (Standardize::Global, false),
            Task::FunctionFit => (Standardize::None, false),
            Task::CsvRegression | Task::TimeseriesGru => (Standardize::PerFeature, true),
        };
        let (train, test) = match self {
            Self::Fixed { train, test } => (train.clone(), test.clone()),
            Self::Table(ds) => data::split(ds, d.train_fraction, d.split_seed.unwrap_or(seed))?,
            Self::Series(ds) => {
                let n_train = (ds.len() as f64 * d.train_fraction).floor() as usize;
                if n_train == 0 || n_train == ds.len() {
                    return Err(DataError::EmptySplit {
                        train: n_train,
                        test: ds.len() - n_train,
                    }
                    .into());
                }
                let idx: Vec<usize> = (0..ds.len()).collect();
                (ds.subset(&idx[..n_train]), ds.subset(&idx[n_train..]))
            }
        };
        let (train, test) = match d.standardize.unwrap_or(std_x) {
            Standardize::None => (train, test),
            Standardize::PerFeature => {
                let (tr, mut rest) = data::standardize(&train, &[&test])?;
                (tr, rest.remove(0))
            }
            Standardize::Global => {
                let (tr, mut rest) = data::standardize_global(&train, &[&test])?;
                (tr, rest.remove(0))
            }
        };
        let (train, test) = if d.standardize_targets.unwrap_or(std_y) && train.values().is_some() {
            let (tr, mut rest) = data::standardize_targets(&train, &[&test])?;
            (tr, rest.remove(0))
        } else {
            (train, test)
        };
        Ok(Prepared { train, test })
    }
}

fn last_column(path: &Path) -> Result<usize> {
    let io = |e: &dyn std::fmt::Display| {
        RunError::Data(DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(&e))?;
    let first = text.lines().next().ok_or_else(|| io(&"empty file"))?;
    Ok(first.split(',').count().saturating_sub(1))
}

/// Per-layer gains for an APALU model, drawn from stream 1 of `seed`.
pub fn initial_gains(init: &ApaluInit, layers: usize, seed: u64) -> Vec<ActivationParams> {
    match init {
        ApaluInit::Explicit { a, b } => vec![ActivationParams::projected(*a, *b); layers],
        ApaluInit::Preset { name } => vec![ActivationParams::preset(name).expect("validated"); layers],
        ApaluInit::Random { lo, hi } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            (0..layers)
                .map(|_| {
                    let a = rng.random_range(*lo..*hi);
                    let b = rng.random_range(*lo..*hi);
                    ActivationParams::projected(a, b)
                })
                .collect()
        }
    }
}

/// Builds the model for `activation` on the given data, with weights drawn
/// from stream 0 of `seed`.
pub fn build_model(cfg: &ExperimentConfig, activation: ActivationKind, data: &Prepared, seed: u64) -> Result<Model> {
    let input = data.train.feature_dim();
    let m = &cfg.model;
    let hidden_layers = if cfg.task == Task::TimeseriesGru { 1 } else { m.hidden.len() };
    let gains = if activation.is_apalu() {
        initial_gains(&cfg.apalu_init, hidden_layers, seed)
    } else {
        Vec::new()
    };
    let mut spec = match cfg.task {
        Task::TimeseriesGru => ModelSpec::gru_regressor(input, m.hidden[0], activation, gains.first().copied())?,
        _ => {
            let mut dims = vec![input];
            dims.extend_from_slice(&m.hidden);
            let (out, head) = match &data.train.targets {
                Targets::Classes { classes, .. } => (*classes, OutputHead::SoftmaxClassifier),
                Targets::Values(_) => (1, OutputHead::LinearRegressor),
            };
            ModelSpec::mlp(&dims, out, activation, &gains, head)?
        }
    };
    for l in &mut spec.layers {
        l.per_neuron = m.per_neuron;
        l.trainable_activation = m.trainable_activation;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    Ok(Model::new(spec, &mut rng)?)
}

/// Model outputs on every row of `ds`, in chunks.
pub fn predict_all(model: &Model, ds: &Dataset) -> Result<Tensor> {
    let n = ds.len();
    let mut out = Vec::new();
    let mut width = 0;
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let y = model.predict(&ds.features.gather_rows(&idx))?;
        width = y.shape()[1];
        out.extend_from_slice(y.data());
    }
    Ok(Tensor::new(vec![n, width], out)?)
}

fn batch_loss(tape: &mut Tape, model: &Model, ds: &Dataset, idx: &[usize]) -> Result<crate::engine::Var> {
    let vars = model.bind(tape)?;
    let x = tape.constant(ds.features.gather_rows(idx))?;
    let out = model.forward(tape, &vars, x)?;
    let loss = match &ds.targets {
        Targets::Classes { labels, .. } => {
            let l: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            nn::softmax_cross_entropy(tape, out, &l)?
        }
        Targets::Values(t) => {
            let y = tape.constant(t.gather_rows(idx))?;
            nn::mse_loss(tape, out, y)?
        }
    };
    Ok(loss)
}

/// Mean loss and, for classification, accuracy of `model` on `ds`.
fn evaluate(model: &Model, ds: &Dataset) -> Result<(f64, Option<f64>)> {
    let out = predict_all(model, ds)?;
    match &ds.targets {
        Targets::Classes { labels, classes } => {
            let probs = nn::softmax(&out)?;
            let nll: f64 = labels
                .iter()
                .enumerate()
                .map(|(i, &l)| -probs.get2(i, l).max(f64::MIN_POSITIVE).ln())
                .sum();
            let acc = metrics::accuracy(&metrics::argmax_rows(out.data(), *classes), labels)?;
            Ok((nll / labels.len() as f64, Some(acc)))
        }
        Targets::Values(t) => Ok((metrics::mse(out.data(), t.data())?, None)),
    }
}

fn diverged(epoch: usize, e: RunError) -> RunError {
    match e {
        RunError::Model(NnError::Engine(EngineError::NonFinite { op })) => RunError::Diverged {
            epoch,
            detail: format!("non-finite value in {op}"),
        },
        other => other,
    }
}

/// Original-unit values of a `[n, 1]` prediction or target tensor.
fn original_units(ds: &Dataset, values: &[f64]) -> Vec<f64> {
    match &ds.target_normalization {
        Some(n) => n.invert(values),
        None => values.to_vec(),
    }
}

/// Trains one model for one seed and evaluates it.
pub fn run_seed(cfg: &ExperimentConfig, activation: ActivationKind, data: &Prepared, seed: u64) -> Result<(MetricsReport, Model)> {
    let started = Instant::now();
    let mut model = build_model(cfg, activation, data, seed)?;
    let mut opt = Optimizer::new(cfg.optimizer.clone())?;
    let train = &data.train;
    let n = train.len();
    let initial_gains = model.layer_gains();
    let mut report = MetricsReport {
        task: serde_json::to_value(cfg.task)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        activation: activation.to_string(),
        seed,
        epochs: cfg.epochs,
        initial_gains: initial_gains.clone(),
        gain_trajectory: vec![GainSnapshot {
            epoch: 0,
            layers: initial_gains,
        }],
        ..Default::default()
    };

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(epoch as u64));
        rng.set_stream(2);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut step = || -> Result<f64> {
                let mut tape = Tape::new();
                let loss = batch_loss(&mut tape, &model, train, batch)?;
                let value = tape.value(loss).item()?;
                let grads = tape.backward(loss)?;
                opt.step(model.params_mut(), &grads.into_map())?;
                Ok(value)
            };
            let value = step().map_err(|e| diverged(epoch, e))?;
            if !value.is_finite() {
                return Err(RunError::Diverged {
                    epoch,
                    detail: format!("loss is {value}"),
                });
            }
            total += value * batch.len() as f64;
        }
        let (val_loss, accuracy) = evaluate(&model, &data.test).map_err(|e| diverged(epoch, e))?;
        report.curve.push(EpochRecord {
            epoch,
            train_loss: total / n as f64,
            val_loss: Some(val_loss),
            accuracy,
        });
        report.gain_trajectory.push(GainSnapshot {
            epoch,
            layers: model.layer_gains(),
        });
    }

    report.steps = opt.steps();
    report.train_loss = report.curve.last().map_or(f64::NAN, |r| r.train_loss);
    report.final_gains = model.layer_gains();
    match &data.test.targets {
        Targets::Classes { .. } => {
            report.accuracy = report.curve.last().and_then(|r| r.accuracy);
        }
        Targets::Values(t) => {
            let pred = predict_all(&model, &data.test)?;
            let p = original_units(&data.test, pred.data());
            let y = original_units(&data.test, t.data());
            report.set_regression(&p, &y)?;
            let pred = predict_all(&model, train)?;
            let p = original_units(train, pred.data());
            let y = original_units(train, train.values().expect("regression").data());
            report.train_mse = Some(metrics::mse(&p, &y)?);
        }
    }
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok((report, model))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_run(dir: &Path, report: &MetricsReport, model: &Model, checkpoint: bool) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_file(&dir.join(format!("report_{}.json", report.seed)), &json)?;
    write_file(&dir.join(format!("curve_{}.csv", report.seed)), &report.curve_csv())?;
    if checkpoint {
        write_file(&dir.join(format!("model_{}.json", report.seed)), &model.to_json())?;
    }
    Ok(())
}

fn run_arm(cfg: &ExperimentConfig, data: &ExperimentData, activation: ActivationKind, dir: Option<PathBuf>) -> Result<Vec<MetricsReport>> {
    let results = par::map_collect(cfg.seeds.len(), |i| {
        let seed = cfg.seeds[i];
        let prepared = data.prepare(cfg, seed)?;
        run_seed(cfg, activation, &prepared, seed)
    });
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        let (report, model) = r?;
        if let Some(dir) = &dir {
            write_run(dir, &report, &model, cfg.save_checkpoints)?;
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Trains `cfg.activation` once per seed. Seeds run as independent jobs;
/// reports come back in seed order and are written to `output_dir` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsReport>> {
    cfg.validate()?;
    let data = ExperimentData::load(cfg)?;
    run_arm(cfg, &data, cfg.activation, cfg.output_dir.clone())
}

/// Mean and sample standard deviation (zero for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

pub const COMPARISON_METRICS: [&str; 8] = ["accuracy", "mse", "rmse", "mae", "r2", "mape", "train_mse", "train_loss"];

fn metric(r: &MetricsReport, name: &str) -> Option<f64> {
    match name {
        "accuracy" => r.accuracy,
        "mse" => r.mse,
        "rmse" => r.rmse,
        "mae" => r.mae,
        "r2" => r.r2,
        "mape" => r.mape,
        "train_mse" => r.train_mse,
        "train_loss" => Some(r.train_loss),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub activation: String,
    pub seeds: usize,
    /// In the order of [`COMPARISON_METRICS`]; absent when any run lacks it.
    pub metrics: Vec<(String, Option<MeanStd>)>,
}

impl ComparisonRow {
    pub fn get(&self, name: &str) -> Option<MeanStd> {
        self.metrics.iter().find(|(n, _)| n == name).and_then(|(_, m)| *m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Per-arm reports, in arm order then seed order.
    pub reports: Vec<Vec<MetricsReport>>,
}

impl Comparison {
    pub fn from_reports(arms: &[ActivationKind], reports: Vec<Vec<MetricsReport>>) -> Self {
        let rows = arms
            .iter()
            .zip(&reports)
            .map(|(arm, runs)| ComparisonRow {
                activation: arm.to_string(),
                seeds: runs.len(),
                metrics: COMPARISON_METRICS
                    .iter()
                    .map(|&m| {
                        let v: Option<Vec<f64>> = runs.iter().map(|r| metric(r, m)).collect();
                        (m.to_string(), v.and_then(|v| MeanStd::of(&v)))
                    })
                    .collect(),
            })
            .collect();
        Self { rows, reports }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("activation,seeds");
        for m in COMPARISON_METRICS {
            s.push_str(&format!(",{m}_mean,{m}_std"));
        }
        s.push('\n');
        for row in &self.rows {
            s.push_str(&format!("{},{}", row.activation, row.seeds));
            for (_, v) in &row.metrics {
                match v {
                    Some(ms) => s.push_str(&format!(",{},{}", ms.mean, ms.std)),
                    None => s.push_str(",,"),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Rows only, without the per-run reports.
    pub fn table_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("rows serialize")
    }
}

fn arm_dir(root: &Path, arm: ActivationKind) -> PathBuf {
    root.join(arm.to_string().replace([':', '.'], "_"))
}

/// Runs every arm (`activation` then `baselines`) on every seed with the
/// same data order and weight init. With an output directory, per-run files
/// go to one subdirectory per arm and the table to `comparison.csv` and
/// `comparison.json`.
pub fn compare_activations(cfg: &ExperimentConfig) -> Result<Comparison> {
    cfg.validate()?;
    let data = ExperimentData::load(cfg)?;
    let arms = cfg.arms();
    let results = par::map_collect(arms.len(), |i| {
        run_arm(cfg, &data, arms[i], cfg.output_dir.as_ref().map(|d| arm_dir(d, arms[i])))
    });
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    let cmp = Comparison::from_reports(&arms, reports);
    if let Some(dir) = &cfg.output_dir {
        write_file(&dir.join("comparison.csv"), &cmp.to_csv())?;
        write_file(&dir.join("comparison.json"), &cmp.table_json())?;
    }
    Ok(cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_fit() -> ExperimentConfig {
        ExperimentConfig::preset(Task::FunctionFit)
            .with_overrides(&["epochs=3", "seeds=[5]", "data.points=16", "model.hidden=[4]"])
            .unwrap()
    }

    #[test]
    fn one_full_batch_epoch_is_one_step() {
        let cfg = tiny_fit().with_overrides(&["epochs=1", "batch_size=16"]).unwrap();
        let r = &run_experiment(&cfg).unwrap()[0];
        assert_eq!(r.steps, 1);
        assert_eq!(r.curve.len(), 1);
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = tiny_fit();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a[0].to_json_without_timing(), b[0].to_json_without_timing());
    }

    #[test]
    fn weights_match_across_arms() {
        let cfg = tiny_fit();
        let data = ExperimentData::load(&cfg).unwrap().prepare(&cfg, 5).unwrap();
        let weights = |kind| {
            build_model(&cfg, kind, &data, 5)
                .unwrap()
                .params()
                .entries()
                .iter()
                .filter(|e| e.role == nn::ParamRole::Weight)
                .map(|e| e.value.clone())
                .collect::<Vec<_>>()
        };
        let apalu = weights(ActivationKind::Apalu);
        for kind in [ActivationKind::Relu, ActivationKind::Tanh, ActivationKind::GeluExact] {
            assert_eq!(weights(kind), apalu);
        }
    }

    #[test]
    fn random_gains_stay_in_range() {
        for seed in 0..20 {
            for p in initial_gains(&ApaluInit::default(), 3, seed) {
                assert!(p.a() > 0.0 && p.a() < 2.0 && p.b() > 0.0 && p.b() < 2.0);
            }
        }
    }

    #[test]
    fn divergence_names_the_epoch() {
        let cfg = tiny_fit()
            .with_overrides(&["optimizer.kind=\"sgd\"", "optimizer.lr=1e200", "activation=relu"])
            .unwrap();
        match run_experiment(&cfg) {
            Err(RunError::Diverged { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn single_arm_comparison_matches_run() {
        let cfg = tiny_fit();
        let cmp = compare_activations(&cfg).unwrap();
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(cmp.rows.len(), 1);
        let row = &cmp.rows[0];
        assert_eq!(row.get("mse").unwrap(), MeanStd { mean: run[0].mse.unwrap(), std: 0.0 });
        assert_eq!(row.get("accuracy"), None);
    }

    #[test]
    fn duplicate_arms_give_identical_rows() {
        let mut cfg = tiny_fit();
        cfg.baselines = vec![ActivationKind::Apalu];
        let cmp = compare_activations(&cfg).unwrap();
        assert_eq!(cmp.rows[0], cmp.rows[1]);
    }

    #[test]
    fn output_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_fit();
        cfg.baselines = vec![ActivationKind::LEAKY_RELU];
        cfg.output_dir = Some(dir.path().to_path_buf());
        cfg.save_checkpoints = true;
        compare_activations(&cfg).unwrap();
        for f in ["comparison.csv", "comparison.json", "apalu/report_5.json", "apalu/curve_5.csv", "apalu/model_5.json", "lrelu/report_5.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let csv = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
        assert!(csv.starts_with("activation,seeds,accuracy_mean,accuracy_std,mse_mean"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn mean_std() {
        assert_eq!(MeanStd::of(&[]), None);
        assert_eq!(MeanStd::of(&[2.0]), Some(MeanStd { mean: 2.0, std: 0.0 }));
        let m = MeanStd::of(&[1.0, 3.0]).unwrap();
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 2f64.sqrt()).abs() < 1e-15);
    }
}
