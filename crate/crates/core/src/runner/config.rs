use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Result, RunError};
use crate::activations::{ActivationKind, ActivationParams};
use crate::data::SynthFunction;
use crate::optim::OptimizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    MnistMlp,
    CsvRegression,
    FunctionFit,
    TimeseriesGru,
}

/// Initial `(a, b)` for APALU layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ApaluInit {
    /// Independent uniform draws per layer.
    Random {
        #[serde(default)]
        lo: f64,
        #[serde(default = "two")]
        hi: f64,
    },
    Explicit { a: f64, b: f64 },
    /// One of the named presets (`mnist`, `anomaly`, `regression`, `sign`,
    /// `stock`).
    Preset { name: String },
}

fn two() -> f64 {
    2.0
}

impl Default for ApaluInit {
    fn default() -> Self {
        Self::Random { lo: 0.0, hi: 2.0 }
    }
}

impl ApaluInit {
    fn validate(&self) -> Result<()> {
        match self {
            Self::Random { lo, hi } if *lo >= 0.0 && lo < hi && hi.is_finite() => Ok(()),
            Self::Random { lo, hi } => Err(RunError::Config(format!("apalu_init random range [{lo}, {hi}]"))),
            Self::Explicit { a, b } => ActivationParams::new(*a, *b)
                .map(|_| ())
                .map_err(|e| RunError::Config(format!("apalu_init: {e}"))),
            Self::Preset { name } => ActivationParams::preset(name)
                .map(|_| ())
                .ok_or_else(|| RunError::Config(format!("unknown apalu preset `{name}`"))),
        }
    }
}

/// Hidden layer sizes and APALU options. Input and output widths follow
/// from the task's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden widths for MLPs; the first entry is the GRU state size.
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub per_neuron: bool,
    #[serde(default = "yes")]
    pub trainable_activation: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    None,
    PerFeature,
    /// One mean and std over all features.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding the four standard MNIST IDX files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_limit: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    /// Column index or header name; the last column when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_column: Option<String>,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    /// Seed for the train/test shuffle; the run seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,

    #[serde(default = "default_function")]
    pub function: SynthFunction,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub noise_std: f64,

    #[serde(default = "default_series_len")]
    pub series_len: usize,
    #[serde(default = "default_lookback")]
    pub lookback: usize,
    #[serde(default = "default_drift")]
    pub drift: f64,
    #[serde(default = "default_volatility")]
    pub volatility: f64,
    /// Seed for synthetic data (noise, random walk).
    #[serde(default)]
    pub data_seed: u64,

    /// Feature scaling with training statistics. Task default when absent:
    /// `global` for MNIST, `per_feature` for tables and series, `none` for
    /// function fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardize: Option<Standardize>,
    /// Standardize regression targets; metrics are still reported in
    /// original units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardize_targets: Option<bool>,
}

fn default_fraction() -> f64 {
    0.8
}
fn default_function() -> SynthFunction {
    SynthFunction::Sin
}
fn default_interval() -> [f64; 2] {
    [-3.0, 3.0]
}
fn default_points() -> usize {
    512
}
fn default_series_len() -> usize {
    600
}
fn default_lookback() -> usize {
    20
}
fn default_drift() -> f64 {
    0.0005
}
fn default_volatility() -> f64 {
    0.02
}

impl Default for DataConfig {
    fn default() -> Self {
        serde_json::from_value(serde_json::json!({})).expect("all fields defaulted")
    }
}

/// One experiment: a task, the activation under test, baselines to compare
/// against, and the training protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub activation: ActivationKind,
    #[serde(default)]
    pub baselines: Vec<ActivationKind>,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub apalu_init: ApaluInit,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Also write `model_<seed>.json` checkpoints.
    #[serde(default)]
    pub save_checkpoints: bool,
}

impl ExperimentConfig {
    /// Desk-scale defaults per task.
    pub fn preset(task: Task) -> Self {
        let mut cfg = Self {
            task,
            activation: ActivationKind::Apalu,
            baselines: Vec::new(),
            model: ModelConfig {
                hidden: vec![32],
                per_neuron: false,
                trainable_activation: true,
            },
            optimizer: OptimizerConfig::adam(1e-3),
            batch_size: 32,
            epochs: 10,
            seeds: vec![0, 1, 2, 3, 4],
            apalu_init: ApaluInit::default(),
            data: DataConfig::default(),
            output_dir: None,
            save_checkpoints: false,
        };
        let preset = |name: &str| ApaluInit::Preset { name: name.into() };
        match task {
            Task::MnistMlp => {
                cfg.model.hidden = vec![128];
                cfg.batch_size = 128;
                cfg.epochs = 3;
                cfg.apalu_init = preset("mnist");
                cfg.baselines = ActivationKind::figure_baselines().to_vec();
                cfg.data.train_limit = Some(10_000);
            }
            Task::CsvRegression => {
                cfg.model.hidden = vec![64, 64];
                cfg.batch_size = 256;
                cfg.epochs = 200;
                cfg.apalu_init = preset("regression");
                cfg.baselines = vec![ActivationKind::Tanh];
            }
            Task::FunctionFit => {
                cfg.epochs = 2000;
            }
            Task::TimeseriesGru => {
                cfg.epochs = 30;
                cfg.apalu_init = preset("stock");
                cfg.baselines = vec![ActivationKind::Tanh];
            }
        }
        cfg
    }

    /// Parses a config. Only `task` is required; every other field falls
    /// back to that task's preset. Objects merge key by key, except tagged
    /// objects (with a `kind`), which replace the preset value whole.
    pub fn from_json(s: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(s).map_err(|e| RunError::Config(e.to_string()))?;
        let task = user
            .get("task")
            .ok_or_else(|| RunError::Config("missing field `task`".into()))?;
        let task: Task =
            serde_json::from_value(task.clone()).map_err(|e| RunError::Config(e.to_string()))?;
        let mut tree = serde_json::to_value(Self::preset(task)).expect("config serializes");
        merge(&mut tree, user);
        let cfg: Self = serde_json::from_value(tree).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` overrides, where `key` is a dotted field path
    /// such as `optimizer.lr` or `data.csv_path`. Values are parsed as JSON
    /// and fall back to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut tree = serde_json::to_value(self).expect("config serializes");
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| RunError::Config(format!("override `{o}` is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut tree, key, value)?;
        }
        let cfg: Self = serde_json::from_value(tree).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(RunError::Config(m));
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) {
            return fail(format!("model.hidden {:?}", self.model.hidden));
        }
        if self.task == Task::TimeseriesGru && self.model.hidden.len() != 1 {
            return fail("timeseries_gru takes a single hidden size".into());
        }
        self.optimizer.validate().map_err(|e| RunError::Config(e.to_string()))?;
        self.apalu_init.validate()?;
        let d = &self.data;
        if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
            return fail(format!("data.train_fraction {}", d.train_fraction));
        }
        match self.task {
            Task::MnistMlp if d.mnist_dir.is_none() => fail("mnist_mlp needs data.mnist_dir".into()),
            Task::CsvRegression if d.csv_path.is_none() => fail("csv_regression needs data.csv_path".into()),
            _ => Ok(()),
        }
    }

    /// The activation under test followed by the baselines.
    pub fn arms(&self) -> Vec<ActivationKind> {
        std::iter::once(self.activation).chain(self.baselines.iter().copied()).collect()
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) if !o.contains_key("kind") => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| RunError::Config(format!("`{key}`: `{part}` is not an index")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| RunError::Config(format!("`{key}`: index {idx} out of range")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(RunError::Config(format!("`{key}`: `{part}` is not inside an object"))),
        };
    }
    Err(RunError::Config("empty override key".into()))
}
