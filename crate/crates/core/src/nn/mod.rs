//! Model description, parameter storage and forward passes.
//!
//! A model owns a flat [`ParamStore`]; each entry's index doubles as its
//! [`ParamId`] on the tape. APALU layers carry one `(a, b)` pair shared by
//! all units unless `per_neuron` is set.

mod checkpoint;
mod layers;
mod loss;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activations::{ActivationKind, ActivationParams, POSITIVITY_FLOOR};
use crate::engine::{EngineError, ParamId, Tape, Tensor, Var};

pub use checkpoint::{Checkpoint, ParamRecord, CHECKPOINT_VERSION};
pub use layers::{dense_forward, gru_cell_step, GruCellParams};
pub use loss::{mae_loss, mse_loss, softmax, softmax_cross_entropy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub type Result<T> = std::result::Result<T, NnError>;

fn spec_err(msg: impl Into<String>) -> NnError {
    NnError::InvalidSpec(msg.into())
}

/// One dense layer, or the recurrent cell of a GRU regressor (where
/// `activation` is the candidate nonlinearity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: ActivationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation_params: Option<ActivationParams>,
    #[serde(default = "default_true")]
    pub trainable_activation: bool,
    /// One `(a, b)` per output unit instead of one per layer.
    #[serde(default)]
    pub per_neuron: bool,
}

fn default_true() -> bool {
    true
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: ActivationKind) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            activation_params: None,
            trainable_activation: true,
            per_neuron: false,
        }
    }

    pub fn apalu(in_dim: usize, out_dim: usize, params: ActivationParams) -> Self {
        Self {
            activation_params: Some(params),
            ..Self::new(in_dim, out_dim, ActivationKind::Apalu)
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(spec_err(format!("{what}: dimensions must be >= 1")));
        }
        match (self.activation.is_apalu(), self.activation_params.is_some()) {
            (true, false) => Err(spec_err(format!("{what}: APALU layer needs activation_params"))),
            (false, true) => Err(spec_err(format!(
                "{what}: activation_params given for non-APALU activation {}",
                self.activation
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    GruRegressor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// Linear logits; softmax lives in the loss. Never APALU.
    SoftmaxClassifier,
    LinearRegressor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub layers: Vec<LayerSpec>,
    pub head: OutputHead,
    pub output_dim: usize,
}

impl ModelSpec {
    /// Multilayer perceptron: `dims[0] -> dims[1] -> ... -> output_dim`, every
    /// hidden layer using `activation`.
    pub fn mlp(
        dims: &[usize],
        output_dim: usize,
        activation: ActivationKind,
        gains: &[ActivationParams],
        head: OutputHead,
    ) -> Result<Self> {
        if dims.is_empty() {
            return Err(spec_err("MLP needs an input dimension"));
        }
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let mut l = LayerSpec::new(w[0], w[1], activation);
                if activation.is_apalu() {
                    l.activation_params = gains.get(i).copied();
                }
                l
            })
            .collect();
        let spec = Self {
            kind: ModelKind::Mlp,
            layers,
            head,
            output_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gru_regressor(
        input_dim: usize,
        hidden: usize,
        candidate: ActivationKind,
        gains: Option<ActivationParams>,
    ) -> Result<Self> {
        let mut cell = LayerSpec::new(input_dim, hidden, candidate);
        cell.activation_params = gains;
        let spec = Self {
            kind: ModelKind::GruRegressor,
            layers: vec![cell],
            head: OutputHead::LinearRegressor,
            output_dim: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_dim == 0 {
            return Err(spec_err("output_dim must be >= 1"));
        }
        match self.kind {
            ModelKind::Mlp => {
                if self.layers.is_empty() {
                    return Err(spec_err("MLP needs at least one hidden layer"));
                }
            }
            ModelKind::GruRegressor => {
                if self.layers.len() != 1 {
                    return Err(spec_err("GRU regressor has exactly one recurrent layer"));
                }
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate(&format!("layer {i}"))?;
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].out_dim != w[1].in_dim {
                return Err(spec_err(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].out_dim,
                    i + 1,
                    w[1].in_dim
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    Weight,
    Bias,
    GainA,
    GainB,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub layer: usize,
    pub role: ParamRole,
    pub trainable: bool,
    pub value: Tensor,
}

/// Flat, ordered parameter storage. Index `i` is `ParamId(i)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    fn push(&mut self, name: String, layer: usize, role: ParamRole, trainable: bool, value: Tensor) -> usize {
        self.entries.push(ParamEntry {
            name,
            layer,
            role,
            trainable,
            value,
        });
        self.entries.len() - 1
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> Option<&ParamEntry> {
        self.entries.get(id.0)
    }

    pub fn value_mut(&mut self, id: ParamId) -> Option<&mut Tensor> {
        self.entries.get_mut(id.0).map(|e| &mut e.value)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    /// Clamps every activation gain to the positivity floor.
    pub fn project_gains(&mut self) {
        for e in &mut self.entries {
            if matches!(e.role, ParamRole::GainA | ParamRole::GainB) {
                for v in e.value.data_mut() {
                    *v = if v.is_nan() { POSITIVITY_FLOOR } else { v.max(POSITIVITY_FLOOR) };
                }
            }
        }
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }
}

/// Learned gains of one APALU layer. For per-neuron layers `a` and `b` are
/// the means over units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerGains {
    pub layer: usize,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum LayerSlots {
    Dense {
        w: usize,
        b: usize,
        gains: Option<(usize, usize)>,
    },
    Gru {
        cell: [usize; 9],
        gains: Option<(usize, usize)>,
    },
}

/// A model spec together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: ParamStore,
    slots: Vec<LayerSlots>,
    head: (usize, usize),
}

/// Glorot-uniform matrix `[fan_in, fan_out]`.
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("shape matches data")
}

const GRU_NAMES: [&str; 9] = ["w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h"];

impl Model {
    /// Builds the model with Glorot-uniform weights from `rng` and zero
    /// biases. Activation gains come from `spec`, so the weight stream is
    /// the same for every activation choice.
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamStore::default();
        let mut slots = Vec::with_capacity(spec.layers.len());
        for (li, l) in spec.layers.iter().enumerate() {
            let slot = match spec.kind {
                ModelKind::Mlp => {
                    let w = params.push(format!("layer{li}.w"), li, ParamRole::Weight, true, glorot_uniform(rng, l.in_dim, l.out_dim));
                    let b = params.push(format!("layer{li}.b"), li, ParamRole::Bias, true, Tensor::zeros(&[l.out_dim]));
                    LayerSlots::Dense {
                        w,
                        b,
                        gains: push_gains(&mut params, li, l),
                    }
                }
                ModelKind::GruRegressor => {
                    let mut cell = [0usize; 9];
                    for (k, name) in GRU_NAMES.iter().enumerate() {
                        let value = match k % 3 {
                            0 => glorot_uniform(rng, l.in_dim, l.out_dim),
                            1 => glorot_uniform(rng, l.out_dim, l.out_dim),
                            _ => Tensor::zeros(&[l.out_dim]),
                        };
                        let role = if k % 3 == 2 { ParamRole::Bias } else { ParamRole::Weight };
                        cell[k] = params.push(format!("layer{li}.{name}"), li, role, true, value);
                    }
                    LayerSlots::Gru {
                        cell,
                        gains: push_gains(&mut params, li, l),
                    }
                }
            };
            slots.push(slot);
        }
        let last = spec.layers.last().map_or(0, |l| l.out_dim);
        let hl = spec.layers.len();
        let hw = params.push("head.w".into(), hl, ParamRole::Weight, true, glorot_uniform(rng, last, spec.output_dim));
        let hb = params.push("head.b".into(), hl, ParamRole::Bias, true, Tensor::zeros(&[spec.output_dim]));
        Ok(Self {
            spec,
            params,
            slots,
            head: (hw, hb),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Registers every parameter on `tape`; trainable ones as tape
    /// parameters, the rest as constants. The returned vars are indexed like
    /// the parameter store.
    pub fn bind(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        self.params
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let v = if e.trainable {
                    tape.param(ParamId(i), e.value.clone())?
                } else {
                    tape.constant(e.value.clone())?
                };
                Ok(v)
            })
            .collect()
    }

    /// Forward pass. `x` is `[batch, in]` for MLPs and `[batch, T, in]` for
    /// the GRU regressor. Returns logits or predictions `[batch, output_dim]`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        if vars.len() != self.params.len() {
            return Err(spec_err(format!(
                "expected {} bound parameters, got {}",
                self.params.len(),
                vars.len()
            )));
        }
        let gains_of = |g: &Option<(usize, usize)>| g.map(|(a, b)| (vars[a], vars[b]));
        let mut h = x;
        for (l, slot) in self.spec.layers.iter().zip(&self.slots) {
            h = match slot {
                LayerSlots::Dense { w, b, gains } => {
                    dense_forward(tape, l, vars[*w], vars[*b], gains_of(gains), h)?
                }
                LayerSlots::Gru { cell, gains } => {
                    let p = GruCellParams::from_slice(&cell.map(|i| vars[i]));
                    layers::gru_unroll(tape, l, &p, gains_of(gains), h)?
                }
            };
        }
        let z = tape.matmul(h, vars[self.head.0])?;
        Ok(tape.add(z, vars[self.head.1])?)
    }

    /// Forward pass on plain tensors, without gradient bookkeeping beyond a
    /// throwaway tape.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let vars = self
            .params
            .entries
            .iter()
            .map(|e| tape.constant(e.value.clone()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let xv = tape.constant(x.clone())?;
        let y = self.forward(&mut tape, &vars, xv)?;
        Ok(tape.value(y).clone())
    }

    /// Current `(a, b)` for every APALU layer.
    pub fn layer_gains(&self) -> Vec<LayerGains> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(layer, slot)| {
                let gains = match slot {
                    LayerSlots::Dense { gains, .. } | LayerSlots::Gru { gains, .. } => gains,
                };
                gains.map(|(a, b)| {
                    let mean = |i: usize| {
                        let t = &self.params.entries[i].value;
                        t.sum() / t.len() as f64
                    };
                    LayerGains {
                        layer,
                        a: mean(a),
                        b: mean(b),
                    }
                })
            })
            .collect()
    }
}

fn push_gains(params: &mut ParamStore, li: usize, l: &LayerSpec) -> Option<(usize, usize)> {
    let p = l.activation_params.filter(|_| l.activation.is_apalu())?;
    let n = if l.per_neuron { l.out_dim } else { 1 };
    let shape = [n];
    let a = params.push(format!("layer{li}.a"), li, ParamRole::GainA, l.trainable_activation, Tensor::full(&shape, p.a()));
    let b = params.push(format!("layer{li}.b_gain"), li, ParamRole::GainB, l.trainable_activation, Tensor::full(&shape, p.b()));
    Some((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(a: f64, b: f64) -> ActivationParams {
        ActivationParams::new(a, b).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::mlp(&[4, 3], 2, ActivationKind::Apalu, &[], OutputHead::SoftmaxClassifier).is_err());
        assert!(ModelSpec::mlp(&[4, 0], 2, ActivationKind::Relu, &[], OutputHead::SoftmaxClassifier).is_err());
        let mut spec = ModelSpec::mlp(&[4, 3, 2], 2, ActivationKind::Relu, &[], OutputHead::SoftmaxClassifier).unwrap();
        spec.layers[1].in_dim = 5;
        assert!(spec.validate().is_err());
        let mut l = LayerSpec::new(1, 1, ActivationKind::Relu);
        l.activation_params = Some(p(1.0, 1.0));
        assert!(l.validate("x").is_err());
    }

    #[test]
    fn weight_init_is_independent_of_activation() {
        let relu = ModelSpec::mlp(&[5, 7, 3], 2, ActivationKind::Relu, &[], OutputHead::SoftmaxClassifier).unwrap();
        let apalu = ModelSpec::mlp(&[5, 7, 3], 2, ActivationKind::Apalu, &[p(1.0, 1.0), p(0.3, 0.2)], OutputHead::SoftmaxClassifier).unwrap();
        let m1 = Model::new(relu, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let m2 = Model::new(apalu, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let weights = |m: &Model| {
            m.params()
                .entries()
                .iter()
                .filter(|e| matches!(e.role, ParamRole::Weight | ParamRole::Bias))
                .map(|e| e.value.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(weights(&m1), weights(&m2));
        assert_eq!(m2.layer_gains(), vec![
            LayerGains { layer: 0, a: 1.0, b: 1.0 },
            LayerGains { layer: 1, a: 0.3, b: 0.2 },
        ]);
    }

    #[test]
    fn glorot_bounds() {
        let t = glorot_uniform(&mut ChaCha8Rng::seed_from_u64(1), 10, 20);
        let lim = (6.0f64 / 30.0).sqrt();
        assert!(t.data().iter().all(|v| v.abs() <= lim));
    }

    #[test]
    fn projection_clamps_only_gains() {
        let spec = ModelSpec::mlp(&[2, 2], 1, ActivationKind::Apalu, &[p(1.0, 1.0)], OutputHead::LinearRegressor).unwrap();
        let mut m = Model::new(spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for id in m.params().ids().collect::<Vec<_>>() {
            for v in m.params_mut().value_mut(id).unwrap().data_mut() {
                *v = -3.0;
            }
        }
        m.params_mut().project_gains();
        for e in m.params().entries() {
            let expect = match e.role {
                ParamRole::GainA | ParamRole::GainB => 1e-6,
                _ => -3.0,
            };
            assert!(e.value.data().iter().all(|&v| v == expect), "{}", e.name);
        }
    }
}
