use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kernels::{self, reduce_broadcast, split_axis, zip_broadcast};
use super::{EngineError, Result, Tensor};
use crate::activations::{
    apalu_grad_raw, apalu_raw, baseline_grad_raw, baseline_raw, sigmoid, ActivationError,
    ActivationKind,
};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

/// Identifier of a trainable leaf. Chosen by the caller; typically the index
/// of the parameter in a model's parameter store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Activation {
        x: Var,
        kind: ActivationKind,
        gains: Option<(Var, Var)>,
    },
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Abs(Var),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Slice {
        x: Var,
        axis: usize,
        start: usize,
    },
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Nodes are pushed in evaluation order, so inputs always precede their
/// consumers. A tape supports exactly one backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(ParamId, Var)>,
    backpropagated: bool,
}

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    params: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    /// Gradient for a registered parameter; zeros when the loss does not
    /// depend on it.
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamId, &Tensor)> {
        self.params.iter()
    }

    pub fn into_map(self) -> BTreeMap<ParamId, Tensor> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

fn finite(op: &'static str, t: Tensor) -> Result<Tensor> {
    if t.all_finite() {
        Ok(t)
    } else {
        Err(EngineError::NonFinite { op })
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn node(&self, v: Var) -> Result<&Node> {
        self.nodes.get(v.0).ok_or(EngineError::BackwardWithoutForward)
    }

    fn push(&mut self, op: &'static str, value: Tensor, kind: Op, inputs: &[Var]) -> Result<Var> {
        let value = finite(op, value)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op: kind,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        let value = finite("constant", value)?;
        self.nodes.push(Node {
            value,
            op: Op::Constant,
            requires_grad: false,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A trainable leaf reported under `id` by [`Tape::backward`].
    pub fn param(&mut self, id: ParamId, value: Tensor) -> Result<Var> {
        if self.params.iter().any(|(p, _)| *p == id) {
            return Err(EngineError::DuplicateParam(id));
        }
        let value = finite("param", value)?;
        self.nodes.push(Node {
            value,
            op: Op::Param,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.push((id, v));
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = kernels::matmul(self.value(a), self.value(b))?;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = zip_broadcast("add", self.value(a), self.value(b), |x, y| x + y)?;
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = zip_broadcast("sub", self.value(a), self.value(b), |x, y| x - y)?;
        self.push("sub", out, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise (Hadamard) product with broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = zip_broadcast("mul", self.value(a), self.value(b), |x, y| x * y)?;
        self.push("mul", out, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = self.value(x).map(|v| v * c);
        self.push("scale", out, Op::Scale(x, c), &[x])
    }

    /// Applies `kind` elementwise. APALU requires `gains = Some((a, b))`, each
    /// holding either one value shared by the whole tensor or one value per
    /// column of the last axis.
    pub fn activation(
        &mut self,
        kind: ActivationKind,
        gains: Option<(Var, Var)>,
        x: Var,
    ) -> Result<Var> {
        let xv = self.value(x);
        let out = match (kind, gains) {
            (ActivationKind::Apalu, Some((a, b))) => {
                let cols = *xv.shape().last().unwrap_or(&1);
                let (av, bv) = (self.value(a).data(), self.value(b).data());
                check_gains(av, bv, cols)?;
                let (av, bv) = (av.to_vec(), bv.to_vec());
                let mut out = xv.clone();
                for (i, v) in out.data_mut().iter_mut().enumerate() {
                    let c = i % cols;
                    *v = apalu_raw(*v, gain(&av, c), gain(&bv, c));
                }
                out
            }
            (ActivationKind::Apalu, None) => {
                return Err(EngineError::Activation(ActivationError::ApaluAsBaseline))
            }
            (kind, _) => xv.map(|v| baseline_raw(kind, v)),
        };
        let gains = if kind.is_apalu() { gains } else { None };
        let mut inputs = vec![x];
        if let Some((a, b)) = gains {
            inputs.extend([a, b]);
        }
        self.push("activation", out, Op::Activation { x, kind, gains }, &inputs)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(x), &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(f64::tanh);
        self.push("tanh", out, Op::Tanh(x), &[x])
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(f64::exp);
        self.push("exp", out, Op::Exp(x), &[x])
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(f64::abs);
        self.push("abs", out, Op::Abs(x), &[x])
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs.first().ok_or_else(|| EngineError::InvalidArgument {
            op: "concat",
            detail: "no inputs".into(),
        })?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(EngineError::InvalidArgument {
                op: "concat",
                detail: format!("axis {axis} for shape {base:?}"),
            });
        }
        let mut total = 0;
        for v in inputs {
            let s = self.value(*v).shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(EngineError::ShapeMismatch {
                    op: "concat",
                    lhs: base.clone(),
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = split_axis(&shape, axis);
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for v in inputs {
                let t = self.value(*v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let out = Tensor::new(shape, data)?;
        let op = Op::Concat {
            inputs: inputs.to_vec(),
            axis,
        };
        self.push("concat", out, op, inputs)
    }

    /// `x[.., start..start + len, ..]` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        if axis >= shape.len() || start + len > shape[axis] || len == 0 {
            return Err(EngineError::InvalidArgument {
                op: "slice",
                detail: format!("axis {axis}, range {start}..{} of {shape:?}", start + len),
            });
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * n * inner + start * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let out = Tensor::new(out_shape, data)?;
        self.push("slice", out, Op::Slice { x, axis, start }, &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).reshape(shape)?;
        self.push("reshape", out, Op::Reshape(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(x).sum());
        self.push("sum", out, Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.is_empty() {
            return Err(EngineError::InvalidArgument {
                op: "mean",
                detail: "empty tensor".into(),
            });
        }
        let out = Tensor::scalar(t.sum() / t.len() as f64);
        self.push("mean", out, Op::Mean(x), &[x])
    }

    /// Mean over the batch of `-log softmax(logits)[label]`, computed with the
    /// log-sum-exp shift.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lt = self.value(logits);
        let (batch, classes) = lt.dims2()?;
        if labels.len() != batch {
            return Err(EngineError::ShapeMismatch {
                op: "softmax_cross_entropy",
                lhs: lt.shape().to_vec(),
                rhs: vec![labels.len()],
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(EngineError::LabelOutOfRange { label, classes });
        }
        let mut probs = vec![0.0; batch * classes];
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = lt.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (p, &l) in probs[r * classes..(r + 1) * classes].iter_mut().zip(row) {
                *p = (l - max).exp();
                z += *p;
            }
            for p in &mut probs[r * classes..(r + 1) * classes] {
                *p /= z;
            }
            total += z.ln() - (row[label] - max);
        }
        let out = Tensor::scalar(total / batch as f64);
        let probs = Tensor::new(vec![batch, classes], probs)?;
        let op = Op::SoftmaxCrossEntropy {
            logits,
            labels: labels.to_vec(),
            probs,
        };
        self.push("softmax_cross_entropy", out, op, &[logits])
    }

    /// Reverse sweep from a single-element `loss` node.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.backpropagated {
            return Err(EngineError::AlreadyBackpropagated);
        }
        let loss_shape = self.node(loss)?.value.shape().to_vec();
        if loss_shape.iter().product::<usize>() != 1 {
            return Err(EngineError::NotScalar { shape: loss_shape });
        }
        self.backpropagated = true;

        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(&loss_shape, 1.0));
        let mut param_grads: BTreeMap<ParamId, Tensor> = BTreeMap::new();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Param) {
                grads[idx] = Some(g);
                continue;
            }
            for (input, contribution) in self.local_grads(node, &g)? {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
        }

        for (id, v) in &self.params {
            let g = grads
                .get_mut(v.0)
                .and_then(Option::take)
                .unwrap_or_else(|| Tensor::zeros(self.nodes[v.0].value.shape()));
            param_grads.insert(*id, g);
        }
        Ok(Gradients {
            params: param_grads,
        })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient contributions of one node to its inputs.
    fn local_grads(&self, node: &Node, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let mut out = Vec::with_capacity(2);
        match &node.op {
            Op::Constant | Op::Param => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    let bt = self.value(*b).transpose2()?;
                    out.push((*a, kernels::matmul(g, &bt)?));
                }
                if self.wants(*b) {
                    let at = self.value(*a).transpose2()?;
                    out.push((*b, kernels::matmul(&at, g)?));
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if self.wants(*a) {
                    out.push((*a, reduce_broadcast(g, self.value(*a).shape())));
                }
                if self.wants(*b) {
                    let gb = reduce_broadcast(g, self.value(*b).shape());
                    out.push((*b, if sign < 0.0 { gb.map(|v| -v) } else { gb }));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let ga = zip_broadcast("mul", g, bv, |x, y| x * y)?;
                    out.push((*a, reduce_broadcast(&ga, av.shape())));
                }
                if self.wants(*b) {
                    let gb = zip_broadcast("mul", g, av, |x, y| x * y)?;
                    out.push((*b, reduce_broadcast(&gb, bv.shape())));
                }
            }
            Op::Scale(x, c) => out.push((*x, g.map(|v| v * c))),
            Op::Activation { x, kind, gains } => {
                let xv = self.value(*x);
                match gains {
                    Some((a, b)) => {
                        let cols = *xv.shape().last().unwrap_or(&1);
                        let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                        let mut gx = Vec::with_capacity(xv.len());
                        let mut ga = vec![0.0; av.len()];
                        let mut gb = vec![0.0; bv.len()];
                        for (i, (&xi, &gi)) in xv.data().iter().zip(g.data()).enumerate() {
                            let c = i % cols;
                            let d = apalu_grad_raw(xi, gain(av, c), gain(bv, c));
                            gx.push(gi * d.d_dx);
                            ga[c % av.len()] += gi * d.d_da;
                            gb[c % bv.len()] += gi * d.d_db;
                        }
                        if self.wants(*x) {
                            out.push((*x, Tensor::new(xv.shape().to_vec(), gx)?));
                        }
                        if self.wants(*a) {
                            out.push((*a, Tensor::new(self.value(*a).shape().to_vec(), ga)?));
                        }
                        if self.wants(*b) {
                            out.push((*b, Tensor::new(self.value(*b).shape().to_vec(), gb)?));
                        }
                    }
                    None => {
                        let data = xv
                            .data()
                            .iter()
                            .zip(g.data())
                            .map(|(&xi, &gi)| gi * baseline_grad_raw(*kind, xi))
                            .collect();
                        out.push((*x, Tensor::new(xv.shape().to_vec(), data)?));
                    }
                }
            }
            Op::Sigmoid(x) => {
                let xv = self.value(*x);
                let data = xv
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&xi, &gi)| gi * sigmoid(xi) * sigmoid(-xi))
                    .collect();
                out.push((*x, Tensor::new(xv.shape().to_vec(), data)?));
            }
            Op::Tanh(x) => {
                let data = node
                    .value
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&y, &gi)| gi * (1.0 - y * y))
                    .collect();
                out.push((*x, Tensor::new(node.value.shape().to_vec(), data)?));
            }
            Op::Exp(x) => {
                let data = node
                    .value
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&y, &gi)| gi * y)
                    .collect();
                out.push((*x, Tensor::new(node.value.shape().to_vec(), data)?));
            }
            Op::Abs(x) => {
                let xv = self.value(*x);
                let data = xv
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&xi, &gi)| if xi > 0.0 { gi } else if xi < 0.0 { -gi } else { 0.0 })
                    .collect();
                out.push((*x, Tensor::new(xv.shape().to_vec(), data)?));
            }
            Op::Concat { inputs, axis } => {
                let (outer, _, inner) = split_axis(node.value.shape(), *axis);
                let mut parts: Vec<Vec<f64>> = inputs
                    .iter()
                    .map(|v| Vec::with_capacity(self.value(*v).len()))
                    .collect();
                let mut offset = 0;
                for _ in 0..outer {
                    for (v, part) in inputs.iter().zip(parts.iter_mut()) {
                        let chunk = self.value(*v).shape()[*axis] * inner;
                        part.extend_from_slice(&g.data()[offset..offset + chunk]);
                        offset += chunk;
                    }
                }
                for (v, part) in inputs.iter().zip(parts) {
                    if self.wants(*v) {
                        out.push((*v, Tensor::new(self.value(*v).shape().to_vec(), part)?));
                    }
                }
            }
            Op::Slice { x, axis, start } => {
                let shape = self.value(*x).shape().to_vec();
                let (outer, n, inner) = split_axis(&shape, *axis);
                let len = node.value.shape()[*axis];
                let mut full = Tensor::zeros(&shape);
                let dst = full.data_mut();
                for o in 0..outer {
                    let base = o * n * inner + start * inner;
                    let src = &g.data()[o * len * inner..(o + 1) * len * inner];
                    dst[base..base + len * inner].copy_from_slice(src);
                }
                out.push((*x, full));
            }
            Op::Reshape(x) => out.push((*x, g.reshape(self.value(*x).shape())?)),
            Op::Sum(x) => {
                out.push((*x, Tensor::full(self.value(*x).shape(), g.item()?)));
            }
            Op::Mean(x) => {
                let xv = self.value(*x);
                out.push((*x, Tensor::full(xv.shape(), g.item()? / xv.len() as f64)));
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let (batch, classes) = probs.dims2()?;
                let scale = g.item()? / batch as f64;
                let mut d = probs.clone();
                let data = d.data_mut();
                for (r, &label) in labels.iter().enumerate() {
                    data[r * classes + label] -= 1.0;
                }
                for v in data.iter_mut() {
                    *v *= scale;
                }
                out.push((*logits, d));
            }
        }
        Ok(out)
    }
}

#[inline]
fn gain(values: &[f64], col: usize) -> f64 {
    if values.len() == 1 {
        values[0]
    } else {
        values[col]
    }
}

fn check_gains(a: &[f64], b: &[f64], cols: usize) -> Result<()> {
    for g in [a, b] {
        if g.len() != 1 && g.len() != cols {
            return Err(EngineError::ShapeMismatch {
                op: "activation",
                lhs: vec![cols],
                rhs: vec![g.len()],
            });
        }
    }
    let bad = |v: &f64| !(v.is_finite() && *v > 0.0);
    if let Some((&ai, &bi)) = a
        .iter()
        .cycle()
        .zip(b.iter().cycle())
        .take(a.len().max(b.len()))
        .find(|(x, y)| bad(x) || bad(y))
    {
        return Err(EngineError::Activation(ActivationError::InvalidParams { a: ai, b: bi }));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let a = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let i = tape.constant(Tensor::identity(2)).unwrap();
        let y = tape.matmul(a, i).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn apalu_activation_values() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.0, 1.0, -1.0])).unwrap();
        let a = tape.constant(Tensor::scalar(0.55)).unwrap();
        let b = tape.constant(Tensor::scalar(0.065)).unwrap();
        let y = tape.activation(ActivationKind::Apalu, Some((a, b)), x).unwrap();
        let v = tape.value(y).data();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 1.015_187_671_263_051_7).abs() < 1e-15);
        assert!((v[2] + 0.041_087_836_323_856_25).abs() < 1e-15);
    }

    #[test]
    fn sum_and_mean() {
        let mut tape = Tape::new();
        let x = tape.param(ParamId(0), Tensor::vector(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let s = tape.sum(x).unwrap();
        assert_eq!(tape.value(s).item().unwrap(), 10.0);
        let m = tape.mean(x).unwrap();
        let g = tape.backward(m).unwrap();
        assert_eq!(g.get(ParamId(0)).unwrap().data(), &[0.25; 4]);
    }

    #[test]
    fn grad_of_a_through_apalu_sum() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0])).unwrap();
        let a = tape.param(ParamId(0), Tensor::scalar(1.0)).unwrap();
        let b = tape.param(ParamId(1), Tensor::scalar(1.0)).unwrap();
        let y = tape.activation(ActivationKind::Apalu, Some((a, b)), x).unwrap();
        let loss = tape.sum(y).unwrap();
        let g = tape.backward(loss).unwrap();
        assert!((g.get(ParamId(0)).unwrap().item().unwrap() - 1.845_795_765_932_821_3).abs() < 1e-15);
        assert_eq!(g.get(ParamId(1)).unwrap().item().unwrap(), 0.0);
    }

    #[test]
    fn unused_param_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(ParamId(0), Tensor::vector(vec![1.0, 2.0])).unwrap();
        tape.param(ParamId(7), Tensor::zeros(&[2, 3])).unwrap();
        let loss = tape.sum(x).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(ParamId(7)).unwrap(), &Tensor::zeros(&[2, 3]));
    }

    #[test]
    fn fan_out_accumulates() {
        let mut tape = Tape::new();
        let x = tape.param(ParamId(0), Tensor::scalar(3.0)).unwrap();
        let y = tape.add(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(ParamId(0)).unwrap().item().unwrap(), 2.0);
    }

    #[test]
    fn backward_errors() {
        let mut tape = Tape::new();
        assert_eq!(
            tape.backward(Var(0)).unwrap_err(),
            EngineError::BackwardWithoutForward
        );
        let x = tape.param(ParamId(0), Tensor::vector(vec![1.0, 2.0])).unwrap();
        assert!(matches!(tape.backward(x), Err(EngineError::NotScalar { .. })));
        let s = tape.sum(x).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.backward(s).unwrap_err(), EngineError::AlreadyBackpropagated);
    }

    #[test]
    fn shape_and_nan_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        let b = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        assert!(matches!(tape.matmul(a, b), Err(EngineError::ShapeMismatch { .. })));
        let big = tape.constant(Tensor::scalar(1000.0)).unwrap();
        assert_eq!(tape.exp(big).unwrap_err(), EngineError::NonFinite { op: "exp" });
        assert!(tape.constant(Tensor::scalar(f64::NAN)).is_err());
        assert_eq!(
            tape.param(ParamId(1), Tensor::scalar(1.0)).and_then(|_| tape.param(ParamId(1), Tensor::scalar(1.0))),
            Err(EngineError::DuplicateParam(ParamId(1)))
        );
    }

    #[test]
    fn negative_gain_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![-1.0])).unwrap();
        let a = tape.constant(Tensor::scalar(1.0)).unwrap();
        let b = tape.constant(Tensor::scalar(-1.0)).unwrap();
        assert!(matches!(
            tape.activation(ActivationKind::Apalu, Some((a, b)), x),
            Err(EngineError::Activation(ActivationError::InvalidParams { .. }))
        ));
    }

    #[test]
    fn concat_slice_roundtrip_gradients() {
        let mut tape = Tape::new();
        let x = tape.param(ParamId(0), t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        let left = tape.slice(x, 1, 0, 1).unwrap();
        let right = tape.slice(x, 1, 1, 2).unwrap();
        assert_eq!(tape.value(right).data(), &[2.0, 3.0, 5.0, 6.0]);
        let joined = tape.concat(&[right, left], 1).unwrap();
        assert_eq!(tape.value(joined).data(), &[2.0, 3.0, 1.0, 5.0, 6.0, 4.0]);
        let w = tape.constant(t(&[2, 3], &[1.0, 10.0, 100.0, 1000.0, 1e4, 1e5])).unwrap();
        let prod = tape.mul(joined, w).unwrap();
        let loss = tape.sum(prod).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(ParamId(0)).unwrap().data(), &[100.0, 1.0, 10.0, 1e5, 1000.0, 1e4]);
    }

    #[test]
    fn softmax_cross_entropy_uniform() {
        let mut tape = Tape::new();
        let logits = tape.param(ParamId(0), Tensor::zeros(&[3, 10])).unwrap();
        let loss = tape.softmax_cross_entropy(logits, &[0, 4, 9]).unwrap();
        assert!((tape.value(loss).item().unwrap() - 10f64.ln()).abs() < 1e-15);
        assert!(matches!(
            tape.softmax_cross_entropy(logits, &[0, 10, 9]),
            Err(EngineError::LabelOutOfRange { label: 10, classes: 10 })
        ));
        let g = tape.backward(loss).unwrap();
        let g0 = g.get(ParamId(0)).unwrap();
        assert!((g0.get2(0, 0) - (0.1 - 1.0) / 3.0).abs() < 1e-15);
        assert!((g0.get2(0, 1) - 0.1 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn broadcast_bias_gradient_sums_rows() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[4, 2])).unwrap();
        let bias = tape.param(ParamId(0), Tensor::vector(vec![1.0, -1.0])).unwrap();
        let y = tape.add(x, bias).unwrap();
        let loss = tape.sum(y).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(ParamId(0)).unwrap().data(), &[4.0, 4.0]);
    }
}
