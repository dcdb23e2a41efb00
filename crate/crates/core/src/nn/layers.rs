use super::{spec_err, LayerSpec, Result};
use crate::activations::ActivationKind;
use crate::engine::{Tape, Tensor, Var};

/// `activation(X · W + bias)` for `X: [batch, in]`.
pub fn dense_forward(
    tape: &mut Tape,
    spec: &LayerSpec,
    w: Var,
    bias: Var,
    gains: Option<(Var, Var)>,
    x: Var,
) -> Result<Var> {
    let (_, in_dim) = tape.value(x).dims2()?;
    if in_dim != spec.in_dim || tape.value(w).shape() != [spec.in_dim, spec.out_dim] {
        return Err(spec_err(format!(
            "dense layer {}->{}: input {:?}, weight {:?}",
            spec.in_dim,
            spec.out_dim,
            tape.value(x).shape(),
            tape.value(w).shape()
        )));
    }
    let z = tape.matmul(x, w)?;
    let z = tape.add(z, bias)?;
    Ok(tape.activation(spec.activation, gains, z)?)
}

/// Weights of one GRU cell as recorded on a tape. Input-to-hidden matrices
/// are `[in, hidden]`, hidden-to-hidden `[hidden, hidden]`, biases `[hidden]`.
#[derive(Debug, Clone, Copy)]
pub struct GruCellParams {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
}

impl GruCellParams {
    /// From `[w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h]`.
    pub fn from_slice(v: &[Var; 9]) -> Self {
        Self {
            w_z: v[0],
            u_z: v[1],
            b_z: v[2],
            w_r: v[3],
            u_r: v[4],
            b_r: v[5],
            w_h: v[6],
            u_h: v[7],
            b_h: v[8],
        }
    }

    /// Registers the given tensors as constants; handy for fixed-weight cells.
    pub fn constants(tape: &mut Tape, tensors: [Tensor; 9]) -> Result<Self> {
        let mut vars = Vec::with_capacity(9);
        for t in tensors {
            vars.push(tape.constant(t)?);
        }
        let arr: [Var; 9] = vars.try_into().expect("nine vars");
        Ok(Self::from_slice(&arr))
    }
}

fn gate(tape: &mut Tape, x: Var, w: Var, h: Var, u: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    let hu = tape.matmul(h, u)?;
    let s = tape.add(xw, hu)?;
    Ok(tape.add(s, b)?)
}

/// One GRU step:
///
/// ```text
/// z  = sigmoid(x W_z + h U_z + b_z)
/// r  = sigmoid(x W_r + h U_r + b_r)
/// h~ = act(x W_h + (r * h) U_h + b_h)
/// h' = (1 - z) * h~ + z * h
/// ```
///
/// `act` is tanh for the classical cell; APALU (with `gains`) is the opt-in
/// variant.
pub fn gru_cell_step(
    tape: &mut Tape,
    p: &GruCellParams,
    candidate: ActivationKind,
    gains: Option<(Var, Var)>,
    x_t: Var,
    h_prev: Var,
) -> Result<Var> {
    let (bx, _) = tape.value(x_t).dims2()?;
    let (bh, hidden) = tape.value(h_prev).dims2()?;
    if bx != bh || tape.value(p.u_z).shape() != [hidden, hidden] {
        return Err(spec_err(format!(
            "GRU step: x {:?}, h {:?}, U {:?}",
            tape.value(x_t).shape(),
            tape.value(h_prev).shape(),
            tape.value(p.u_z).shape()
        )));
    }
    let z_pre = gate(tape, x_t, p.w_z, h_prev, p.u_z, p.b_z)?;
    let z = tape.sigmoid(z_pre)?;
    let r_pre = gate(tape, x_t, p.w_r, h_prev, p.u_r, p.b_r)?;
    let r = tape.sigmoid(r_pre)?;
    let rh = tape.mul(r, h_prev)?;
    let c_pre = gate(tape, x_t, p.w_h, rh, p.u_h, p.b_h)?;
    let cand = match candidate {
        ActivationKind::Tanh => tape.tanh(c_pre)?,
        kind => tape.activation(kind, gains, c_pre)?,
    };
    // h~ + z * (h - h~)
    let diff = tape.sub(h_prev, cand)?;
    let zd = tape.mul(z, diff)?;
    Ok(tape.add(cand, zd)?)
}

/// Runs the cell over `x: [batch, T, in]` from a zero state and returns the
/// final hidden state `[batch, hidden]`.
pub(super) fn gru_unroll(
    tape: &mut Tape,
    spec: &LayerSpec,
    p: &GruCellParams,
    gains: Option<(Var, Var)>,
    x: Var,
) -> Result<Var> {
    let shape = tape.value(x).shape().to_vec();
    let [batch, steps, in_dim] = shape[..] else {
        return Err(spec_err(format!("GRU input must be [batch, T, in], got {shape:?}")));
    };
    if in_dim != spec.in_dim || steps == 0 {
        return Err(spec_err(format!(
            "GRU expects {} input features and T >= 1, got {shape:?}",
            spec.in_dim
        )));
    }
    let mut h = tape.constant(Tensor::zeros(&[batch, spec.out_dim]))?;
    for t in 0..steps {
        let xt = tape.slice(x, 1, t, 1)?;
        let xt = tape.reshape(xt, &[batch, in_dim])?;
        h = gru_cell_step(tape, p, spec.activation, gains, xt, h)?;
    }
    Ok(h)
}
