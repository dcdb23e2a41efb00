use super::{NnError, Result};
use crate::engine::{EngineError, Tape, Tensor, Var};

/// Mean cross-entropy of softmax(`logits`) against class indices.
pub fn softmax_cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    Ok(tape.softmax_cross_entropy(logits, labels)?)
}

fn same_shape(tape: &Tape, op: &'static str, pred: Var, target: Var) -> Result<()> {
    let (p, t) = (tape.value(pred).shape(), tape.value(target).shape());
    if p != t {
        return Err(NnError::Engine(EngineError::ShapeMismatch {
            op,
            lhs: p.to_vec(),
            rhs: t.to_vec(),
        }));
    }
    Ok(())
}

/// Mean squared residual.
pub fn mse_loss(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    same_shape(tape, "mse_loss", pred, target)?;
    let d = tape.sub(pred, target)?;
    let sq = tape.mul(d, d)?;
    Ok(tape.mean(sq)?)
}

/// Mean absolute residual.
pub fn mae_loss(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    same_shape(tape, "mae_loss", pred, target)?;
    let d = tape.sub(pred, target)?;
    let a = tape.abs(d)?;
    Ok(tape.mean(a)?)
}

/// Row-wise softmax of a `[batch, K]` tensor.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let (rows, cols) = logits.dims2()?;
    let mut out = logits.clone();
    for r in 0..rows {
        let row = &mut out.data_mut()[r * cols..(r + 1) * cols];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    Ok(out)
}
