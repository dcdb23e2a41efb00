//! Numeric kernels behind the tape primitives.
//!
//! Every reduction accumulates in index order so results do not depend on
//! the thread count. Row-parallel kernels only split the output by rows.

use super::{EngineError, Result, Tensor};
use crate::par;

fn matmul_dims(a: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(EngineError::ShapeMismatch {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok((m, k, n))
}

#[inline]
fn matmul_row(a_row: &[f64], b: &[f64], n: usize, out: &mut [f64]) {
    out.fill(0.0);
    for (kk, &av) in a_row.iter().enumerate() {
        if av == 0.0 {
            continue;
        }
        let b_row = &b[kk * n..(kk + 1) * n];
        for (o, &bv) in out.iter_mut().zip(b_row) {
            *o += av * bv;
        }
    }
}

/// `A · B`, rows of the output computed on the rayon pool when available.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k, n) = matmul_dims(a, b)?;
    let mut out = vec![0.0; m * n];
    let (ad, bd) = (a.data(), b.data());
    par::for_each_row_mut(&mut out, n, |i, row| {
        matmul_row(&ad[i * k..(i + 1) * k], bd, n, row)
    });
    Tensor::new(vec![m, n], out)
}

/// Single-threaded `A · B`; bitwise identical to [`matmul`].
pub fn matmul_sequential(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k, n) = matmul_dims(a, b)?;
    let mut out = vec![0.0; m * n];
    let (ad, bd) = (a.data(), b.data());
    for (i, row) in out.chunks_mut(n.max(1)).enumerate().take(m) {
        matmul_row(&ad[i * k..(i + 1) * k], bd, n, row);
    }
    Tensor::new(vec![m, n], out)
}

/// Right-aligned broadcast of two shapes.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// For each flat index of `out_shape`, the flat index of the broadcast input.
pub fn broadcast_index_map(out_shape: &[usize], in_shape: &[usize]) -> Vec<usize> {
    let total: usize = out_shape.iter().product();
    if out_shape == in_shape {
        return (0..total).collect();
    }
    let rank = out_shape.len();
    let offset = rank - in_shape.len();
    // Input strides aligned to output axes; broadcast axes get stride 0.
    let mut strides = vec![0usize; rank];
    let mut acc = 1;
    for i in (0..in_shape.len()).rev() {
        if in_shape[i] != 1 {
            strides[i + offset] = acc;
        }
        acc *= in_shape[i];
    }
    let mut map = Vec::with_capacity(total);
    let mut idx = vec![0usize; rank];
    for _ in 0..total {
        map.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            if idx[ax] < out_shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    map
}

/// Sums `grad` (shaped like the broadcast output) back onto `in_shape`.
pub fn reduce_broadcast(grad: &Tensor, in_shape: &[usize]) -> Tensor {
    if grad.shape() == in_shape {
        return grad.clone();
    }
    let map = broadcast_index_map(grad.shape(), in_shape);
    let mut out = Tensor::zeros(in_shape);
    let data = out.data_mut();
    for (g, &j) in grad.data().iter().zip(&map) {
        data[j] += *g;
    }
    out
}

/// Elementwise binary op with broadcasting.
pub fn zip_broadcast(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        return Tensor::new(a.shape().to_vec(), data);
    }
    let shape = broadcast_shape(a.shape(), b.shape()).ok_or_else(|| EngineError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    })?;
    let ma = broadcast_index_map(&shape, a.shape());
    let mb = broadcast_index_map(&shape, b.shape());
    let (da, db) = (a.data(), b.data());
    let data = ma.iter().zip(&mb).map(|(&i, &j)| f(da[i], db[j])).collect();
    Tensor::new(shape, data)
}

/// `(outer, axis_len, inner)` decomposition of `shape` around `axis`.
pub fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}
