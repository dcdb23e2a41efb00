//! Thin dispatch layer over rayon.
//!
//! With the `parallel` feature the helpers fan work out over the rayon pool;
//! without it they run the same closures in index order. Every helper keeps
//! results independent of scheduling: row-wise kernels write disjoint output
//! rows, ordered collects keep index order, and `map_reduce` is only used
//! with exact, order-insensitive reductions (min, max, counts, logical and).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many rows the kernels stay on the calling thread.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_ROWS: usize = 64;

/// Applies `f(row_index, row)` to every `row_len`-sized chunk of `out`.
pub fn for_each_row_mut<F>(out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if row_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        if out.len() / row_len >= MIN_PARALLEL_ROWS {
            out.par_chunks_mut(row_len)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
            return;
        }
    }
    out.chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// `(0..n).map(f).collect()`, preserving index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps each index and folds the results. `combine` must be exact and
/// insensitive to grouping; no floating-point sums go through here.
pub fn map_reduce<T, M, F, C>(n: usize, map: M, identity: T, fold: F, combine: C) -> T
where
    T: Copy + Send + Sync,
    M: Fn(usize) -> f64 + Sync + Send,
    F: Fn(T, f64) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .fold(|| identity, |acc, i| fold(acc, map(i)))
            .reduce(|| identity, combine)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = &combine;
        (0..n).fold(identity, |acc, i| fold(acc, map(i)))
    }
}

/// True when the crate was built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
