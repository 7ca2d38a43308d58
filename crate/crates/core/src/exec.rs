//! Row-parallel execution with a sequential fallback.
//!
//! Every data-parallel kernel in this crate writes disjoint rows of a flat
//! buffer, so parallel and sequential execution produce bitwise-identical
//! results. Reductions never use parallel folds; they reduce per-row values
//! sequentially in row order to keep float summation order fixed regardless
//! of thread count.

/// Applies `f` to each `row_len` chunk of `data`. With the `parallel`
/// feature enabled and `parallel == true` the chunks run on the rayon pool.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_row<F>(data: &mut [f64], row_len: usize, parallel: bool, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert_eq!(data.len() % row_len.max(1), 0);
    if parallel {
        use rayon::prelude::*;
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    } else {
        for (i, row) in data.chunks_mut(row_len).enumerate() {
            f(i, row);
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_row<F>(data: &mut [f64], row_len: usize, _parallel: bool, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert_eq!(data.len() % row_len.max(1), 0);
    for (i, row) in data.chunks_mut(row_len).enumerate() {
        f(i, row);
    }
}
