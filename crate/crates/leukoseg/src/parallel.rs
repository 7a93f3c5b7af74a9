//! Row-granular iteration helpers with a sequential fallback.
//!
//! Every helper produces results in row order, so outputs are bit-identical
//! whether the `parallel` feature is on or off and regardless of the rayon
//! thread count. Reductions that feed floating-point accumulators must go
//! through [`map_rows`] and fold the per-row partials in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to each row of `data` (rows of `row_len` elements).
#[cfg(feature = "parallel")]
pub(crate) fn for_each_row_mut<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    data.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_row_mut<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    for (y, row) in data.chunks_mut(row_len).enumerate() {
        f(y, row);
    }
}

/// Map row indices `0..rows` to per-row values, collected in row order.
#[cfg(feature = "parallel")]
pub(crate) fn map_rows<T, F>(rows: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..rows).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_rows<T, F>(rows: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..rows).map(f).collect()
}

/// Map items of a slice to new values, preserving order.
#[cfg(feature = "parallel")]
pub(crate) fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    items.iter().map(f).collect()
}
