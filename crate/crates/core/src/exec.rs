//! Data-parallel execution helpers.
//!
//! Training batches, cross-validation folds, and bulk prediction are all
//! embarrassingly parallel over read-only shared state. Each helper here has
//! a rayon-backed path and a sequential path that produce bit-identical
//! results: work is split into fixed chunks independent of thread count, and
//! chunk results are combined in index order.
//!
//! With the `parallel` feature disabled the crate falls back to the
//! sequential path everywhere; `Mode::Parallel` then degrades to sequential
//! so callers never need to care.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of items folded into one accumulator chunk. Fixed so that the
/// floating-point reduction order never depends on thread count.
pub const CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

impl Mode {
    /// The default mode for this build: parallel when the feature is on.
    pub fn auto() -> Mode {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_indices<R, F>(mode: Mode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match mode {
        Mode::Sequential => (0..n).map(f).collect(),
        Mode::Parallel => par_map_indices(n, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Chunked map-reduce: `items` is cut into [`CHUNK`]-sized runs, each run is
/// folded sequentially in index order with `fold`, runs may execute
/// concurrently, and run results are merged front to back with `merge`.
/// The reduction tree is a function of `items.len()` alone, so sequential
/// and parallel modes agree bit for bit.
pub fn chunked_fold<T, A, FInit, FFold, FMerge>(
    mode: Mode,
    items: &[T],
    init: FInit,
    fold: FFold,
    merge: FMerge,
) -> A
where
    T: Sync,
    A: Send,
    FInit: Fn() -> A + Sync + Send,
    FFold: Fn(&mut A, &T) + Sync + Send,
    FMerge: Fn(&mut A, A),
{
    let fold_chunk = |chunk: &[T]| {
        let mut acc = init();
        for item in chunk {
            fold(&mut acc, item);
        }
        acc
    };

    let chunk_accs: Vec<A> = match mode {
        Mode::Sequential => items.chunks(CHUNK).map(fold_chunk).collect(),
        Mode::Parallel => par_fold_chunks(items, &fold_chunk),
    };

    let mut total = init();
    for acc in chunk_accs {
        merge(&mut total, acc);
    }
    total
}

#[cfg(feature = "parallel")]
fn par_fold_chunks<T, A, F>(items: &[T], fold_chunk: &F) -> Vec<A>
where
    T: Sync,
    A: Send,
    F: Fn(&[T]) -> A + Sync,
{
    items.par_chunks(CHUNK).map(fold_chunk).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_fold_chunks<T, A, F>(items: &[T], fold_chunk: &F) -> Vec<A>
where
    T: Sync,
    A: Send,
    F: Fn(&[T]) -> A + Sync,
{
    items.chunks(CHUNK).map(fold_chunk).collect()
}
