//! Deterministic fan-out over trial indices.
//!
//! Each task derives its randomness from its own index, and results are
//! gathered in index order, so the output never depends on the number of
//! workers or on scheduling.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{argument, Result};

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| argument(format!("cannot start worker pool: {e}")))
}

/// `f(i)` for every `i` in `range`, in index order.
pub fn map_indexed<T, F>(range: Range<u64>, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if workers <= 1 {
        return Ok(range.map(f).collect());
    }
    Ok(pool(workers)?.install(|| range.into_par_iter().map(f).collect()))
}

/// Like [`map_indexed`] for fallible tasks; the error reported is the one
/// with the smallest index.
pub fn try_map_indexed<T, F>(range: Range<u64>, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    map_indexed(range, workers, f)?.into_iter().collect()
}

/// Streams results to `sink` in index order while keeping at most `chunk`
/// results in memory. Stops early once `sink` returns `false`.
pub fn for_each_indexed<T, F, S>(
    range: Range<u64>,
    workers: usize,
    chunk: u64,
    f: F,
    mut sink: S,
) -> Result<()>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
    S: FnMut(u64, T) -> Result<bool>,
{
    let chunk = chunk.max(1);
    let pool = if workers > 1 { Some(pool(workers)?) } else { None };
    let mut start = range.start;
    while start < range.end {
        let end = range.end.min(start.saturating_add(chunk));
        let batch: Vec<Result<T>> = match &pool {
            Some(pool) => pool.install(|| (start..end).into_par_iter().map(&f).collect()),
            None => (start..end).map(&f).collect(),
        };
        for (i, item) in (start..end).zip(batch) {
            if !sink(i, item?)? {
                return Ok(());
            }
        }
        start = end;
    }
    Ok(())
}
