//! Deterministic data-parallel helpers: work is split into fixed-size chunks
//! and partial results are merged in chunk order, so results do not depend
//! on the number of worker threads.

use rayon::prelude::*;
use std::ops::Range;

pub(crate) const CHUNK: usize = 4096;

/// Maps each fixed-size chunk of `0..len` in parallel, returning results in
/// chunk order.
pub(crate) fn par_chunks<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    let n = len.div_ceil(CHUNK);
    (0..n).into_par_iter().map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(len))).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= CHUNK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    par_chunks(a.len(), |r| a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum::<f64>()).into_iter().sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
