//! Deterministic data-parallel helpers.
//!
//! Every output cell is written by exactly one worker and reductions are
//! either `max` (exact, order independent) or sequential sums, so results
//! are bitwise identical for any worker count.

use rayon::prelude::*;

const MIN_CHUNK: usize = 256;

pub(crate) fn fill<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    out.par_iter_mut()
        .with_min_len(MIN_CHUNK)
        .enumerate()
        .for_each(|(k, o)| *o = f(k));
}

pub(crate) fn fill_chunks<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    out.par_chunks_mut(width)
        .with_min_len(MIN_CHUNK)
        .enumerate()
        .for_each(|(k, o)| f(k, o));
}

/// `max_k f(k)` over `indices`, starting from `init`.
pub(crate) fn max_over<F>(indices: &[usize], init: f64, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    indices
        .par_iter()
        .with_min_len(MIN_CHUNK)
        .map(|&k| f(k))
        .reduce(|| init, f64::max)
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool
/// when `workers == 0`.
pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build a {workers}-thread pool ({e}); using the global pool");
            f()
        }
    }
}
