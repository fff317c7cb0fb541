//! Deterministic data-parallel helpers.
//!
//! All reductions here are bit-reproducible regardless of thread count: work
//! is split into fixed-size chunks, per-chunk partials are collected in index
//! order and folded sequentially. With the `parallel` feature disabled every
//! helper degrades to a plain sequential loop with identical results.

/// Chunk length used for deterministic parallel reductions. Fixed (not a
/// function of thread count) so that results do not depend on the pool size.
pub const CHUNK: usize = 4096;

#[cfg(feature = "parallel")]
pub use rayon::prelude::*;

/// Caps the global thread pool from `LAGREUL_THREADS` (integer >= 1).
/// Call once at process start; later calls are no-ops.
#[cfg(feature = "parallel")]
pub fn init_threads_from_env() {
    if let Ok(v) = std::env::var("LAGREUL_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn init_threads_from_env() {}

/// Runs `f` on each item of `items` in parallel (by mutable reference).
#[cfg(feature = "parallel")]
pub fn for_each_mut<T: Send, F: Fn(usize, &mut T) + Send + Sync>(items: &mut [T], f: F) {
    items
        .par_iter_mut()
        .enumerate()
        .for_each(|(i, item)| f(i, item));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<T, F: Fn(usize, &mut T)>(items: &mut [T], f: F) {
    for (i, item) in items.iter_mut().enumerate() {
        f(i, item);
    }
}

/// Applies `f` to disjoint mutable chunks of length `chunk` in parallel.
#[cfg(feature = "parallel")]
pub fn for_each_chunk_mut<T: Send, F: Fn(usize, &mut [T]) + Send + Sync>(
    data: &mut [T],
    chunk: usize,
    f: F,
) {
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk_mut<T, F: Fn(usize, &mut [T])>(data: &mut [T], chunk: usize, f: F) {
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Maps `0..n` through `f` collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send, F: Fn(usize) -> T + Send + Sync>(n: usize, f: F) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Deterministic sum of `f(i)` over `0..n`: fixed chunks, sequential fold of
/// the per-chunk partials in index order.
pub fn sum_indexed<F: Fn(usize) -> f64 + Send + Sync>(n: usize, f: F) -> f64 {
    let nchunks = n.div_ceil(CHUNK);
    let partials = map_indexed(nchunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    });
    partials.iter().sum()
}

/// Deterministic max of `f(i)` over `0..n`. f64 max is associative and
/// commutative for non-NaN inputs, so chunking is only for parallelism.
pub fn max_indexed<F: Fn(usize) -> f64 + Send + Sync>(n: usize, f: F) -> f64 {
    let nchunks = n.div_ceil(CHUNK);
    let partials = map_indexed(nchunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut m = f64::NEG_INFINITY;
        for i in lo..hi {
            m = m.max(f(i));
        }
        m
    });
    partials.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_sequential() {
        let n = 100_000;
        let par = sum_indexed(n, |i| (i as f64).sin());
        let mut seq = 0.0;
        let mut partial = 0.0;
        for i in 0..n {
            partial += (i as f64).sin();
            if (i + 1) % CHUNK == 0 {
                seq += partial;
                partial = 0.0;
            }
        }
        seq += partial;
        assert_eq!(par, seq);
    }

    #[test]
    fn max_matches_sequential() {
        let n = 50_000;
        let par = max_indexed(n, |i| ((i * 2654435761) % 1000) as f64);
        let seq = (0..n)
            .map(|i| ((i * 2654435761) % 1000) as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(par, seq);
    }
}
