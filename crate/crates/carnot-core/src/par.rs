//! Deterministic data-parallel kernels.
//!
//! All reductions run over fixed-size chunks whose partial sums are
//! combined in index order, so results are bit-identical for any thread
//! count and identical to the sequential fallback. The `parallel`
//! feature selects rayon; without it everything degrades to plain
//! loops. [`set_sequential`] forces the sequential path at runtime,
//! which the benchmark suite uses to compare both on one build.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Chunk length for deterministic reductions and parallel maps.
pub const CHUNK: usize = 4096;

/// Force the sequential code path even when the `parallel` feature is on.
pub fn set_sequential(yes: bool) {
    FORCE_SEQUENTIAL.store(yes, Ordering::Relaxed);
}

#[inline]
pub fn sequential_forced() -> bool {
    FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

#[cfg(feature = "parallel")]
#[inline]
fn run_parallel() -> bool {
    !sequential_forced()
}

/// Fill a vector of length `n` with `f(i)` for each index.
pub fn map_indexed<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    let mut out = vec![0.0; n];
    for_each_chunk(&mut out, 0, &|i, slot| *slot = f(i));
    out
}

/// Apply `f(i, &mut out[i - base])` over chunks of `out`, in parallel
/// when enabled. `base` is the global index of `out[0]`.
pub fn for_each_chunk<F>(out: &mut [f64], base: usize, f: &F)
where
    F: Fn(usize, &mut f64) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if run_parallel() {
            use rayon::prelude::*;
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                let start = base + c * CHUNK;
                for (k, slot) in chunk.iter_mut().enumerate() {
                    f(start + k, slot);
                }
            });
            return;
        }
    }
    for (k, slot) in out.iter_mut().enumerate() {
        f(base + k, slot);
    }
}

/// Deterministic chunked sum of `f(i)` over `0..n`.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let nchunks = n.div_ceil(CHUNK);
    let partial = |c: usize| -> f64 {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    };
    #[cfg(feature = "parallel")]
    {
        if run_parallel() {
            use rayon::prelude::*;
            let parts: Vec<f64> = (0..nchunks).into_par_iter().map(partial).collect();
            return parts.iter().sum();
        }
    }
    (0..nchunks).map(partial).sum()
}

/// Deterministic dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_indexed(a.len(), |i| a[i] * b[i])
}

/// Euclidean norm (no measure weight).
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for_each_chunk(y, 0, &|i, slot| *slot += alpha * x[i]);
}

/// y = x + beta * y  (classic CG update)
pub fn xpby(x: &[f64], beta: f64, y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for_each_chunk(y, 0, &|i, slot| *slot = x[i] + beta * *slot);
}

pub fn scale(alpha: f64, y: &mut [f64]) {
    for_each_chunk(y, 0, &|_, slot| *slot *= alpha);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_sequential_bitwise() {
        let n = 3 * CHUNK + 17;
        let a: Vec<f64> = (0..n).map(|i| ((i * 2654435761) % 1000) as f64 / 997.0).collect();
        let b: Vec<f64> = (0..n).map(|i| ((i * 40503) % 613) as f64 / 611.0 - 0.5).collect();
        let d1 = dot(&a, &b);
        set_sequential(true);
        let d2 = dot(&a, &b);
        set_sequential(false);
        assert_eq!(d1.to_bits(), d2.to_bits());
    }

    #[test]
    fn map_indexed_fills_all() {
        let v = map_indexed(CHUNK + 3, |i| i as f64);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[CHUNK + 2], (CHUNK + 2) as f64);
    }
}
