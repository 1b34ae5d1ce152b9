//! Seeded Monte-Carlo samples and order-independent parallel reductions.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`), a counter-based
//! stream cipher whose output is fully specified and platform independent.
//! Draws are taken sequentially per sample in the order `ξ, ζ, χ, u`, with the
//! Gaussians from `rand_distr::StandardNormal` (ziggurat) and `u` uniform on
//! `[0, 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::stats::pairwise_sum;

/// Fixed chunk length for reductions; the summation tree depends on it and on
/// the sample count only, never on the number of workers.
pub const CHUNK: usize = 8192;

/// Gaussian triples plus one uniform per sample, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct McSampleSet {
    pub xi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub chi: Vec<f64>,
    pub uniform: Vec<f64>,
    pub seed: u64,
}

impl McSampleSet {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Rademacher label drawn from the uniform stream, `+1` when `u < 1/2`.
    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        if self.uniform[i] < 0.5 {
            1.0
        } else {
            -1.0
        }
    }
}

pub fn sample_mc(count: usize, seed: u64) -> McSampleSet {
    assert!(count >= 1, "sample count must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xi = Vec::with_capacity(count);
    let mut zeta = Vec::with_capacity(count);
    let mut chi = Vec::with_capacity(count);
    let mut uniform = Vec::with_capacity(count);
    for _ in 0..count {
        xi.push(rng.sample(StandardNormal));
        zeta.push(rng.sample(StandardNormal));
        chi.push(rng.sample(StandardNormal));
        uniform.push(rng.random::<f64>());
    }
    McSampleSet {
        xi,
        zeta,
        chi,
        uniform,
        seed,
    }
}

/// Sums `K` per-sample quantities over `0..n`.
///
/// `f` accumulates one chunk (a half-open index range) into its own array.
/// Chunks are summed in index order with a pairwise tree, so the result is
/// bitwise identical for any pool size, including no pool at all.
pub fn chunked_sums<const K: usize, F>(n: usize, pool: Option<&ThreadPool>, f: F) -> [f64; K]
where
    F: Fn(std::ops::Range<usize>, &mut [f64; K]) + Sync,
{
    let nchunks = n.div_ceil(CHUNK);
    let run = |c: usize| {
        let mut acc = [0.0; K];
        f(c * CHUNK..((c + 1) * CHUNK).min(n), &mut acc);
        acc
    };
    let parts: Vec<[f64; K]> = match pool {
        Some(p) if p.current_num_threads() > 1 => {
            p.install(|| (0..nchunks).into_par_iter().map(run).collect())
        }
        _ => (0..nchunks).map(run).collect(),
    };
    let mut out = [0.0; K];
    let mut col = vec![0.0; parts.len()];
    for (k, o) in out.iter_mut().enumerate() {
        for (c, p) in col.iter_mut().zip(&parts) {
            *c = p[k];
        }
        *o = pairwise_sum(&col);
    }
    out
}

/// A pool with `workers` threads, or `None` for single-threaded execution.
pub fn make_pool(workers: usize) -> Option<ThreadPool> {
    if workers <= 1 {
        return None;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = sample_mc(10_000, 42);
        let b = sample_mc(10_000, 42);
        assert_eq!(a, b);
        let c = sample_mc(10_000, 43);
        assert_ne!(a.xi, c.xi);
    }

    #[test]
    fn reduction_ignores_worker_count() {
        let mc = sample_mc(50_000, 7);
        let f = |r: std::ops::Range<usize>, acc: &mut [f64; 2]| {
            for i in r {
                acc[0] += mc.xi[i] * mc.chi[i];
                acc[1] += mc.zeta[i].exp();
            }
        };
        let s1 = chunked_sums(mc.len(), None, f);
        for w in [2, 3, 4] {
            let pool = make_pool(w);
            assert_eq!(chunked_sums(mc.len(), pool.as_ref(), f), s1);
        }
    }
}
