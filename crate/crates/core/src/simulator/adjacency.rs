//! Centered, rescaled adjacency operators `Ã`.
//!
//! Bernoulli graphs are stored as one bit per directed pair. The Gaussian
//! equivalent `(λ/√n) y yᵀ + Ξ` stores `Ξ` in single precision. Row `i` of
//! either matrix is drawn from its own ChaCha8 stream, so generation can run
//! in parallel without changing the result.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdjacencyMode {
    Bernoulli,
    GaussianEquivalent,
}

impl std::str::FromStr for AdjacencyMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(Self::Bernoulli),
            "gaussian" | "gaussian-equivalent" | "gaussian_equivalent" => Ok(Self::GaussianEquivalent),
            other => Err(format!(
                "unknown adjacency mode `{other}` (expected bernoulli or gaussian)"
            )),
        }
    }
}

/// Square 0/1 matrix, row-major, 64 entries per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(n: usize) -> Self {
        let words = n.div_ceil(64);
        Self {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    pub fn from_words(n: usize, bits: Vec<u64>) -> Result<Self> {
        let words = n.div_ceil(64);
        if bits.len() != n * words {
            return Err(Error::Dimension(format!(
                "bit matrix of size {n} needs {} words, got {}",
                n * words,
                bits.len()
            )));
        }
        Ok(Self { n, words, bits })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    fn row_words(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    /// Column indices of the ones in row `i`, increasing.
    pub fn row_ones(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_words(i).iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + t)
            })
        })
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| u64::from(w.count_ones())).sum()
    }
}

/// The operator `Ã` of one graph instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Adjacency {
    Bernoulli { bits: BitMatrix, d: f64 },
    GaussianEquivalent {
        lambda: f64,
        labels: Array1<f64>,
        noise: Array2<f32>,
    },
}

/// Edge probabilities `(p_same, p_diff)` for same- and different-label pairs.
pub fn edge_probabilities(d: f64, lambda: f64, n: usize) -> Result<(f64, f64)> {
    let q = d / n as f64;
    let delta = lambda / (n as f64).sqrt() * (q * (1.0 - q)).sqrt();
    let (ps, pd) = (q + delta, q - delta);
    for p in [ps, pd] {
        if !(0.0..=1.0).contains(&p) || !q.is_finite() {
            return Err(Error::EdgeProbability { d, lambda, n, p });
        }
    }
    Ok((ps, pd))
}

impl Adjacency {
    /// Directed SBM: every ordered pair is an independent Bernoulli draw.
    pub fn bernoulli(labels: ArrayView1<f64>, d: f64, lambda: f64, seed: u64) -> Result<Self> {
        let n = labels.len();
        let (ps, pd) = edge_probabilities(d, lambda, n)?;
        let words = n.div_ceil(64);
        let base = ChaCha8Rng::seed_from_u64(seed);
        let mut bits = vec![0u64; n * words];
        bits.par_chunks_mut(words).enumerate().for_each(|(i, row)| {
            let mut rng = base.clone();
            rng.set_stream(i as u64);
            let yi = labels[i];
            for j in 0..n {
                let p = if yi == labels[j] { ps } else { pd };
                if rng.random::<f64>() < p {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
        });
        Ok(Adjacency::Bernoulli {
            bits: BitMatrix { n, words, bits },
            d,
        })
    }

    /// `(λ/√n) y yᵀ + Ξ` with i.i.d. standard Gaussian `Ξ`.
    pub fn gaussian_equivalent(labels: ArrayView1<f64>, lambda: f64, seed: u64) -> Self {
        let n = labels.len();
        let base = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = Array2::<f32>::zeros((n, n));
        noise
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, mut row)| {
                let mut rng = base.clone();
                rng.set_stream(i as u64);
                for v in row.iter_mut() {
                    *v = rng.sample::<f64, _>(StandardNormal) as f32;
                }
            });
        Adjacency::GaussianEquivalent {
            lambda,
            labels: labels.to_owned(),
            noise,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Adjacency::Bernoulli { bits, .. } => bits.n,
            Adjacency::GaussianEquivalent { labels, .. } => labels.len(),
        }
    }

    pub fn mode(&self) -> AdjacencyMode {
        match self {
            Adjacency::Bernoulli { .. } => AdjacencyMode::Bernoulli,
            Adjacency::GaussianEquivalent { .. } => AdjacencyMode::GaussianEquivalent,
        }
    }

    /// `(q, s)` with `Ã = s (A − q)` for Bernoulli graphs.
    fn centering(&self) -> (f64, f64) {
        match self {
            Adjacency::Bernoulli { d, .. } => {
                let q = d / self.n() as f64;
                (q, 1.0 / (q * (1.0 - q)).sqrt())
            }
            Adjacency::GaussianEquivalent { .. } => (0.0, 1.0),
        }
    }

    /// Entry `Ã_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            Adjacency::Bernoulli { bits, .. } => {
                let (q, s) = self.centering();
                s * (f64::from(u8::from(bits.get(i, j))) - q)
            }
            Adjacency::GaussianEquivalent {
                lambda,
                labels,
                noise,
            } => lambda / (labels.len() as f64).sqrt() * labels[i] * labels[j] + f64::from(noise[[i, j]]),
        }
    }

    /// Dense copy of `Ã`; meant for small instances and tests.
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n();
        Array2::from_shape_fn((n, n), |(i, j)| self.entry(i, j))
    }

    /// `Ã v`.
    pub fn matvec(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let n = self.n();
        match self {
            Adjacency::Bernoulli { bits, .. } => {
                let (q, s) = self.centering();
                let total = v.sum();
                let out: Vec<f64> = (0..n)
                    .into_par_iter()
                    .map(|i| s * (bits.row_ones(i).map(|j| v[j]).sum::<f64>() - q * total))
                    .collect();
                Array1::from(out)
            }
            Adjacency::GaussianEquivalent {
                lambda,
                labels,
                noise,
            } => {
                let proj = lambda / (n as f64).sqrt() * labels.dot(&v);
                let out: Vec<f64> = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let row = noise.row(i);
                        let mut acc = 0.0;
                        for (a, b) in row.iter().zip(v.iter()) {
                            acc += f64::from(*a) * b;
                        }
                        acc + proj * labels[i]
                    })
                    .collect();
                Array1::from(out)
            }
        }
    }

    /// `Ãᵀ v`.
    pub fn matvec_t(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let n = self.n();
        match self {
            Adjacency::Bernoulli { bits, .. } => {
                let (q, s) = self.centering();
                let total = v.sum();
                let mut out = Array1::<f64>::zeros(n);
                for i in 0..n {
                    let vi = v[i];
                    for j in bits.row_ones(i) {
                        out[j] += vi;
                    }
                }
                out.mapv_inplace(|x| s * (x - q * total));
                out
            }
            Adjacency::GaussianEquivalent {
                lambda,
                labels,
                noise,
            } => {
                let proj = lambda / (n as f64).sqrt() * labels.dot(&v);
                let mut out = Array1::<f64>::zeros(n);
                for i in 0..n {
                    let vi = v[i];
                    for (o, a) in out.iter_mut().zip(noise.row(i).iter()) {
                        *o += f64::from(*a) * vi;
                    }
                }
                out.zip_mut_with(labels, |o, y| *o += proj * y);
                out
            }
        }
    }

    /// Rows `rows` of `Ã X` (or of `Ãᵀ X` when `transpose`).
    pub fn rows_times(&self, rows: &[usize], x: ArrayView2<f64>, transpose: bool) -> Array2<f64> {
        let n = self.n();
        let m = x.ncols();
        let mut out = Array2::<f64>::zeros((rows.len(), m));
        let colsum = x.sum_axis(Axis(0));
        match self {
            Adjacency::Bernoulli { bits, d } => {
                let (q, s) = self.centering();
                let sparse = *d / (n as f64) < 0.05;
                if sparse && !transpose {
                    out.axis_iter_mut(Axis(0))
                        .into_par_iter()
                        .zip(rows.par_iter())
                        .for_each(|(mut o, &r)| {
                            for j in bits.row_ones(r) {
                                o += &x.row(j);
                            }
                        });
                } else if sparse {
                    let mut pos = vec![usize::MAX; n];
                    for (k, &r) in rows.iter().enumerate() {
                        pos[r] = k;
                    }
                    for i in 0..n {
                        for j in bits.row_ones(i) {
                            if pos[j] != usize::MAX {
                                let mut o = out.row_mut(pos[j]);
                                o += &x.row(i);
                            }
                        }
                    }
                } else {
                    self.dense_blocks(rows, x, transpose, &mut out, |i, j| {
                        f64::from(u8::from(bits.get(i, j)))
                    });
                }
                for mut o in out.axis_iter_mut(Axis(0)) {
                    o.zip_mut_with(&colsum, |a, c| *a = s * (*a - q * c));
                }
            }
            Adjacency::GaussianEquivalent {
                lambda,
                labels,
                noise,
            } => {
                self.dense_blocks(rows, x, transpose, &mut out, |i, j| f64::from(noise[[i, j]]));
                let ytx = labels.dot(&x);
                let scale = lambda / (n as f64).sqrt();
                for (mut o, &r) in out.axis_iter_mut(Axis(0)).zip(rows) {
                    o.scaled_add(scale * labels[r], &ytx);
                }
            }
        }
        out
    }

    /// `out[k] = Σ_j B[rows[k], j] X_j` in blocks through dense products, with
    /// `B(i, j) = entry(i, j)` or its transpose.
    fn dense_blocks<F>(&self, rows: &[usize], x: ArrayView2<f64>, transpose: bool, out: &mut Array2<f64>, entry: F)
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        const BLOCK: usize = 256;
        let n = self.n();
        for (b, chunk) in rows.chunks(BLOCK).enumerate() {
            let mut dense = Array2::<f64>::zeros((chunk.len(), n));
            dense
                .axis_iter_mut(Axis(0))
                .into_par_iter()
                .zip(chunk.par_iter())
                .for_each(|(mut row, &r)| {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = if transpose { entry(j, r) } else { entry(r, j) };
                    }
                });
            let prod = dense.dot(&x);
            out.slice_mut(s![b * BLOCK..b * BLOCK + chunk.len(), ..]).assign(&prod);
        }
    }
}
