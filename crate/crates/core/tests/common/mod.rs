//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use gcnsbm::potentials::OutChannelInput;
use gcnsbm::simulator::{Adjacency, Dataset};
use gcnsbm::{DataParams, LossKind, OrderParams};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Maximizer of a concave `f` on `[lo, hi]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Best point of a uniform grid with spacing `step` on `[lo, hi]`.
pub fn grid_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let k = ((hi - lo) / step).ceil() as usize;
    (0..=k)
        .map(|i| lo + i as f64 * step)
        .map(|x| (x, f(x)))
        .fold((lo, f64::NEG_INFINITY), |best, (x, v)| if v > best.1 { (x, v) } else { best })
        .0
}

/// Grid (spacing 1e-3) and refined maximizers of `−l(y h) − (h − mean)²/(2 var)`,
/// searched in a window of half-width 2 around `center`.
pub fn prox_oracle(loss: LossKind, y: f64, mean: f64, var: f64, center: f64) -> (f64, f64) {
    let f = |h: f64| -loss.eval(y * h) - (h - mean).powi(2) / (2.0 * var);
    let coarse = grid_max(f, center - 2.0, center + 2.0, 1e-3);
    let refined = golden_max(f, coarse - 2e-3, coarse + 2e-3, 1e-12);
    (coarse, refined)
}

/// Value of `ψ_out` maximized over `σ` for fixed `h`, by golden search.
fn profile(input: &OutChannelInput, loss: LossKind, h: f64, s_center: f64) -> (f64, f64) {
    let s = golden_max(|s| gcnsbm::potentials::psi_out(input, loss, h, s), s_center - 20.0, s_center + 20.0, 1e-11);
    (s, gcnsbm::potentials::psi_out(input, loss, h, s))
}

/// Grid-then-golden maximizer `(h, σ)` of `ψ_out`, searched around `(h0, s0)`.
pub fn out_oracle(input: &OutChannelInput, loss: LossKind, h0: f64, s0: f64) -> ((f64, f64), (f64, f64)) {
    let f = |h: f64| profile(input, loss, h, s0).1;
    let hc = grid_max(f, h0 - 1.0, h0 + 1.0, 1e-2);
    let coarse = (hc, profile(input, loss, hc, s0).0);
    let hr = golden_max(f, hc - 1e-2, hc + 1e-2, 1e-10);
    (coarse, (hr, profile(input, loss, hr, s0).0))
}

/// Order parameters drawn in a range where every denominator is safe.
pub fn random_theta(rng: &mut impl Rng) -> OrderParams {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    OrderParams {
        m_w: u(-1.0, 1.0),
        m_sigma: u(-1.0, 1.0),
        q_w: u(0.1, 3.0),
        q_sigma: u(0.1, 3.0),
        v_w: u(0.1, 3.0),
        v_sigma: u(0.1, 3.0),
        mhat_w: u(-1.0, 1.0),
        mhat_sigma: u(-1.0, 1.0),
        qhat_w: u(0.0, 3.0),
        qhat_sigma: u(0.0, 3.0),
        vhat_w: u(0.0, 3.0),
        vhat_sigma: u(0.0, 3.0),
    }
}

pub fn random_out_input(rng: &mut ChaCha8Rng) -> OutChannelInput {
    let theta = random_theta(rng);
    let mut g = || rng.sample::<f64, _>(StandardNormal);
    let (xi, zeta, chi) = (g(), g(), g());
    OutChannelInput {
        y: if rng.random::<bool>() { 1.0 } else { -1.0 },
        xi,
        zeta,
        chi,
        theta,
        c: rng.random_range(0.0..3.0),
        lambda: rng.random_range(0.0..3.0),
        mu: rng.random_range(0.0..3.0),
        t_bar: rng.random::<bool>(),
    }
}

/// A tiny dataset with a Gaussian-equivalent operator, below the generator's
/// minimum size.
pub fn tiny_dataset(n: usize, m: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = Array1::from_shape_fn(n, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
    let noise = Array2::from_shape_fn((n, n), |_| rng.sample::<f64, _>(StandardNormal) as f32);
    let features = Array2::from_shape_fn((n, m), |_| rng.sample::<f64, _>(StandardNormal));
    Dataset {
        params: DataParams::csbm(n as f64 / m as f64, 1.0, 1.0, 0.5),
        n,
        m_dim: m,
        adjacency: Adjacency::GaussianEquivalent {
            lambda: 1.3,
            labels: labels.clone(),
            noise,
        },
        symmetrized: false,
        features,
        labels,
        hidden_u: Array1::zeros(m),
        train_mask: (0..n / 2).collect(),
        test_mask: (n / 2..n).collect(),
        seed,
    }
}

/// `(1/n)(Ã + c√n I) X w` from the dense matrices.
pub fn dense_forward(ds: &Dataset, w: &Array1<f64>, c: f64) -> Array1<f64> {
    let n = ds.n as f64;
    let mut a = ds.adjacency.to_dense();
    if ds.symmetrized {
        a = (&a + &a.t()) / std::f64::consts::SQRT_2;
    }
    let q = a + Array2::<f64>::eye(ds.n) * (c * n.sqrt());
    q.dot(&ds.features).dot(w) / n
}
