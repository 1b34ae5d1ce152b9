//! # gcnsbm
//!
//! Exact high-dimensional predictions for a single-layer graph convolutional
//! network `h(w) = (1/N) (Ã + c√N I) X w` trained by regularized convex ERM on
//! two attributed stochastic block models:
//!
//! - **CSBM**: Rademacher labels, Gaussian-mixture features aligned with them;
//! - **GLM–SBM**: pure-noise Gaussian features, labels `y = sign(X u / √N)`.
//!
//! The crate is organised around one pipeline and two independent checks on it:
//!
//! | module | role |
//! |--------|------|
//! | [`params`], [`loss`], [`mc`], [`special`] | shared types, losses, seeded sampling, erf and quadrature |
//! | [`potentials`] | scalar maximizers of the weight and output potentials |
//! | [`state_evolution`] | Monte-Carlo fixed-point solver for the twelve order parameters |
//! | [`closed_form`] | large-regularization accuracies, learning rates and optimal self-loop |
//! | [`bayes_optimal`] | Bayes-optimal baselines for both models |
//! | [`simulator`] | finite-N instances, actual GCN training and measured metrics |
//!
//! ```no_run
//! use gcnsbm::{DataParams, GcnParams, LossKind};
//! use gcnsbm::state_evolution::{solve, observables, SolveConfig};
//! use gcnsbm::mc::sample_mc;
//!
//! let dp = DataParams::csbm(4.0, 1.5, 3.0, 0.1);
//! let gp = GcnParams::new(LossKind::Quadratic, 1e3, 1.0);
//! let cfg = SolveConfig::default();
//! let mc = sample_mc(cfg.mc_count, cfg.seed);
//! let fp = gcnsbm::state_evolution::solve_with_samples(&dp, &gp, &cfg, &mc).unwrap();
//! let metrics = observables(&fp, &mc, &dp, &gp).unwrap();
//! println!("test accuracy {:.4}", metrics.acc_test);
//! # let _ = solve;
//! ```

pub mod bayes_optimal;
pub mod closed_form;
pub mod error;
pub mod loss;
pub mod mc;
pub mod params;
pub mod potentials;
pub mod simulator;
pub mod special;
pub mod state_evolution;
pub mod stats;

pub use error::{Error, Result};
pub use loss::{loss_eval, LossKind};
pub use params::{snr_total, DataParams, GcnParams, Metrics, Model, OrderParams};

/// Sign with the convention `sign(0) = +1`, used for labels and accuracy checks.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}
