//! Bayes-optimal baselines: three-variable fixed-point systems for both models
//! and the test accuracies they imply.
//!
//! The directed graph of snr `λ` corresponds to an undirected one of snr
//! `√2 λ`, so the low-rank factorization snr used here is `Δ_I = 2λ²`.
//! Gaussian expectations use Gauss–Hermite rules; accuracies use adaptive
//! quadrature on `1 − Acc`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::DataParams;
use crate::special::{atanh_erf, erf, erfc, integrate, GaussHermite};
use crate::state_evolution::SolveConfig;

/// Gauss–Hermite nodes for the one-dimensional CSBM expectation.
pub const GH_CSBM: usize = 100;
/// Gauss–Hermite nodes per axis for the GLM–SBM expectations.
pub const GH_GLM: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoStateCsbm {
    pub m: f64,
    pub m_y: f64,
    pub m_u: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoStateGlmsbm {
    pub mhat_u: f64,
    pub m_y: f64,
    pub m_u: f64,
    pub rho_u: f64,
    pub delta_i: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the fixed point has `m_y < ρ`, which the equations should exclude.
    pub my_below_rho: bool,
}

/// How the supervised channel enters the `m̂_u` equation of the GLM–SBM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SupervisedTerm {
    /// `ρ E_η[Z^sup (f^sup)²]`, with `Z^sup` the law of `y = +1` only.
    #[default]
    AsPrinted,
    /// Sums the supervised term over both revealed labels; twice the above.
    Symmetrized,
}

fn check_bo_params(dp: &DataParams) -> Result<()> {
    if !(dp.alpha > 0.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: dp.alpha,
            reason: "must be positive",
        });
    }
    if !(0.0..=1.0).contains(&dp.rho) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: dp.rho,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(())
}

pub fn bo_solve_csbm(dp: &DataParams, cfg: &SolveConfig) -> Result<BoStateCsbm> {
    check_bo_params(dp)?;
    let gh = GaussHermite::new(GH_CSBM);
    let delta = 2.0 * dp.lambda * dp.lambda;
    let (a, rho, mu) = (dp.alpha, dp.rho, dp.mu);
    let mut m_y = 1.0;
    let mut m_u = mu / (1.0 + mu);
    let mut m = mu / a * m_u + delta * m_y;
    for it in 1..=cfg.max_iter {
        let m_new = mu / a * m_u + delta * m_y;
        let sm = m_new.max(0.0).sqrt();
        let my_new = rho + (1.0 - rho) * gh.expect(|w| (m_new + sm * w).tanh());
        let mu_new = mu * my_new / (1.0 + mu * my_new);
        let res = (m_new - m).abs().max((my_new - m_y).abs()).max((mu_new - m_u).abs());
        m = m_new;
        m_y = my_new;
        m_u = mu_new;
        if res <= cfg.tol {
            return Ok(BoStateCsbm {
                m,
                m_y,
                m_u,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(BoStateCsbm {
        m,
        m_y,
        m_u,
        iterations: cfg.max_iter,
        converged: false,
    })
}

pub fn bo_acc_csbm(s: &BoStateCsbm) -> f64 {
    0.5 * (1.0 + erf((s.m.max(0.0) / 2.0).sqrt()))
}

/// `1 − Acc` of the CSBM baseline.
pub fn bo_err_csbm(s: &BoStateCsbm) -> f64 {
    0.5 * erfc((s.m.max(0.0) / 2.0).sqrt())
}

/// `(1 + e t)` for `e = erf x`, `t = tanh B`, without cancellation when both
/// factors are close to ∓1.
#[inline]
fn one_plus_et(x: f64, b: f64) -> f64 {
    // 1 + e = erfc(-x), 1 - e = erfc(x); 1 + t = 2σ(2B), 1 - t = 2σ(-2B).
    let (p, q) = (erfc(-x), erfc(x));
    let (s, r) = (logistic(2.0 * b), logistic(-2.0 * b));
    p * s + q * r
}

#[inline]
fn logistic(x: f64) -> f64 {
    crate::loss::sigmoid(x)
}

struct GlmMoments {
    /// `E_η[Z^sup (f^sup)²]`
    sup: f64,
    /// `E_{ξ,η}[Z_out f_out²]`
    out: f64,
    /// `E_{ξ,η}[Z_out f_y²]`
    y: f64,
}

fn glm_moments(gh: &GaussHermite, delta: f64, rho_u: f64, m_y: f64, m_u: f64) -> GlmMoments {
    let a = delta * m_y;
    let sa = a.max(0.0).sqrt();
    let v = (rho_u - m_u).max(1e-300);
    let su = m_u.max(0.0).sqrt();
    let mut sup = 0.0;
    let mut out = 0.0;
    let mut yy = 0.0;
    for (&eta, &we) in gh.nodes.iter().zip(&gh.weights) {
        let omega = su * eta;
        let x = omega / (2.0 * v).sqrt();
        let de = (2.0 / (PI * v)).sqrt() * (-x * x).exp();
        // Z^sup f² = ½ e'² / (1 + e)
        let ope = erfc(-x);
        if ope > 0.0 {
            sup += we * 0.5 * de * de / ope;
        }
        let ae = atanh_erf(x);
        for y in [1.0, -1.0] {
            let wy = 0.5 * if y > 0.0 { erfc(-x) } else { erfc(x) };
            if wy == 0.0 {
                continue;
            }
            for (&xi, &wx) in gh.nodes.iter().zip(&gh.weights) {
                let b = y * a + sa * xi;
                let fy = (b + ae).tanh();
                let fo = b.tanh() * de / one_plus_et(x, b);
                let w = we * wx * wy;
                out += w * fo * fo;
                yy += w * fy * fy;
            }
        }
    }
    GlmMoments { sup, out, y: yy }
}

pub fn bo_solve_glmsbm(dp: &DataParams, cfg: &SolveConfig) -> Result<BoStateGlmsbm> {
    bo_solve_glmsbm_with(dp, cfg, SupervisedTerm::default())
}

pub fn bo_solve_glmsbm_with(
    dp: &DataParams,
    cfg: &SolveConfig,
    term: SupervisedTerm,
) -> Result<BoStateGlmsbm> {
    check_bo_params(dp)?;
    let gh = GaussHermite::new(GH_GLM);
    let rho_u = 1.0 / dp.alpha;
    let delta = 2.0 * dp.lambda * dp.lambda;
    let rho = dp.rho;
    let sup_factor = match term {
        SupervisedTerm::AsPrinted => 1.0,
        SupervisedTerm::Symmetrized => 2.0,
    };
    let mut m_y = 1.0;
    let mut m_u = 0.5 * rho_u;
    let mut mhat_u = 0.0;
    let mut iterations = cfg.max_iter;
    let mut converged = false;
    for it in 1..=cfg.max_iter {
        let g = glm_moments(&gh, delta, rho_u, m_y, m_u);
        let mh = rho * sup_factor * g.sup + (1.0 - rho) * g.out;
        let my_new = rho + (1.0 - rho) * g.y;
        let mu_new = rho_u * mh / (1.0 + mh);
        for (name, v) in [("mhat_u", mh), ("m_y", my_new), ("m_u", mu_new)] {
            if !v.is_finite() {
                return Err(Error::SingularIteration {
                    equation: name,
                    value: v,
                });
            }
        }
        let res = (mh - mhat_u).abs().max((my_new - m_y).abs()).max((mu_new - m_u).abs());
        mhat_u = mh;
        m_y = my_new;
        m_u = mu_new;
        if res <= cfg.tol {
            iterations = it;
            converged = true;
            break;
        }
    }
    Ok(BoStateGlmsbm {
        mhat_u,
        m_y,
        m_u,
        rho_u,
        delta_i: delta,
        iterations,
        converged,
        my_below_rho: m_y < rho,
    })
}

/// `1 − Acc` of the GLM–SBM baseline.
pub fn bo_err_glmsbm(s: &BoStateGlmsbm) -> Result<f64> {
    let a = s.delta_i * s.m_y;
    let gap = s.rho_u - s.m_u;
    if s.m_u > 0.0 && gap <= 1e-15 * s.rho_u {
        // Perfect recovery of u: every node is classified correctly.
        return Ok(0.0);
    }
    let k = (s.m_u.max(0.0) / (2.0 * gap)).sqrt();
    let norm = 1.0 / (2.0 * PI).sqrt();
    let integrand = |eta: f64| {
        let x = k * eta;
        let py = 0.5 * erfc(-x);
        let miss = if a > 0.0 {
            erfc((a / 2.0).sqrt() + atanh_erf(x) / (2.0 * a).sqrt())
        } else if x > 0.0 {
            0.0
        } else if x < 0.0 {
            2.0
        } else {
            1.0
        };
        norm * (-0.5 * eta * eta).exp() * py * miss
    };
    let lo = integrate(integrand, -12.0, 0.0, 1e-300, 1e-10)?;
    let hi = integrate(integrand, 0.0, 12.0, 1e-300, 1e-10)?;
    Ok(lo + hi)
}

pub fn bo_acc_glmsbm(s: &BoStateGlmsbm) -> Result<f64> {
    Ok(1.0 - bo_err_glmsbm(s)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SolveConfig {
        SolveConfig {
            tol: 1e-12,
            max_iter: 2000,
            ..SolveConfig::default()
        }
    }

    #[test]
    fn csbm_examples() {
        let s = bo_solve_csbm(&DataParams::csbm(4.0, 0.8, 1.0, 1.0), &cfg()).unwrap();
        assert_eq!(s.m_y, 1.0);
        let s = bo_solve_csbm(&DataParams::csbm(4.0, 0.0, 0.0, 0.1), &cfg()).unwrap();
        assert_eq!(s.m, 0.0);
        assert_eq!(bo_acc_csbm(&s), 0.5);
        let two = BoStateCsbm {
            m: 2.0,
            m_y: 1.0,
            m_u: 0.0,
            iterations: 0,
            converged: true,
        };
        assert!((bo_acc_csbm(&two) - 0.5 * (1.0 + erf(1.0))).abs() < 1e-15);
        assert!((bo_acc_csbm(&two) - 0.921_350_396_474_857_7).abs() < 1e-12);
    }

    #[test]
    fn glm_examples() {
        let s = bo_solve_glmsbm(&DataParams::glm_sbm(2.0, 0.7, 1.0), &cfg()).unwrap();
        assert_eq!(s.m_y, 1.0);
        let mut dp = DataParams::glm_sbm(2.0, 0.0, 0.1);
        dp.rho = 0.0;
        let s = bo_solve_glmsbm(&dp, &cfg()).unwrap();
        assert!(s.m_u.abs() < 1e-12);
        assert!((bo_acc_glmsbm(&s).unwrap() - 0.5).abs() < 1e-9);
        let trivial = BoStateGlmsbm {
            mhat_u: 0.0,
            m_y: 0.0,
            m_u: 0.0,
            rho_u: 0.5,
            delta_i: 2.0,
            iterations: 0,
            converged: true,
            my_below_rho: false,
        };
        assert!((bo_acc_glmsbm(&trivial).unwrap() - 0.5).abs() < 1e-12);
    }

    /// With perfect label information the unsupervised channel reduces to the
    /// supervised one summed over both labels, i.e. twice the printed term.
    #[test]
    fn supervised_term_is_half_the_perfect_information_limit() {
        let gh = GaussHermite::new(GH_GLM);
        for &(rho_u, m_u) in &[(0.5, 0.1), (0.25, 0.2), (1.0, 0.6)] {
            let g = glm_moments(&gh, 1e6, rho_u, 1.0, m_u);
            assert!((g.out - 2.0 * g.sup).abs() < 1e-8 * g.out, "{} {}", g.out, g.sup);
        }
    }

    #[test]
    fn stable_bracket_matches_naive_product() {
        for &(x, b) in &[(0.3, 0.2), (-1.0, 2.0), (2.0, -0.5)] {
            let naive = 1.0 + erf(x) * f64::tanh(b);
            assert!((one_plus_et(x, b) - naive).abs() < 1e-14);
        }
        assert!(one_plus_et(-7.0, 20.0) > 0.0);
    }
}
