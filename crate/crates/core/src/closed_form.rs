//! Large-regularization closed forms: summary statistics, test accuracy for any
//! self-loop `c`, asymptotic learning rates and the optimal self-loop `c*`.
//!
//! At `r → ∞` the accuracy no longer depends on `r` or on the loss. Errors are
//! computed as `1 − Acc` directly through `erfc` so that far tails keep their
//! relative precision.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::params::{DataParams, GcnParams, Model};
use crate::special::{erf, erfc, golden_min, integrate, ln_erfc};

/// Bayes-optimal learning rate.
pub const RATE_BO: f64 = 1.0;

/// Summary statistics in the `r → ∞` limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargeRStats {
    pub m_w: f64,
    pub m_sigma: f64,
    pub q_w: f64,
    pub q_sigma: f64,
    pub v_w: f64,
    pub v_sigma: f64,
    pub mhat_w: f64,
    pub mhat_sigma: f64,
    pub qhat_w: f64,
    pub qhat_sigma: f64,
}

/// Effective feature snr: `μ` for the CSBM and `2α/π` for the GLM–SBM.
fn feature_snr(dp: &DataParams) -> f64 {
    match dp.model {
        Model::Csbm => dp.mu,
        Model::GlmSbm => 2.0 * dp.alpha / PI,
    }
}

pub fn large_r_stats(dp: &DataParams, gp: &GcnParams) -> LargeRStats {
    let (a, rho, l, c, r) = (dp.alpha, dp.rho, dp.lambda, gp.c, gp.r);
    let p = feature_snr(dp);
    let lc = l + c;
    let base = 1.0 + c * c * (1.0 - rho);
    let q_sigma_signal = match dp.model {
        Model::Csbm => (1.0 + p) * (1.0 + p + a),
        Model::GlmSbm => (1.0 + p) * (1.0 + a) + p,
    };
    LargeRStats {
        m_w: rho / (a * r) * p.sqrt() * lc,
        m_sigma: rho / (a * r) * (1.0 + p) * lc,
        q_w: rho / (a * r * r) * (base + rho * (1.0 + p) * lc * lc),
        q_sigma: rho / (a * a * r * r) * ((1.0 + a) * base + rho * q_sigma_signal * lc * lc),
        v_w: 1.0 / (a * r),
        v_sigma: 1.0 / (a * r),
        mhat_w: rho * p.sqrt() * lc,
        mhat_sigma: l * rho,
        qhat_w: rho + rho * (l * rho + c).powi(2) + (1.0 - rho) * l * l * rho * rho,
        qhat_sigma: rho,
    }
}

/// Test error `1 − Acc` in the `r → ∞` limit.
pub fn err_large_r(dp: &DataParams, gp: &GcnParams) -> Result<f64> {
    gp.validate()?;
    let s = large_r_stats(dp, gp);
    let c = gp.c;
    let num = dp.lambda * s.m_sigma + c * s.v_w * s.mhat_sigma;
    let base = s.q_sigma + c * c * s.v_w * s.v_w * s.qhat_sigma;
    match dp.model {
        Model::Csbm => {
            let x = (num + c * dp.mu.sqrt() * s.m_w) / (2.0 * (base + c * c * s.q_w)).sqrt();
            Ok(0.5 * erfc(x))
        }
        Model::GlmSbm => {
            let a = dp.alpha;
            let den = (2.0 * (base + c * c * (s.q_w - a * s.m_w * s.m_w))).sqrt();
            let slope = c * s.m_w * a / den;
            let x0 = num / den;
            let norm = (a / (2.0 * PI)).sqrt();
            let zmax = 12.0 / a.sqrt();
            integrate(
                |z| norm * (-0.5 * a * z * z).exp() * erfc(x0 + slope * z),
                0.0,
                zmax,
                1e-300,
                1e-11,
            )
        }
    }
}

/// Test accuracy in the `r → ∞` limit, for any `c`.
pub fn acc_large_r(dp: &DataParams, gp: &GcnParams) -> Result<f64> {
    Ok(1.0 - err_large_r(dp, gp)?)
}

pub fn acc_large_r_csbm(dp: &DataParams, gp: &GcnParams) -> Result<f64> {
    acc_large_r(&DataParams { model: Model::Csbm, ..*dp }, gp)
}

pub fn acc_large_r_glmsbm(dp: &DataParams, gp: &GcnParams) -> Result<f64> {
    acc_large_r(
        &DataParams {
            model: Model::GlmSbm,
            mu: 0.0,
            ..*dp
        },
        gp,
    )
}

/// `τ` at `c = 0`, so that `Acc = ½(1 + erf(λ√τ))`.
pub fn tau_c0(dp: &DataParams) -> f64 {
    let (a, rho, l) = (dp.alpha, dp.rho, dp.lambda);
    let p = feature_snr(dp);
    let signal = match dp.model {
        Model::Csbm => (1.0 + p) * (1.0 + a + p),
        Model::GlmSbm => (1.0 + p) * (1.0 + a + p) - p * p,
    };
    let sqrt_tau = l * rho * (1.0 + p) / (SQRT_2 * (rho * (1.0 + a) + l * l * rho * rho * signal).sqrt());
    sqrt_tau * sqrt_tau
}

/// `½(1 + erf(λ√τ))` with `τ` from [`tau_c0`].
pub fn acc_c0(dp: &DataParams) -> f64 {
    0.5 * (1.0 + erf(dp.lambda * tau_c0(dp).sqrt()))
}

/// Asymptotic learning rate `τ∞` with `log(1 − Acc) ~ −λ² τ∞`.
pub fn rate_inf(dp: &DataParams) -> f64 {
    let a = dp.alpha;
    match dp.model {
        Model::Csbm => (1.0 + dp.mu) / (2.0 * (1.0 + a + dp.mu)),
        Model::GlmSbm => {
            let p = 2.0 * a / PI;
            (1.0 + p) / (2.0 * (1.0 + a + p / (1.0 + p)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaRegime {
    SmallLambda,
    LargeLambda,
    Finite,
}

/// Optimal self-loop strength.
pub fn c_star(dp: &DataParams, regime: LambdaRegime) -> Result<f64> {
    let (a, rho, l, mu) = (dp.alpha, dp.rho, dp.lambda, dp.mu);
    if !(l > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: l,
            reason: "the optimal self-loop needs lambda > 0",
        });
    }
    match (dp.model, regime) {
        (Model::Csbm, LambdaRegime::SmallLambda) => Ok(mu
            * ((1.0 + a) * (2.0 - rho) + rho * (1.0 + mu) * (1.0 + mu + a))
            / (a * (1.0 + mu) * (2.0 + rho * mu) * l)),
        (Model::Csbm, LambdaRegime::LargeLambda) => Ok((1.0 + mu + a) / (a * l)),
        (Model::GlmSbm, LambdaRegime::SmallLambda) => Err(Error::Unsupported(
            "the small-lambda optimal self-loop of the GLM-SBM is only known up to a constant; use the finite-lambda search".into(),
        )),
        (Model::GlmSbm, LambdaRegime::LargeLambda) => {
            let p = 2.0 * a / PI;
            let tau = rate_inf(dp);
            let den = (1.0 + a) * (1.0 + p) + p;
            let f = |ct: f64| {
                let aa = a.sqrt() * ct * p.sqrt() / (1.0 + p);
                let b = ct / (1.0 + p) - 0.5 * (a * ct * ct + (1.0 + a) / rho) / den;
                -2.0 * b * tau + aa * aa * tau + ln_erfc(SQRT_2 * aa * tau)
            };
            Ok(scan_minimize(f, 0.0, 10.0)? / l)
        }
        (_, LambdaRegime::Finite) => {
            let f = |c: f64| {
                let gp = GcnParams::new(crate::LossKind::Quadratic, 1.0, c);
                log_err_large_r(dp, &gp).unwrap_or(f64::INFINITY)
            };
            scan_minimize(f, 0.0, 10.0 / l)
        }
    }
}

/// `ln(1 − Acc)` at `r → ∞`, accurate in far tails.
pub fn log_err_large_r(dp: &DataParams, gp: &GcnParams) -> Result<f64> {
    match dp.model {
        Model::Csbm => {
            let s = large_r_stats(dp, gp);
            let c = gp.c;
            let num = dp.lambda * s.m_sigma + c * s.v_w * s.mhat_sigma + c * dp.mu.sqrt() * s.m_w;
            let den = (2.0 * (s.q_sigma + c * c * s.v_w * s.v_w * s.qhat_sigma + c * c * s.q_w)).sqrt();
            Ok(ln_erfc(num / den) - std::f64::consts::LN_2)
        }
        Model::GlmSbm => Ok(err_large_r(dp, gp)?.ln()),
    }
}

const SCAN_POINTS: usize = 201;

/// Coarse scan plus golden-section refinement of a minimum on `[lo, hi]`.
/// The bracket is doubled once if the scan minimum sits on the upper edge or
/// several local minima show up.
fn scan_minimize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    let mut hi = hi;
    for attempt in 0..2 {
        let h = (hi - lo) / (SCAN_POINTS - 1) as f64;
        let xs: Vec<f64> = (0..SCAN_POINTS).map(|i| lo + h * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let imin = (0..SCAN_POINTS)
            .min_by(|&i, &j| ys[i].total_cmp(&ys[j]))
            .expect("non-empty scan");
        let minima = (1..SCAN_POINTS - 1)
            .filter(|&i| ys[i] < ys[i - 1] && ys[i] <= ys[i + 1])
            .count();
        let edge = imin == SCAN_POINTS - 1;
        if edge || minima > 1 {
            if attempt == 0 {
                hi = lo + 2.0 * (hi - lo);
                continue;
            }
            return Err(Error::Bracket {
                lo,
                hi,
                reason: if edge {
                    "minimum on the upper edge"
                } else {
                    "objective is not unimodal"
                },
            });
        }
        let a = xs[imin.saturating_sub(1)];
        let b = xs[(imin + 1).min(SCAN_POINTS - 1)];
        return Ok(golden_min(&f, a, b, 1e-8).0);
    }
    unreachable!()
}
