//! Fixed-point solver for the twelve self-consistent equations and the
//! resulting train/test metrics.
//!
//! Every expectation over `(y, ξ, ζ, χ)` is a Monte-Carlo average over one
//! [`McSampleSet`] that is reused across iterations. The weight channel has an
//! l2 prior, so its Gaussian expectations over `(u, ς)` are done exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::mc::{chunked_sums, make_pool, sample_mc, McSampleSet};
use crate::params::{DataParams, GcnParams, Metrics, Model, OrderParams};
use crate::potentials::OutChannel;
use crate::special::erfc;

/// Floor applied to `Q̂_σ`, `Q_w`, `Q_σ` where they divide.
pub const Q_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// `m_w = m_σ = 0.1`, `Q = V = 1`, hat block from one update.
    Preset,
    /// Start the `Θ` block from the given values; the hat block is derived.
    Theta(OrderParams),
    /// Use all twelve values as given.
    Full(OrderParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub mc_count: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub init: Init,
    /// Worker threads for the per-sample maximizations; results do not depend on it.
    pub workers: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            mc_count: 1_000_000,
            seed: 0,
            tol: 1e-8,
            max_iter: 200,
            damping: 0.0,
            init: Init::Preset,
            workers: 1,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol",
                value: self.tol,
                reason: "must be positive",
            });
        }
        if self.mc_count < 1000 {
            return Err(Error::InvalidParameter {
                name: "mc_count",
                value: self.mc_count as f64,
                reason: "must be at least 1000",
            });
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidParameter {
                name: "damping",
                value: self.damping,
                reason: "must lie in [0, 1)",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub theta: OrderParams,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Set when a `Q`-type quantity had to be floored at [`Q_FLOOR`].
    pub floored: bool,
}

/// Per-sample label weights of the GLM–SBM, `P(y = ±1 | χ)` and `g(χ)`.
struct GlmLaw {
    k: f64,
    eta_scale: f64,
    g_norm: f64,
}

impl GlmLaw {
    fn new(theta: &OrderParams, alpha: f64) -> Result<Self> {
        let eta = theta.eta_w(alpha);
        if !(0.0..1.0).contains(&eta) || theta.q_w <= 0.0 {
            return Err(Error::DegenerateOverlap { eta });
        }
        let denom = (2.0 * (theta.q_w / alpha - theta.m_w * theta.m_w)).sqrt();
        Ok(Self {
            k: theta.m_w / denom,
            eta_scale: eta / (2.0 * (1.0 - eta)),
            g_norm: 1.0 / (2.0 * std::f64::consts::PI * (1.0 - eta) / alpha).sqrt(),
        })
    }

    /// `(P(y=+1|χ), P(y=-1|χ), g(χ))`
    #[inline]
    fn at(&self, chi: f64) -> (f64, f64, f64) {
        let x = self.k * chi;
        (
            0.5 * erfc(-x),
            0.5 * erfc(x),
            self.g_norm * (-self.eta_scale * chi * chi).exp(),
        )
    }
}

// Accumulator slots.
const M_S: usize = 0;
const Q_S: usize = 1;
const XI_S: usize = 2;
const MH_W: usize = 3;
const QH_W: usize = 4;
const CHI_S: usize = 5;
const MH_S: usize = 6;
const QH_S: usize = 7;
const ZETA_S: usize = 8;
const NACC: usize = 9;

#[inline]
#[allow(clippy::too_many_arguments)]
fn accumulate(
    acc: &mut [f64; NACC],
    wgt: f64,
    gy: f64,
    ch: &OutChannel,
    loss: LossKind,
    rho: f64,
    model: Model,
    y: f64,
    xi: f64,
    zeta: f64,
    chi: f64,
) -> Result<()> {
    let s = ch.solve(loss, y, xi, zeta, chi)?;
    let pr = |f1: f64, f0: f64| rho * f1 + (1.0 - rho) * f0;
    let ps = pr(s.s1, s.s0);
    let r1 = s.h1 - ch.c * s.s1;
    let r0 = s.h0 - ch.c * s.s0;
    let lym = ch.lambda * y * ch.m_sigma;
    acc[M_S] += wgt * y * ps;
    acc[Q_S] += wgt * pr(s.s1 * s.s1, s.s0 * s.s0);
    acc[XI_S] += wgt * xi * ps;
    match model {
        Model::Csbm => {
            let shift = ch.sqrt_mu * y * ch.m_w;
            acc[MH_W] += wgt * y * (ps - shift);
        }
        Model::GlmSbm => acc[MH_W] += gy * y * ps,
    }
    acc[QH_W] += wgt * pr((s.s1 - s.b).powi(2), (s.s0 - s.b).powi(2));
    acc[CHI_S] += wgt * chi * ps;
    acc[MH_S] += wgt * y * (pr(r1, r0) - lym);
    acc[QH_S] += wgt * pr((r1 - s.a).powi(2), (r0 - s.a).powi(2));
    acc[ZETA_S] += wgt * zeta * pr(r1, r0);
    Ok(())
}

/// Monte-Carlo averages of the nine output-channel quantities.
fn out_channel_averages(
    theta: &OrderParams,
    mc: &McSampleSet,
    dp: &DataParams,
    gp: &GcnParams,
    pool: Option<&rayon::ThreadPool>,
) -> Result<[f64; NACC]> {
    let ch = OutChannel::new(theta, gp.c, dp.lambda, dp.effective_mu())?;
    let glm = match dp.model {
        Model::GlmSbm => Some(GlmLaw::new(theta, dp.alpha)?),
        Model::Csbm => None,
    };
    let failure = std::sync::Mutex::new(None::<Error>);
    let sums = chunked_sums::<NACC, _>(mc.len(), pool, |range, acc| {
        for i in range {
            let (xi, zeta, chi) = (mc.xi[i], mc.zeta[i], mc.chi[i]);
            let res = match &glm {
                None => accumulate(
                    acc, 1.0, 0.0, &ch, gp.loss, dp.rho, dp.model, mc.label(i), xi, zeta, chi,
                ),
                Some(law) => {
                    let (pp, pm, g) = law.at(chi);
                    accumulate(acc, pp, g, &ch, gp.loss, dp.rho, dp.model, 1.0, xi, zeta, chi).and_then(
                        |_| accumulate(acc, pm, g, &ch, gp.loss, dp.rho, dp.model, -1.0, xi, zeta, chi),
                    )
                }
            };
            if let Err(e) = res {
                failure.lock().unwrap().get_or_insert(e);
                return;
            }
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let n = mc.len() as f64;
    Ok(sums.map(|s| s / n))
}

fn check(equation: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::SingularIteration { equation, value })
    }
}

fn floored(x: f64, flag: &mut bool) -> f64 {
    if x < Q_FLOOR {
        *flag = true;
        Q_FLOOR
    } else {
        x
    }
}

/// One Jacobi sweep of all twelve equations. Returns the new parameters and
/// whether a floor was hit.
fn update(
    theta: &OrderParams,
    mc: &McSampleSet,
    dp: &DataParams,
    gp: &GcnParams,
    pool: Option<&rayon::ThreadPool>,
) -> Result<(OrderParams, bool)> {
    let t = theta;
    let e = out_channel_averages(t, mc, dp, gp, pool)?;
    let mut flag = false;
    let curv = gp.r + t.vhat_w;
    if !(curv > 0.0) {
        return Err(Error::SingularIteration {
            equation: "V_w",
            value: curv,
        });
    }
    let ac = dp.alpha * curv;
    let sqrt_qhs = floored(t.qhat_sigma, &mut flag).sqrt();
    let sqrt_qw = floored(t.q_w, &mut flag).sqrt();
    let sqrt_qs = floored(t.q_sigma, &mut flag).sqrt();

    let mhat_w = match dp.model {
        Model::Csbm => dp.mu.sqrt() / t.v_w * e[MH_W],
        Model::GlmSbm => e[MH_W] / t.v_w,
    };
    let vhat_w = match dp.model {
        Model::Csbm => (1.0 - e[CHI_S] / sqrt_qw) / t.v_w,
        Model::GlmSbm => (1.0 - (e[CHI_S] - t.m_w / sqrt_qw * e[MH_W]) / sqrt_qw) / t.v_w,
    };
    let new = OrderParams {
        m_w: check("m_w", t.mhat_w / ac)?,
        m_sigma: check("m_sigma", e[M_S])?,
        q_w: check("Q_w", (t.qhat_w + t.mhat_w * t.mhat_w) / (ac * curv))?,
        q_sigma: check("Q_sigma", e[Q_S])?,
        v_w: check("V_w", 1.0 / ac)?,
        v_sigma: check("V_sigma", e[XI_S] / sqrt_qhs)?,
        mhat_w: check("mhat_w", mhat_w)?,
        mhat_sigma: check("mhat_sigma", dp.lambda / t.v_sigma * e[MH_S])?,
        qhat_w: check("Qhat_w", e[QH_W] / (t.v_w * t.v_w))?,
        qhat_sigma: check("Qhat_sigma", e[QH_S] / (t.v_sigma * t.v_sigma))?,
        vhat_w: check("Vhat_w", vhat_w)?,
        vhat_sigma: check("Vhat_sigma", (1.0 - e[ZETA_S] / sqrt_qs) / t.v_sigma)?,
    };
    Ok((new, flag))
}

fn validate_inputs(dp: &DataParams, gp: &GcnParams) -> Result<()> {
    dp.validate()?;
    gp.validate()
}

/// One parallel update of the CSBM system.
pub fn iterate_csbm(
    theta: &OrderParams,
    mc: &McSampleSet,
    dp: &DataParams,
    gp: &GcnParams,
) -> Result<OrderParams> {
    let dp = DataParams {
        model: Model::Csbm,
        ..*dp
    };
    validate_inputs(&dp, gp)?;
    Ok(update(theta, mc, &dp, gp, None)?.0)
}

/// One parallel update of the GLM–SBM system.
pub fn iterate_glmsbm(
    theta: &OrderParams,
    mc: &McSampleSet,
    dp: &DataParams,
    gp: &GcnParams,
) -> Result<OrderParams> {
    let dp = DataParams {
        model: Model::GlmSbm,
        mu: 0.0,
        ..*dp
    };
    validate_inputs(&dp, gp)?;
    Ok(update(theta, mc, &dp, gp, None)?.0)
}

/// The `Θ` block of the default initialization with placeholder hats.
pub fn preset_theta() -> OrderParams {
    OrderParams {
        m_w: 0.1,
        m_sigma: 0.1,
        q_w: 1.0,
        q_sigma: 1.0,
        v_w: 1.0,
        v_sigma: 1.0,
        mhat_w: 0.1,
        mhat_sigma: 0.1,
        qhat_w: 1.0,
        qhat_sigma: 1.0,
        vhat_w: 1.0,
        vhat_sigma: 1.0,
    }
}

/// Replaces the hat block of `theta` by one update computed from it.
fn derive_hats(
    theta: OrderParams,
    mc: &McSampleSet,
    dp: &DataParams,
    gp: &GcnParams,
    pool: Option<&rayon::ThreadPool>,
) -> Result<OrderParams> {
    let (u, _) = update(&theta, mc, dp, gp, pool)?;
    Ok(OrderParams {
        mhat_w: u.mhat_w,
        mhat_sigma: u.mhat_sigma,
        qhat_w: u.qhat_w,
        qhat_sigma: u.qhat_sigma,
        vhat_w: u.vhat_w,
        vhat_sigma: u.vhat_sigma,
        ..theta
    })
}

/// Iterates from `cfg.init` with a freshly drawn sample set.
pub fn solve(dp: &DataParams, gp: &GcnParams, cfg: &SolveConfig) -> Result<FixedPoint> {
    cfg.validate()?;
    let mc = sample_mc(cfg.mc_count, cfg.seed);
    solve_with_samples(dp, gp, cfg, &mc)
}

/// Iterates from `cfg.init` using the given samples (`cfg.mc_count` and
/// `cfg.seed` are ignored).
pub fn solve_with_samples(
    dp: &DataParams,
    gp: &GcnParams,
    cfg: &SolveConfig,
    mc: &McSampleSet,
) -> Result<FixedPoint> {
    validate_inputs(dp, gp)?;
    let dp = &DataParams {
        mu: dp.effective_mu(),
        ..*dp
    };
    let pool = make_pool(cfg.workers);
    let pool = pool.as_ref();
    let mut theta = match cfg.init {
        Init::Preset => derive_hats(preset_theta(), mc, dp, gp, pool)?,
        Init::Theta(t) => derive_hats(t, mc, dp, gp, pool)?,
        Init::Full(t) => t,
    };
    let mut any_floor = false;
    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let (mut next, flag) = update(&theta, mc, dp, gp, pool)?;
        any_floor |= flag;
        if cfg.damping > 0.0 {
            let a = next.to_array();
            let b = theta.to_array();
            next = OrderParams::from_array(std::array::from_fn(|k| {
                (1.0 - cfg.damping) * a[k] + cfg.damping * b[k]
            }));
        }
        residual = next.theta_distance(&theta);
        theta = next;
        if residual <= cfg.tol {
            return Ok(FixedPoint {
                theta,
                iterations: it,
                residual,
                converged: true,
                floored: any_floor,
            });
        }
    }
    Ok(FixedPoint {
        theta,
        iterations: cfg.max_iter,
        residual,
        converged: false,
        floored: any_floor,
    })
}

/// Train/test losses and accuracies at a fixed point.
pub fn observables(
    fp: &FixedPoint,
    mc: &McSampleSet,
    dp: &DataParams,
    gp: &GcnParams,
) -> Result<Metrics> {
    observables_with(fp, mc, dp, gp, None)
}

pub(crate) fn observables_with(
    fp: &FixedPoint,
    mc: &McSampleSet,
    dp: &DataParams,
    gp: &GcnParams,
    pool: Option<&rayon::ThreadPool>,
) -> Result<Metrics> {
    let theta = &fp.theta;
    let ch = OutChannel::new(theta, gp.c, dp.lambda, dp.effective_mu())?;
    let glm = match dp.model {
        Model::GlmSbm => Some(GlmLaw::new(theta, dp.alpha)?),
        Model::Csbm => None,
    };
    let loss = gp.loss;
    let failure = std::sync::Mutex::new(None::<Error>);
    let one = |acc: &mut [f64; 4], w: f64, y: f64, xi: f64, zeta: f64, chi: f64| -> Result<()> {
        let s = ch.solve(loss, y, xi, zeta, chi)?;
        acc[0] += w * loss.eval(y * s.h1);
        acc[1] += w * loss.eval(y * s.h0);
        acc[2] += w * f64::from(u8::from(crate::sign(s.h1) == y));
        acc[3] += w * f64::from(u8::from(crate::sign(s.h0) == y));
        Ok(())
    };
    let sums = chunked_sums::<4, _>(mc.len(), pool, |range, acc| {
        for i in range {
            let (xi, zeta, chi) = (mc.xi[i], mc.zeta[i], mc.chi[i]);
            let res = match &glm {
                None => one(acc, 1.0, mc.label(i), xi, zeta, chi),
                Some(law) => {
                    let (pp, pm, _) = law.at(chi);
                    one(acc, pp, 1.0, xi, zeta, chi).and_then(|_| one(acc, pm, -1.0, xi, zeta, chi))
                }
            };
            if let Err(e) = res {
                failure.lock().unwrap().get_or_insert(e);
                return;
            }
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let n = mc.len() as f64;
    Ok(Metrics {
        e_train: sums[0] / n,
        e_test: sums[1] / n,
        acc_train: sums[2] / n,
        acc_test: sums[3] / n,
    })
}

/// Solve and evaluate in one call.
pub fn predict(dp: &DataParams, gp: &GcnParams, cfg: &SolveConfig) -> Result<(FixedPoint, Metrics)> {
    cfg.validate()?;
    let mc = sample_mc(cfg.mc_count, cfg.seed);
    predict_with_samples(dp, gp, cfg, &mc)
}

pub fn predict_with_samples(
    dp: &DataParams,
    gp: &GcnParams,
    cfg: &SolveConfig,
    mc: &McSampleSet,
) -> Result<(FixedPoint, Metrics)> {
    let fp = solve_with_samples(dp, gp, cfg, mc)?;
    let pool = make_pool(cfg.workers);
    let m = observables_with(&fp, mc, dp, gp, pool.as_ref())?;
    Ok((fp, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> SolveConfig {
        SolveConfig {
            mc_count: n,
            seed: 3,
            ..SolveConfig::default()
        }
    }

    #[test]
    fn zero_signal_keeps_m_zero() {
        let mc = sample_mc(20_000, 1);
        let dp = DataParams::csbm(2.0, 0.0, 0.0, 0.3);
        let gp = GcnParams::new(LossKind::Logistic, 1.0, 0.5);
        let mut t = preset_theta();
        t.m_w = 0.0;
        t.m_sigma = 0.0;
        t.mhat_w = 0.0;
        t.mhat_sigma = 0.0;
        let n = iterate_csbm(&t, &mc, &dp, &gp).unwrap();
        assert_eq!(n.m_w, 0.0);
        assert_eq!(n.mhat_w, 0.0);
        assert_eq!(n.mhat_sigma, 0.0);
        // m_σ is a Monte-Carlo average of a y-odd quantity.
        assert!(n.m_sigma.abs() < 0.05);
    }

    #[test]
    fn glm_zero_lambda_keeps_sigma_overlaps_zero() {
        let mc = sample_mc(20_000, 1);
        let dp = DataParams::glm_sbm(2.0, 0.0, 0.3);
        let gp = GcnParams::new(LossKind::Quadratic, 1.0, 0.5);
        let mut t = preset_theta();
        t.m_w = 0.0;
        t.m_sigma = 0.0;
        t.mhat_sigma = 0.0;
        let n = iterate_glmsbm(&t, &mc, &dp, &gp).unwrap();
        // With m_w = 0 the labels are fair coins independent of the noise, so the
        // y-odd overlaps vanish up to Monte-Carlo error.
        assert!(n.m_sigma.abs() < 0.05, "{}", n.m_sigma);
        assert!(n.mhat_sigma.abs() < 0.05, "{}", n.mhat_sigma);
    }

    #[test]
    fn glm_rejects_eta_at_least_one() {
        let mc = sample_mc(2_000, 1);
        let dp = DataParams::glm_sbm(2.0, 1.0, 0.3);
        let gp = GcnParams::new(LossKind::Quadratic, 1.0, 0.5);
        let mut t = preset_theta();
        t.m_w = 1.0;
        t.q_w = 1.0;
        assert!(matches!(
            iterate_glmsbm(&t, &mc, &dp, &gp),
            Err(Error::DegenerateOverlap { .. })
        ));
    }

    #[test]
    fn deterministic_solve() {
        let dp = DataParams::csbm(4.0, 0.5, 1.0, 0.1);
        let gp = GcnParams::new(LossKind::Hinge, 1.0, 1.0);
        let a = solve(&dp, &gp, &cfg(5_000)).unwrap();
        let b = solve(&dp, &gp, &cfg(5_000)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let dp = DataParams::csbm(4.0, 0.5, 1.0, 0.1);
        let gp = GcnParams::new(LossKind::Hinge, 1.0, 1.0);
        let mut c = cfg(5_000);
        c.tol = 0.0;
        assert!(solve(&dp, &gp, &c).is_err());
        c.tol = 1e-8;
        c.mc_count = 10;
        assert!(solve(&dp, &gp, &c).is_err());
    }
}
