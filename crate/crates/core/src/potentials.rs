//! Scalar extremizers of the weight potential `ψ_w` and the output potential
//! `ψ_out`, evaluated once per Monte-Carlo sample in every fixed-point sweep.
//!
//! `ψ_out(h, σ)` is quadratic in `σ` for fixed `h`, so `σ` is eliminated in
//! closed form. With
//!
//! ```text
//! B = ξ√Q̂_σ + y m̂_σ      a = λ y m_σ + √Q_σ ζ      b = √μ y m_w + √Q_w χ
//! P = V̂_σ + 1/V_w        K = P + c²/V_σ
//! ```
//!
//! the unrevealed maximizer is `σ' = (B + b/V_w)/P`, `h' = cσ' + a`, and the
//! revealed one solves a one-dimensional proximal problem centred at `h'` with
//! variance `V_σ + c²/P`, after which `σ* = σ' + c (h* − h') / (V_σ K)`.

use crate::error::{Error, Result};
use crate::loss::{sigmoid, LossKind};
use crate::params::OrderParams;

/// `argmax_w −r w²/2 − V̂_w w²/2 + field·w`.
pub fn argmax_w(r: f64, vhat_w: f64, field: f64) -> Result<f64> {
    let curvature = r + vhat_w;
    if !(curvature > 0.0) {
        return Err(Error::DegeneratePotential { curvature });
    }
    Ok(field / curvature)
}

const NEWTON_MAX_ITER: usize = 100;

/// `argmax_h −t̄ l(y h) − (h − mean)² / (2 var)`.
pub fn prox_loss(loss: LossKind, y: f64, mean: f64, var: f64, t_bar: bool) -> Result<f64> {
    if !(var > 0.0) {
        return Err(Error::DegeneratePotential { curvature: var });
    }
    if !t_bar {
        return Ok(mean);
    }
    // Work with the margin s = y h; y² = 1.
    let s0 = y * mean;
    let s = match loss {
        LossKind::Quadratic => (s0 + var) / (1.0 + var),
        LossKind::Hinge => {
            if s0 >= 1.0 {
                s0
            } else if s0 + var < 1.0 {
                s0 + var
            } else {
                1.0
            }
        }
        LossKind::Logistic => logistic_margin(s0, var)?,
    };
    Ok(y * s)
}

/// Root of `σ(−s) = (s − s0)/v`, which lies in `[s0, s0 + v]`.
fn logistic_margin(s0: f64, v: f64) -> Result<f64> {
    let (mut lo, mut hi) = (s0, s0 + v);
    let mut s = s0;
    let mut step = f64::INFINITY;
    let mut prev_step = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let p = sigmoid(-s);
        let g = p - (s - s0) / v;
        if g == 0.0 {
            return Ok(s);
        }
        if g > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let dg = -p * (1.0 - p) - 1.0 / v;
        let mut next = s - g / dg;
        // Bisect when Newton leaves the bracket or fails to halve the step
        // before last; otherwise it can cycle across the inflection point.
        if !(next >= lo && next <= hi) || 2.0 * (next - s).abs() > prev_step.abs() {
            next = 0.5 * (lo + hi);
        }
        prev_step = step;
        step = next - s;
        s = next;
        if step.abs() <= 1e-12 * s.abs().max(1.0) || hi - lo <= 4.0 * f64::EPSILON * s.abs().max(1.0) {
            return Ok(s);
        }
    }
    Err(Error::NewtonNonConvergence {
        iterations: NEWTON_MAX_ITER,
        last_step: step,
        mean: s0,
        var: v,
    })
}

/// One sample's worth of inputs to `ψ_out`.
#[derive(Debug, Clone, Copy)]
pub struct OutChannelInput {
    pub y: f64,
    pub xi: f64,
    pub zeta: f64,
    pub chi: f64,
    pub theta: OrderParams,
    pub c: f64,
    pub lambda: f64,
    pub mu: f64,
    pub t_bar: bool,
}

/// Sample-independent coefficients of the eliminated output problem.
#[derive(Debug, Clone, Copy)]
pub struct OutChannel {
    pub c: f64,
    pub lambda: f64,
    pub sqrt_mu: f64,
    pub m_w: f64,
    pub m_sigma: f64,
    pub sqrt_qw: f64,
    pub sqrt_qs: f64,
    pub sqrt_qhs: f64,
    pub mhat_sigma: f64,
    pub v_w: f64,
    pub v_sigma: f64,
    /// `V̂_σ + 1/V_w`
    pub p: f64,
    /// Variance of the one-dimensional problem in `h`.
    pub v_eff: f64,
    /// `c / (V_σ K)`
    pub slope: f64,
}

/// Per-sample solution for both values of `t̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutSolution {
    pub h1: f64,
    pub s1: f64,
    pub h0: f64,
    pub s0: f64,
    /// `λ y m_σ + √Q_σ ζ`
    pub a: f64,
    /// `√μ y m_w + √Q_w χ`
    pub b: f64,
}

impl OutChannel {
    pub fn new(theta: &OrderParams, c: f64, lambda: f64, mu: f64) -> Result<Self> {
        if !(theta.v_w > 0.0) {
            return Err(Error::DegeneratePotential { curvature: theta.v_w });
        }
        if !(theta.v_sigma > 0.0) {
            return Err(Error::DegeneratePotential {
                curvature: theta.v_sigma,
            });
        }
        let p = theta.vhat_sigma + 1.0 / theta.v_w;
        if !(p > 0.0) {
            return Err(Error::DegeneratePotential { curvature: p });
        }
        let k = p + c * c / theta.v_sigma;
        Ok(Self {
            c,
            lambda,
            sqrt_mu: mu.max(0.0).sqrt(),
            m_w: theta.m_w,
            m_sigma: theta.m_sigma,
            sqrt_qw: theta.q_w.max(0.0).sqrt(),
            sqrt_qs: theta.q_sigma.max(0.0).sqrt(),
            sqrt_qhs: theta.qhat_sigma.max(0.0).sqrt(),
            mhat_sigma: theta.mhat_sigma,
            v_w: theta.v_w,
            v_sigma: theta.v_sigma,
            p,
            v_eff: theta.v_sigma + c * c / p,
            slope: c / (theta.v_sigma * k),
        })
    }

    /// Both maximizers (`t̄ = 1` and `t̄ = 0`) for one draw.
    #[inline]
    pub fn solve(&self, loss: LossKind, y: f64, xi: f64, zeta: f64, chi: f64) -> Result<OutSolution> {
        let bfield = xi * self.sqrt_qhs + y * self.mhat_sigma;
        let a = self.lambda * y * self.m_sigma + self.sqrt_qs * zeta;
        let b = self.sqrt_mu * y * self.m_w + self.sqrt_qw * chi;
        let s0 = (bfield + b / self.v_w) / self.p;
        let h0 = self.c * s0 + a;
        let h1 = prox_loss(loss, y, h0, self.v_eff, true)?;
        let s1 = s0 + self.slope * (h1 - h0);
        Ok(OutSolution { h1, s1, h0, s0, a, b })
    }
}

/// Joint maximizer `(h*, σ*)` of `ψ_out` for the given revealed flag.
pub fn argmax_out(input: &OutChannelInput, loss: LossKind) -> Result<(f64, f64)> {
    let ch = OutChannel::new(&input.theta, input.c, input.lambda, input.mu)?;
    let s = ch.solve(loss, input.y, input.xi, input.zeta, input.chi)?;
    Ok(if input.t_bar { (s.h1, s.s1) } else { (s.h0, s.s0) })
}

/// `ψ_out(h, σ)` up to additive constants.
pub fn psi_out(input: &OutChannelInput, loss: LossKind, h: f64, sigma: f64) -> f64 {
    let t = &input.theta;
    let (a, b, bf) = fields(input);
    let lt = if input.t_bar { loss.eval(input.y * h) } else { 0.0 };
    -lt - 0.5 * t.vhat_sigma * sigma * sigma + bf * sigma
        - (h - input.c * sigma - a).powi(2) / (2.0 * t.v_sigma)
        - (sigma - b).powi(2) / (2.0 * t.v_w)
}

/// Gradient of `ψ_out`; for the hinge at the kink the returned `∂_h` is the
/// interval `[lo, hi]` of the superdifferential.
pub fn grad_psi_out(input: &OutChannelInput, loss: LossKind, h: f64, sigma: f64) -> ((f64, f64), f64) {
    let t = &input.theta;
    let (a, b, bf) = fields(input);
    let r = (h - input.c * sigma - a) / t.v_sigma;
    let gs = -t.vhat_sigma * sigma + bf + input.c * r - (sigma - b) / t.v_w;
    if !input.t_bar {
        return ((-r, -r), gs);
    }
    let y = input.y;
    let s = y * h;
    let (dlo, dhi) = match loss {
        LossKind::Hinge if (s - 1.0).abs() <= 1e-12 => (-1.0, 0.0),
        _ => (loss.derivative(s), loss.derivative(s)),
    };
    // ∂_h of −l(y h) is −y l'(y h); collect both ends of the interval.
    let e1 = -y * dlo - r;
    let e2 = -y * dhi - r;
    ((e1.min(e2), e1.max(e2)), gs)
}

fn fields(input: &OutChannelInput) -> (f64, f64, f64) {
    let t = &input.theta;
    let a = input.lambda * input.y * t.m_sigma + t.q_sigma.max(0.0).sqrt() * input.zeta;
    let b = input.mu.max(0.0).sqrt() * input.y * t.m_w + t.q_w.max(0.0).sqrt() * input.chi;
    let bf = input.xi * t.qhat_sigma.max(0.0).sqrt() + input.y * t.mhat_sigma;
    (a, b, bf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_theta() -> OrderParams {
        OrderParams {
            m_w: 0.3,
            m_sigma: 0.2,
            q_w: 0.8,
            q_sigma: 0.5,
            v_w: 0.7,
            v_sigma: 1.3,
            mhat_w: 0.1,
            mhat_sigma: 0.4,
            qhat_w: 0.3,
            qhat_sigma: 0.6,
            vhat_w: 0.5,
            vhat_sigma: 0.9,
        }
    }

    #[test]
    fn logistic_margin_wide_variance() {
        for (s0, v) in [(-14.174993918419796, 18.560698371691995), (14.17, 18.56), (-40.0, 60.0), (0.0, 1e4)] {
            let s = logistic_margin(s0, v).unwrap();
            assert!((sigmoid(-s) - (s - s0) / v).abs() <= 1e-12, "{s0} {v}");
        }
    }

    #[test]
    fn argmax_w_examples() {
        assert_eq!(argmax_w(1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(argmax_w(1.0, 1.0, 1.0).unwrap(), 0.5);
        assert!((argmax_w(1e3, 0.0, 1.0).unwrap() - 1e-3).abs() < 1e-18);
        assert!(matches!(
            argmax_w(1.0, -1.0, 1.0),
            Err(Error::DegeneratePotential { .. })
        ));
    }

    #[test]
    fn prox_examples() {
        for l in LossKind::ALL {
            assert_eq!(prox_loss(l, 1.0, 0.3, 2.0, false).unwrap(), 0.3);
        }
        assert!((prox_loss(LossKind::Quadratic, 1.0, 0.0, 1.0, true).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(prox_loss(LossKind::Hinge, 1.0, 2.0, 1.0, true).unwrap(), 2.0);
        assert_eq!(prox_loss(LossKind::Hinge, 1.0, 0.5, 1.0, true).unwrap(), 1.0);
        assert_eq!(prox_loss(LossKind::Hinge, -1.0, 0.5, 0.25, true).unwrap(), 0.25);
    }

    #[test]
    fn logistic_prox_is_stationary() {
        for &(y, m, v) in &[(1.0, -30.0, 0.01), (-1.0, 3.0, 50.0), (1.0, 0.0, 1.0), (1.0, 40.0, 1e3)] {
            let h = prox_loss(LossKind::Logistic, y, m, v, true).unwrap();
            let s = y * h;
            let g = sigmoid(-s) - (s - y * m) / v;
            assert!(g.abs() < 1e-10, "{y} {m} {v}: {g}");
        }
    }

    #[test]
    fn symmetric_zero_input() {
        let mut theta = base_theta();
        theta.m_sigma = 0.0;
        theta.m_w = 0.0;
        theta.mhat_sigma = 0.0;
        theta.qhat_sigma = 0.0;
        let input = OutChannelInput {
            y: 1.0,
            xi: 0.0,
            zeta: 0.0,
            chi: 0.0,
            theta,
            c: 0.7,
            lambda: 1.0,
            mu: 2.0,
            t_bar: false,
        };
        assert_eq!(argmax_out(&input, LossKind::Logistic).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn elimination_coefficients_match_numerical_derivatives() {
        let theta = base_theta();
        for loss in LossKind::ALL {
            for t_bar in [false, true] {
                let input = OutChannelInput {
                    y: -1.0,
                    xi: 0.4,
                    zeta: -1.1,
                    chi: 0.8,
                    theta,
                    c: 1.7,
                    lambda: 0.9,
                    mu: 1.5,
                    t_bar,
                };
                let (h, s) = argmax_out(&input, loss).unwrap();
                let e = 1e-6;
                let dh = (psi_out(&input, loss, h + e, s) - psi_out(&input, loss, h - e, s)) / (2.0 * e);
                let ds = (psi_out(&input, loss, h, s + e) - psi_out(&input, loss, h, s - e)) / (2.0 * e);
                assert!(ds.abs() < 1e-7, "{loss:?} {t_bar} ds {ds}");
                if loss != LossKind::Hinge || (input.y * h - 1.0).abs() > 1e-6 {
                    assert!(dh.abs() < 1e-7, "{loss:?} {t_bar} dh {dh}");
                }
            }
        }
    }
}
