//! Parameter and result types shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;

/// Generative model for the node labels and features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    /// Contextual SBM: Rademacher labels, `X = √(μ/N) y uᵀ + W`.
    Csbm,
    /// Neural-prior SBM: Gaussian `X`, `y = sign(X u / √N)`.
    GlmSbm,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Csbm => "csbm",
            Model::GlmSbm => "glm-sbm",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csbm" => Ok(Model::Csbm),
            "glm-sbm" | "glm_sbm" | "glmsbm" | "glm" => Ok(Model::GlmSbm),
            other => Err(format!("unknown model `{other}` (expected csbm or glm-sbm)")),
        }
    }
}

/// Knobs of the data model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataParams {
    pub model: Model,
    /// Aspect ratio `N / M`.
    pub alpha: f64,
    /// Graph signal-to-noise ratio.
    pub lambda: f64,
    /// Feature signal-to-noise ratio; always 0 for the GLM–SBM.
    pub mu: f64,
    /// Fraction of revealed (training) nodes.
    pub rho: f64,
    /// Fraction of test nodes.
    pub rho_test: f64,
    /// Average degree; only the simulator uses it.
    pub d: f64,
}

impl DataParams {
    pub fn csbm(alpha: f64, lambda: f64, mu: f64, rho: f64) -> Self {
        Self {
            model: Model::Csbm,
            alpha,
            lambda,
            mu,
            rho,
            rho_test: 1.0 - rho,
            d: 30.0,
        }
    }

    pub fn glm_sbm(alpha: f64, lambda: f64, rho: f64) -> Self {
        Self {
            model: Model::GlmSbm,
            alpha,
            lambda,
            mu: 0.0,
            rho,
            rho_test: 1.0 - rho,
            d: 30.0,
        }
    }

    pub fn new(model: Model, alpha: f64, lambda: f64, mu: f64, rho: f64) -> Self {
        match model {
            Model::Csbm => Self::csbm(alpha, lambda, mu, rho),
            Model::GlmSbm => Self::glm_sbm(alpha, lambda, rho),
        }
    }

    pub fn with_degree(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn with_rho_test(mut self, rho_test: f64) -> Self {
        self.rho_test = rho_test;
        self
    }

    /// Feature snr as seen by the equations (forced to 0 on the GLM–SBM).
    pub fn effective_mu(&self) -> f64 {
        match self.model {
            Model::Csbm => self.mu,
            Model::GlmSbm => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", self.alpha, "must be positive"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid("rho", self.rho, "must lie in (0, 1]"));
        }
        if !(self.rho_test >= 0.0 && self.rho + self.rho_test <= 1.0 + 1e-12) {
            return Err(invalid("rho_test", self.rho_test, "rho + rho_test must not exceed 1"));
        }
        if !(self.lambda.is_finite()) {
            return Err(invalid("lambda", self.lambda, "must be finite"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu", self.mu, "must be non-negative"));
        }
        if !(self.d > 0.0) {
            return Err(invalid("d", self.d, "must be positive"));
        }
        Ok(())
    }
}

/// Knobs of the learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    pub loss: LossKind,
    /// Strength of the l2 penalty `r Σ w²/2`.
    pub r: f64,
    /// Self-loop strength in `Ã + c√N I`.
    pub c: f64,
}

impl GcnParams {
    pub fn new(loss: LossKind, r: f64, c: f64) -> Self {
        Self { loss, r, c }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid("r", self.r, "regularization must be strictly positive"));
        }
        if !self.c.is_finite() {
            return Err(invalid("c", self.c, "must be finite"));
        }
        Ok(())
    }
}

/// The twelve summary statistics: the `Θ` block followed by the `Θ̂` block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrderParams {
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
    pub vhat_w: f64,
    pub vhat_sigma: f64,
}

impl OrderParams {
    pub const NAMES: [&'static str; 12] = [
        "m_w",
        "m_sigma",
        "Q_w",
        "Q_sigma",
        "V_w",
        "V_sigma",
        "mhat_w",
        "mhat_sigma",
        "Qhat_w",
        "Qhat_sigma",
        "Vhat_w",
        "Vhat_sigma",
    ];

    pub fn to_array(&self) -> [f64; 12] {
        [
            self.m_w,
            self.m_sigma,
            self.q_w,
            self.q_sigma,
            self.v_w,
            self.v_sigma,
            self.mhat_w,
            self.mhat_sigma,
            self.qhat_w,
            self.qhat_sigma,
            self.vhat_w,
            self.vhat_sigma,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        Self {
            m_w: a[0],
            m_sigma: a[1],
            q_w: a[2],
            q_sigma: a[3],
            v_w: a[4],
            v_sigma: a[5],
            mhat_w: a[6],
            mhat_sigma: a[7],
            qhat_w: a[8],
            qhat_sigma: a[9],
            vhat_w: a[10],
            vhat_sigma: a[11],
        }
    }

    /// Sup-norm distance restricted to the `Θ` block.
    pub fn theta_distance(&self, other: &Self) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        a[..6]
            .iter()
            .zip(&b[..6])
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// Sign and positivity constraints expected at an accepted fixed point.
    pub fn satisfies_fixed_point_invariants(&self) -> bool {
        self.q_w >= 0.0
            && self.q_sigma >= 0.0
            && self.v_w > 0.0
            && self.v_sigma > 0.0
            && self.qhat_w >= 0.0
            && self.qhat_sigma >= 0.0
    }

    /// `η_w = α m_w² / Q_w`, the normalized weight–teacher overlap of the GLM–SBM.
    pub fn eta_w(&self, alpha: f64) -> f64 {
        alpha * self.m_w * self.m_w / self.q_w
    }
}

/// Average losses and accuracies on the train and test sets.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub e_train: f64,
    pub e_test: f64,
    pub acc_train: f64,
    pub acc_test: f64,
}

/// Total signal-to-noise ratio; 1 is the detectability threshold at `ρ = 0`.
pub fn snr_total(p: &DataParams) -> f64 {
    let l2 = p.lambda * p.lambda;
    match p.model {
        Model::Csbm => l2 + p.mu * p.mu / p.alpha,
        Model::GlmSbm => l2 * (1.0 + 4.0 * p.alpha / (std::f64::consts::PI * std::f64::consts::PI)),
    }
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason,
    }
}
