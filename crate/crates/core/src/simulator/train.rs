//! Convex ERM for the single-layer GCN.
//!
//! With `Z` the rows `z_i = (1/n)(Q(Ã) X)_i` of the training nodes, the
//! objective is `(1/|R|) [Σ_i l(y_i z_i·w) + (r/2)‖w‖²]`. Every solver returns
//! `w` together with the sup-norm of a (sub)gradient of that objective, and
//! fails with [`Error::TrainNotConverged`] when the norm stays above the
//! tolerance.
//!
//! Solvers picked by [`StepRule::Auto`]:
//!
//! - quadratic: normal equations (kernel form when `|R| ≤ M`), plus
//!   iterative refinement;
//! - logistic: damped Newton, in the kernel when `|R| ≤ M`;
//! - hinge: dual coordinate ascent with `w` kept in primal form.

use std::cell::OnceCell;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use ndarray_linalg::{CholeskyFactorized, FactorizeC, LUFactorized, SolveC, UPLO};
use ndarray_linalg::{Factorize, Solve};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::params::GcnParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    /// Per-loss second-order or exact method.
    Auto,
    /// Direct solve of the normal equations; quadratic loss only.
    ExactRidge,
    /// Accelerated gradient with backtracking; smoothed then polished for the hinge.
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub grad_tol: f64,
    pub max_steps: usize,
    pub step_rule: StepRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_steps: 100_000,
            step_rule: StepRule::Auto,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "grad_tol",
                value: self.grad_tol,
                reason: "must be positive",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub w: Array1<f64>,
    /// Sup-norm of the certified (sub)gradient at `w`.
    pub grad_norm: f64,
    pub steps: usize,
}

/// Hinge margins within this distance of 1 count as sitting on the kink.
pub const KINK_TOL: f64 = 1e-9;

/// Training rows of `(1/n) Ã X` and `X`, reusable across `c`, `r` and losses.
#[derive(Debug, Clone)]
pub struct TrainingProblem {
    pub prop: Array2<f64>,
    pub feats: Array2<f64>,
    pub y: Array1<f64>,
    pub n: usize,
}

impl TrainingProblem {
    pub fn new(ds: &Dataset, rows: &[usize]) -> Self {
        let mut prop = ds.adjacency_rows_times(rows);
        prop.mapv_inplace(|v| v / ds.n as f64);
        Self {
            prop,
            feats: ds.features.select(Axis(0), rows),
            y: ds.labels.select(Axis(0), rows),
            n: ds.n,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// The problem restricted to its first `k` rows.
    pub fn prefix(&self, k: usize) -> Self {
        let k = k.min(self.len());
        Self {
            prop: self.prop.slice(ndarray::s![..k, ..]).to_owned(),
            feats: self.feats.slice(ndarray::s![..k, ..]).to_owned(),
            y: self.y.slice(ndarray::s![..k]).to_owned(),
            n: self.n,
        }
    }

    /// Design matrix `Z = prop + (c/√n) feats`.
    pub fn design(&self, c: f64) -> Design {
        let mut z = self.prop.clone();
        if c != 0.0 {
            z.scaled_add(c / (self.n as f64).sqrt(), &self.feats);
        }
        Design::new(z, self.y.clone())
    }
}

/// A fixed design `Z` with labels; the Gram matrix is built on first use.
#[derive(Debug, Clone)]
pub struct Design {
    pub z: Array2<f64>,
    pub y: Array1<f64>,
    gram: OnceCell<Array2<f64>>,
}

enum Factor {
    Chol(CholeskyFactorized<ndarray::OwnedRepr<f64>>),
    Lu(LUFactorized<ndarray::OwnedRepr<f64>>),
}

impl Factor {
    /// Cholesky, or LU when rounding makes the matrix look indefinite.
    fn new(a: &Array2<f64>) -> Result<Self> {
        match a.factorizec(UPLO::Lower) {
            Ok(f) => Ok(Factor::Chol(f)),
            Err(_) => a
                .factorize()
                .map(Factor::Lu)
                .map_err(|e| Error::LinearAlgebra(e.to_string())),
        }
    }

    fn solve(&self, b: &Array1<f64>) -> Result<Array1<f64>> {
        match self {
            Factor::Chol(f) => f.solvec(b),
            Factor::Lu(f) => f.solve(b),
        }
        .map_err(|e| Error::LinearAlgebra(e.to_string()))
    }
}

fn sup_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

fn add_diag(a: &mut Array2<f64>, r: f64) {
    a.diag_mut().mapv_inplace(|v| v + r);
}

impl Design {
    pub fn new(z: Array2<f64>, y: Array1<f64>) -> Self {
        Self {
            z,
            y,
            gram: OnceCell::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.z.nrows()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    fn kernel_form(&self) -> bool {
        self.rows() <= self.dim()
    }

    /// `Z Zᵀ` in kernel form, `Zᵀ Z` otherwise.
    fn gram(&self) -> &Array2<f64> {
        self.gram.get_or_init(|| {
            if self.kernel_form() {
                self.z.dot(&self.z.t())
            } else {
                self.z.t().dot(&self.z)
            }
        })
    }

    fn margins(&self, w: ArrayView1<f64>) -> Array1<f64> {
        self.z.dot(&w) * &self.y
    }

    pub fn objective(&self, loss: LossKind, r: f64, w: ArrayView1<f64>) -> f64 {
        let data: f64 = self.margins(w).iter().map(|&m| loss.eval(m)).sum();
        (data + 0.5 * r * w.dot(&w)) / self.rows() as f64
    }

    /// Gradient of the objective; the hinge uses its left derivative.
    pub fn gradient(&self, loss: LossKind, r: f64, w: ArrayView1<f64>) -> Array1<f64> {
        let coef = self.margins(w).mapv(|m| loss.derivative(m)) * &self.y;
        let mut g = self.z.t().dot(&coef);
        g.scaled_add(r, &w);
        g / self.rows() as f64
    }

    /// Hinge subgradient built from dual weights `a`: points off the kink get
    /// their forced weight, points on it keep `a_i`.
    pub fn hinge_subgradient(&self, r: f64, w: ArrayView1<f64>, a: ArrayView1<f64>) -> Array1<f64> {
        let coef: Array1<f64> = self
            .margins(w)
            .iter()
            .zip(a.iter())
            .zip(self.y.iter())
            .map(|((&m, &ai), &yi)| {
                let weight = if (m - 1.0).abs() <= KINK_TOL {
                    ai.clamp(0.0, 1.0)
                } else if m < 1.0 {
                    1.0
                } else {
                    0.0
                };
                -weight * yi
            })
            .collect();
        let mut g = self.z.t().dot(&coef);
        g.scaled_add(r, &w);
        g / self.rows() as f64
    }

    pub fn train(&self, loss: LossKind, r: f64, tc: &TrainConfig) -> Result<TrainResult> {
        tc.validate()?;
        if !(r > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                value: r,
                reason: "training needs a positive ridge",
            });
        }
        match (tc.step_rule, loss) {
            (StepRule::Auto | StepRule::ExactRidge, LossKind::Quadratic) => self.ridge(r, tc),
            (StepRule::ExactRidge, _) => Err(Error::Unsupported(format!(
                "the exact ridge solve only applies to the quadratic loss, not {}",
                loss.name()
            ))),
            (StepRule::Auto, LossKind::Logistic) => {
                if self.kernel_form() {
                    self.kernel_newton(r, tc)
                } else {
                    self.primal_newton(r, tc)
                }
            }
            (StepRule::Auto, LossKind::Hinge) => {
                self.dual_cd(r, tc, Array1::zeros(self.rows()), 0)
            }
            (StepRule::FirstOrder, LossKind::Hinge) => {
                let smooth = self.fista(Smoothed::Huber(1e-4), r, tc, 1e-8)?;
                let a = self
                    .margins(smooth.w.view())
                    .mapv(|m| -Smoothed::Huber(1e-4).derivative(m));
                self.dual_cd(r, tc, a, smooth.steps)
            }
            (StepRule::FirstOrder, _) => self.fista(Smoothed::Exact(loss), r, tc, tc.grad_tol),
        }
    }

    fn ridge(&self, r: f64, tc: &TrainConfig) -> Result<TrainResult> {
        let k = self.rows() as f64;
        let mut h = self.gram().clone();
        add_diag(&mut h, r);
        let f = Factor::new(&h)?;
        // Solves (ZᵀZ + rI) x = g in either form.
        let apply_inv = |g: &Array1<f64>| -> Result<Array1<f64>> {
            if self.kernel_form() {
                let t = f.solve(&self.z.dot(g))?;
                Ok((g - &self.z.t().dot(&t)) / r)
            } else {
                f.solve(g)
            }
        };
        let mut w = if self.kernel_form() {
            self.z.t().dot(&f.solve(&self.y)?)
        } else {
            f.solve(&self.z.t().dot(&self.y))?
        };
        let mut steps = 1;
        loop {
            let g = self.gradient(LossKind::Quadratic, r, w.view());
            let norm = sup_norm(&g);
            if norm <= tc.grad_tol {
                return Ok(TrainResult { w, grad_norm: norm, steps });
            }
            if steps >= 8.min(tc.max_steps.max(1)) {
                return Err(Error::TrainNotConverged { steps, grad_norm: norm });
            }
            w -= &apply_inv(&(g * k))?;
            steps += 1;
        }
    }

    fn kernel_newton(&self, r: f64, tc: &TrainConfig) -> Result<TrainResult> {
        let loss = LossKind::Logistic;
        let kmat = self.gram();
        let n = self.rows();
        let y = &self.y;
        let j = |beta: &Array1<f64>, f: &Array1<f64>| -> f64 {
            let data: f64 = f.iter().zip(y).map(|(&fi, &yi)| loss.eval(yi * fi)).sum();
            data + 0.5 * r * beta.dot(f)
        };
        let mut beta = Array1::<f64>::zeros(n);
        let mut last = f64::INFINITY;
        for step in 0..tc.max_steps.max(1) {
            let w = self.z.t().dot(&beta);
            let norm = sup_norm(&self.gradient(loss, r, w.view()));
            last = norm;
            if norm <= tc.grad_tol {
                return Ok(TrainResult { w, grad_norm: norm, steps: step });
            }
            // Margins of the current iterate; updating them incrementally
            // drifts from `Z w` and stalls the gradient test.
            let f = self.z.dot(&w);
            let mut g = Array1::<f64>::zeros(n);
            let mut s = Array1::<f64>::zeros(n);
            for i in 0..n {
                let m = y[i] * f[i];
                g[i] = r * beta[i] + y[i] * loss.derivative(m);
                s[i] = loss.second_derivative(m).sqrt();
            }
            // Δ = −(1/r)[G − S (rI + SKS)⁻¹ S K G]
            let kg = kmat.dot(&g);
            let mut m = kmat.clone();
            for ((i, jj), v) in m.indexed_iter_mut() {
                *v *= s[i] * s[jj];
            }
            add_diag(&mut m, r);
            let inner = Factor::new(&m)?.solve(&(&s * &kg))?;
            let delta = -(&g - &(&s * &inner)) / r;
            let kd = kmat.dot(&delta);
            let slope = kg.dot(&delta);
            let j0 = j(&beta, &f);
            let mut t = 1.0;
            loop {
                let fb = &f + &(t * &kd);
                let bb = &beta + &(t * &delta);
                if j(&bb, &fb) <= j0 + 1e-4 * t * slope {
                    beta = bb;
                    break;
                }
                t *= 0.5;
                if t < 1e-12 || !(slope < 0.0) {
                    return Err(Error::TrainNotConverged { steps: step + 1, grad_norm: norm });
                }
            }
        }
        Err(Error::TrainNotConverged {
            steps: tc.max_steps,
            grad_norm: last,
        })
    }

    fn primal_newton(&self, r: f64, tc: &TrainConfig) -> Result<TrainResult> {
        let loss = LossKind::Logistic;
        let mut w = Array1::<f64>::zeros(self.dim());
        let mut last = f64::INFINITY;
        for step in 0..tc.max_steps.max(1) {
            let g = self.gradient(loss, r, w.view());
            last = sup_norm(&g);
            if last <= tc.grad_tol {
                return Ok(TrainResult { w, grad_norm: last, steps: step });
            }
            let d = self.margins(w.view()).mapv(|m| loss.second_derivative(m));
            let mut dz = self.z.clone();
            for (mut row, &di) in dz.axis_iter_mut(Axis(0)).zip(d.iter()) {
                row *= di;
            }
            let mut h = self.z.t().dot(&dz);
            add_diag(&mut h, r);
            let dir = -Factor::new(&h)?.solve(&(&g * self.rows() as f64))?;
            let f0 = self.objective(loss, r, w.view());
            let slope = g.dot(&dir);
            let mut t = 1.0;
            loop {
                let cand = &w + &(t * &dir);
                if self.objective(loss, r, cand.view()) <= f0 + 1e-4 * t * slope || t < 1e-12 {
                    w = cand;
                    break;
                }
                t *= 0.5;
            }
        }
        Err(Error::TrainNotConverged {
            steps: tc.max_steps,
            grad_norm: last,
        })
    }

    /// Dual coordinate ascent for the hinge, warm-started at `a`.
    fn dual_cd(&self, r: f64, tc: &TrainConfig, a: Array1<f64>, prior_steps: usize) -> Result<TrainResult> {
        let n = self.rows();
        let mut a = a.mapv(|v| v.clamp(0.0, 1.0));
        let qii: Vec<f64> = self.z.axis_iter(Axis(0)).map(|z| z.dot(&z) / r).collect();
        let rebuild = |a: &Array1<f64>| self.z.t().dot(&(a * &self.y)) / r;
        let mut w = rebuild(&a);
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut last = f64::INFINITY;
        for epoch in 0..tc.max_steps.max(1) {
            order.shuffle(&mut rng);
            let mut pg_max = f64::NEG_INFINITY;
            let mut pg_min = f64::INFINITY;
            for &i in &order {
                let zi = self.z.row(i);
                let g = self.y[i] * zi.dot(&w) - 1.0;
                let pg = if a[i] <= 0.0 {
                    g.min(0.0)
                } else if a[i] >= 1.0 {
                    g.max(0.0)
                } else {
                    g
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg != 0.0 && qii[i] > 0.0 {
                    let old = a[i];
                    a[i] = (old - g / qii[i]).clamp(0.0, 1.0);
                    w.scaled_add((a[i] - old) * self.y[i] / r, &zi);
                }
            }
            if pg_max - pg_min <= 0.1 * KINK_TOL || epoch % 50 == 49 {
                w = rebuild(&a);
                let cert = sup_norm(&self.hinge_subgradient(r, w.view(), a.view()));
                last = cert;
                if cert <= tc.grad_tol {
                    return Ok(TrainResult {
                        w,
                        grad_norm: cert,
                        steps: prior_steps + epoch + 1,
                    });
                }
            }
        }
        Err(Error::TrainNotConverged {
            steps: prior_steps + tc.max_steps,
            grad_norm: last,
        })
    }

    /// Accelerated gradient with a local-Lipschitz backtracking test and
    /// gradient-based momentum restart.
    fn fista(&self, loss: Smoothed, r: f64, tc: &TrainConfig, tol: f64) -> Result<TrainResult> {
        let grad = |w: &Array1<f64>| {
            let coef = self.margins(w.view()).mapv(|m| loss.derivative(m)) * &self.y;
            let mut g = self.z.t().dot(&coef);
            g.scaled_add(r, w);
            g / self.rows() as f64
        };
        let mut w = Array1::<f64>::zeros(self.dim());
        let mut x = w.clone();
        let mut gx = grad(&x);
        let mut lip = 1.0;
        let mut t = 1.0f64;
        let mut last = sup_norm(&gx);
        for step in 0..tc.max_steps.max(1) {
            if last <= tol {
                return Ok(TrainResult {
                    w: x,
                    grad_norm: last,
                    steps: step,
                });
            }
            let (w_new, g_new) = loop {
                let cand = &x - &(&gx / lip);
                let gc = grad(&cand);
                let dx = &cand - &x;
                let dg = &gc - &gx;
                let lhs = dg.dot(&dg).sqrt();
                let rhs = lip * dx.dot(&dx).sqrt();
                if lhs <= rhs * (1.0 + 1e-12) || rhs == 0.0 {
                    break (cand, gc);
                }
                lip *= 2.0;
            };
            let g_at_w = g_new;
            if sup_norm(&g_at_w) <= tol {
                return Ok(TrainResult {
                    grad_norm: sup_norm(&g_at_w),
                    w: w_new,
                    steps: step + 1,
                });
            }
            let restart = (&x - &w_new).dot(&(&w_new - &w)) > 0.0;
            let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
            let beta = if restart { 0.0 } else { (t - 1.0) / t_next };
            x = &w_new + &(beta * (&w_new - &w));
            w = w_new;
            t = t_next;
            gx = if beta == 0.0 { g_at_w } else { grad(&x) };
            last = sup_norm(&gx);
            lip *= 0.9;
        }
        Err(Error::TrainNotConverged {
            steps: tc.max_steps,
            grad_norm: last,
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Smoothed {
    Exact(LossKind),
    /// Hinge with a quadratic corner of the given width.
    Huber(f64),
}

impl Smoothed {
    fn derivative(self, m: f64) -> f64 {
        match self {
            Smoothed::Exact(l) => l.derivative(m),
            Smoothed::Huber(delta) => {
                if m >= 1.0 {
                    0.0
                } else if m > 1.0 - delta {
                    (m - 1.0) / delta
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Trains on `ds.train_mask` and returns the weights.
pub fn train_gcn(ds: &Dataset, gp: &GcnParams, tc: &TrainConfig) -> Result<Array1<f64>> {
    gp.validate()?;
    TrainingProblem::new(ds, &ds.train_mask)
        .design(gp.c)
        .train(gp.loss, gp.r, tc)
        .map(|t| t.w)
}
