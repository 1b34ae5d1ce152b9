//! Finite-N instances of both models, actual GCN training and measured metrics.
//!
//! ```no_run
//! use gcnsbm::{DataParams, GcnParams, LossKind};
//! use gcnsbm::simulator::{evaluate, gen_dataset, train_gcn, AdjacencyMode, TrainConfig};
//!
//! let dp = DataParams::csbm(4.0, 0.5, 1.0, 0.1).with_degree(30.0);
//! let ds = gen_dataset(&dp, 10_000, AdjacencyMode::Bernoulli, 7).unwrap();
//! let gp = GcnParams::new(LossKind::Logistic, 1.0, 1.0);
//! let w = train_gcn(&ds, &gp, &TrainConfig::default()).unwrap();
//! println!("{:?}", evaluate(&ds, &w, &gp));
//! ```

mod adjacency;
mod features;
mod io;
mod train;

pub use adjacency::{edge_probabilities, Adjacency, AdjacencyMode, BitMatrix};
pub use features::{
    gaussian_matrix, glm_labels, ingest_features, normalize_features, parse_matrix, read_matrix_csv,
    split_label_column,
};
pub use io::{export_dataset, import_dataset, read_bundle, write_bundle};
pub use train::{train_gcn, Design, StepRule, TrainConfig, TrainResult, TrainingProblem, KINK_TOL};

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{DataParams, GcnParams, Metrics, Model};
use crate::sign;

/// One graph with features, labels and train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub params: DataParams,
    pub n: usize,
    pub m_dim: usize,
    pub adjacency: Adjacency,
    /// Use `(Ã + Ãᵀ)/√2` instead of `Ã`.
    pub symmetrized: bool,
    pub features: Array2<f64>,
    pub labels: Array1<f64>,
    /// Hidden direction `u`; empty for ingested features.
    pub hidden_u: Array1<f64>,
    pub train_mask: Vec<usize>,
    pub test_mask: Vec<usize>,
    pub seed: u64,
}

/// Independent sub-seed number `k` of `seed`.
fn sub_seed(seed: u64, k: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 << 32 | k);
    rng.random()
}

/// Uniform split without replacement: a shuffled permutation cut into
/// `⌊ρ n⌋` train and the next `⌊ρ_test n⌋` test nodes. The same seed gives
/// nested train sets for increasing `ρ`.
pub fn masks(n: usize, rho: f64, rho_test: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((rho * n as f64).floor() as usize).min(n);
    let n_test = ((rho_test * n as f64 + 1e-9).floor() as usize).min(n - n_train);
    let test = perm[n_train..n_train + n_test].to_vec();
    perm.truncate(n_train);
    (perm, test)
}

/// Draws labels, features, graph and masks. Bernoulli graphs use `dp.d`.
pub fn gen_dataset(dp: &DataParams, n: usize, mode: AdjacencyMode, seed: u64) -> Result<Dataset> {
    dp.validate()?;
    check_size(n)?;
    let m_dim = ((n as f64 / dp.alpha).round() as usize).max(1);
    let u = features::gaussian_vector(m_dim, sub_seed(seed, 1));
    let mut x = gaussian_matrix(n, m_dim, sub_seed(seed, 2));
    let y = match dp.model {
        Model::Csbm => {
            let y = features::rademacher(n, sub_seed(seed, 0));
            features::add_csbm_spike(&mut x, y.view(), u.view(), dp.mu);
            y
        }
        Model::GlmSbm => glm_labels(x.view(), u.view()),
    };
    build(dp, x, y, u, mode, seed)
}

/// A dataset around user-supplied (already normalized) features and labels.
pub fn dataset_from_features(
    dp: &DataParams,
    features: Array2<f64>,
    labels: Array1<f64>,
    mode: AdjacencyMode,
    seed: u64,
) -> Result<Dataset> {
    dp.validate()?;
    check_size(features.nrows())?;
    if labels.len() != features.nrows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.nrows()
        )));
    }
    build(dp, features, labels, Array1::zeros(0), mode, seed)
}

fn check_size(n: usize) -> Result<()> {
    if n < 100 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "the simulator needs at least 100 nodes",
        });
    }
    Ok(())
}

fn build(dp: &DataParams, x: Array2<f64>, y: Array1<f64>, u: Array1<f64>, mode: AdjacencyMode, seed: u64) -> Result<Dataset> {
    let n = x.nrows();
    let adjacency = match mode {
        AdjacencyMode::Bernoulli => Adjacency::bernoulli(y.view(), dp.d, dp.lambda, sub_seed(seed, 3))?,
        AdjacencyMode::GaussianEquivalent => Adjacency::gaussian_equivalent(y.view(), dp.lambda, sub_seed(seed, 3)),
    };
    let (train_mask, test_mask) = masks(n, dp.rho, dp.rho_test, sub_seed(seed, 4));
    Ok(Dataset {
        params: *dp,
        n,
        m_dim: x.ncols(),
        adjacency,
        symmetrized: false,
        features: x,
        labels: y,
        hidden_u: u,
        train_mask,
        test_mask,
        seed,
    })
}

impl Dataset {
    pub fn adjacency_mode(&self) -> AdjacencyMode {
        self.adjacency.mode()
    }

    pub fn symmetrize(mut self) -> Self {
        self.symmetrized = true;
        self
    }

    /// The graph operator applied to `v`.
    pub fn adjacency_times(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let av = self.adjacency.matvec(v);
        if self.symmetrized {
            (av + self.adjacency.matvec_t(v)) / std::f64::consts::SQRT_2
        } else {
            av
        }
    }

    /// Rows `rows` of the graph operator times the features.
    pub fn adjacency_rows_times(&self, rows: &[usize]) -> Array2<f64> {
        let ax = self.adjacency.rows_times(rows, self.features.view(), false);
        if self.symmetrized {
            (ax + self.adjacency.rows_times(rows, self.features.view(), true)) / std::f64::consts::SQRT_2
        } else {
            ax
        }
    }
}

/// `h = (1/n)(Ã + c√n I) X w`, via two mat-vecs.
pub fn gcn_forward(ds: &Dataset, w: ArrayView1<f64>, c: f64) -> Array1<f64> {
    let xw = ds.features.dot(&w);
    let n = ds.n as f64;
    let mut h = ds.adjacency_times(xw.view()) / n;
    h.scaled_add(c / n.sqrt(), &xw);
    h
}

/// Loss and accuracy of the outputs `h` on the node sets `train` and `test`.
pub fn metrics_of(h: &Array1<f64>, labels: &Array1<f64>, gp: &GcnParams, train: &[usize], test: &[usize]) -> Metrics {
    let on = |rows: &[usize]| {
        if rows.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let mut loss = 0.0;
        let mut hits = 0usize;
        for &i in rows {
            loss += gp.loss.eval(labels[i] * h[i]);
            hits += usize::from(sign(h[i]) == labels[i]);
        }
        let k = rows.len() as f64;
        (loss / k, hits as f64 / k)
    };
    let (e_train, acc_train) = on(train);
    let (e_test, acc_test) = on(test);
    Metrics {
        e_train,
        e_test,
        acc_train,
        acc_test,
    }
}

pub fn evaluate(ds: &Dataset, w: &Array1<f64>, gp: &GcnParams) -> Metrics {
    evaluate_on(ds, w, gp, &ds.train_mask, &ds.test_mask)
}

pub fn evaluate_on(ds: &Dataset, w: &Array1<f64>, gp: &GcnParams, train: &[usize], test: &[usize]) -> Metrics {
    let h = gcn_forward(ds, w.view(), gp.c);
    metrics_of(&h, &ds.labels, gp, train, test)
}
