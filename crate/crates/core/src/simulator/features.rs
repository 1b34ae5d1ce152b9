//! Node features: synthetic draws for both models and ingestion of real ones.
//!
//! Ingested CSV layout: one node per row, one feature per column, comma
//! separated, optional header row (detected when its first field is not a
//! number). Blank lines are skipped.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sign;

/// `n × m` matrix of i.i.d. standard Gaussians, one ChaCha8 stream per row.
pub fn gaussian_matrix(n: usize, m: usize, seed: u64) -> Array2<f64> {
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::<f64>::zeros((n, m));
    x.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let mut rng = base.clone();
            rng.set_stream(i as u64);
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        });
    x
}

pub fn gaussian_vector(m: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_shape_fn(m, |_| rng.sample(StandardNormal))
}

pub fn rademacher(n: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_shape_fn(n, |_| if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 })
}

/// `y = sign(X u / √n)` with `sign(0) = +1`.
pub fn glm_labels(x: ArrayView2<f64>, u: ArrayView1<f64>) -> Array1<f64> {
    let scale = 1.0 / (x.nrows() as f64).sqrt();
    x.dot(&u).mapv(|v| sign(v * scale))
}

/// Adds the spike `√(μ/n) y uᵀ` to `w` in place.
pub fn add_csbm_spike(w: &mut Array2<f64>, y: ArrayView1<f64>, u: ArrayView1<f64>, mu: f64) {
    let a = (mu / w.nrows() as f64).sqrt();
    for (mut row, &yi) in w.axis_iter_mut(Axis(0)).zip(y.iter()) {
        row.scaled_add(a * yi, &u);
    }
}

/// Parses a dense numeric CSV into an `n × m` matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let file = std::fs::File::open(path)?;
    parse_matrix(file)
}

pub fn parse_matrix<R: std::io::Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if k == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Parse {
                    row: line,
                    column: rec.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                column: j + 1,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: j + 1,
                    message: format!("`{field}` is not finite"),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    let m = width.ok_or_else(|| Error::Parse {
        row: 1,
        column: 1,
        message: "no data rows".into(),
    })?;
    Array2::from_shape_vec((rows, m), data).map_err(|e| Error::Dimension(e.to_string()))
}

/// Adds `ε` times i.i.d. standard Gaussian noise, then centers each column and
/// scales it to squared norm `n`.
pub fn normalize_features(mut x: Array2<f64>, epsilon: f64, seed: u64) -> Result<Array2<f64>> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            reason: "must be finite and non-negative",
        });
    }
    let n = x.nrows();
    if epsilon > 0.0 {
        let noise = gaussian_matrix(n, x.ncols(), seed);
        x.scaled_add(epsilon, &noise);
    }
    let sqrt_n = (n as f64).sqrt();
    for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        let scale = col.fold(0.0f64, |a, &b| a.max(b.abs()));
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let norm = col.dot(&col).sqrt();
        // Rounding residue of a constant column counts as zero variance.
        if !(norm > 1e-13 * scale * sqrt_n) {
            return Err(Error::ZeroVarianceColumn { column: j });
        }
        col.mapv_inplace(|v| sqrt_n * v / norm);
    }
    Ok(x)
}

/// Reads, noises and standardizes a feature CSV.
pub fn ingest_features(path: &Path, epsilon: f64, seed: u64) -> Result<Array2<f64>> {
    normalize_features(read_matrix_csv(path)?, epsilon, seed)
}

/// Splits column `col` off a raw matrix and maps its two distinct values to
/// `-1` (smaller) and `+1` (larger).
pub fn split_label_column(raw: &Array2<f64>, col: usize) -> Result<(Array2<f64>, Array1<f64>)> {
    if col >= raw.ncols() {
        return Err(Error::Dimension(format!(
            "label column {col} out of range for {} columns",
            raw.ncols()
        )));
    }
    let labels = raw.column(col);
    let lo = labels.fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = labels.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if let Some((i, _)) = labels.iter().enumerate().find(|(_, &v)| v != lo && v != hi) {
        return Err(Error::Parse {
            row: i + 1,
            column: col + 1,
            message: "label column must hold exactly two classes".into(),
        });
    }
    if lo == hi {
        return Err(Error::Parse {
            row: 1,
            column: col + 1,
            message: "label column holds a single class".into(),
        });
    }
    let y = labels.mapv(|v| if v == hi { 1.0 } else { -1.0 });
    let keep: Vec<usize> = (0..raw.ncols()).filter(|&j| j != col).collect();
    Ok((raw.select(Axis(1), &keep), y))
}
