//! Binary dataset bundle for exact replay.
//!
//! Layout, all integers `u64` and reals `f64` little-endian:
//!
//! ```text
//! magic        8 bytes  "GCNSBM01"
//! model        u64      0 = CSBM, 1 = GLM–SBM
//! alpha lambda mu rho rho_test d      6 × f64
//! n m_dim seed u64 × 3
//! mode         u64      0 = Bernoulli, 1 = Gaussian equivalent
//! symmetrized  u64      0 or 1
//! labels       n × f64
//! hidden_u     len u64, then len × f64
//! features     n·m_dim × f64, row-major
//! train_mask   len u64, then len × u64
//! test_mask    len u64, then len × u64
//! adjacency    Bernoulli: n·⌈n/64⌉ × u64 row-major bit words (bit j%64 of
//!              word j/64 is entry j);
//!              Gaussian: n·n × f32 noise, row-major
//! ```

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Adjacency, Dataset};
use crate::error::{Error, Result};
use crate::params::{DataParams, Model};

const MAGIC: &[u8; 8] = b"GCNSBM01";

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) -> Result<()> {
        vs.into_iter().try_for_each(|&v| self.f64(v))
    }
    fn indices(&mut self, vs: &[usize]) -> Result<()> {
        self.u64(vs.len() as u64)?;
        vs.iter().try_for_each(|&v| self.u64(v as u64))
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Bundle("truncated file".into()),
            _ => Error::Io(e),
        })?;
        Ok(b)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, len: usize) -> Result<Vec<f64>> {
        (0..len).map(|_| self.f64()).collect()
    }
    fn len(&mut self, limit: usize, what: &str) -> Result<usize> {
        let k = self.u64()? as usize;
        if k > limit {
            return Err(Error::Bundle(format!("{what} length {k} exceeds {limit}")));
        }
        Ok(k)
    }
    fn indices(&mut self, n: usize, what: &str) -> Result<Vec<usize>> {
        let k = self.len(n, what)?;
        (0..k)
            .map(|_| {
                let i = self.u64()? as usize;
                if i >= n {
                    return Err(Error::Bundle(format!("{what} index {i} out of range")));
                }
                Ok(i)
            })
            .collect()
    }
}

pub fn write_bundle<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = Writer(BufWriter::new(out));
    w.0.write_all(MAGIC)?;
    let p = &ds.params;
    w.u64(match p.model {
        Model::Csbm => 0,
        Model::GlmSbm => 1,
    })?;
    for v in [p.alpha, p.lambda, p.mu, p.rho, p.rho_test, p.d] {
        w.f64(v)?;
    }
    w.u64(ds.n as u64)?;
    w.u64(ds.m_dim as u64)?;
    w.u64(ds.seed)?;
    w.u64(match ds.adjacency {
        Adjacency::Bernoulli { .. } => 0,
        Adjacency::GaussianEquivalent { .. } => 1,
    })?;
    w.u64(u64::from(ds.symmetrized))?;
    w.f64s(&ds.labels)?;
    w.u64(ds.hidden_u.len() as u64)?;
    w.f64s(&ds.hidden_u)?;
    w.f64s(&ds.features)?;
    w.indices(&ds.train_mask)?;
    w.indices(&ds.test_mask)?;
    match &ds.adjacency {
        Adjacency::Bernoulli { bits, .. } => {
            for &word in bits.words() {
                w.u64(word)?;
            }
        }
        Adjacency::GaussianEquivalent { noise, .. } => {
            for &v in noise {
                w.0.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.0.flush()?;
    Ok(())
}

pub fn read_bundle<R: Read>(input: R) -> Result<Dataset> {
    let mut r = Reader(BufReader::new(input));
    if &r.bytes::<8>()? != MAGIC {
        return Err(Error::Bundle("bad magic".into()));
    }
    let model = match r.u64()? {
        0 => Model::Csbm,
        1 => Model::GlmSbm,
        k => return Err(Error::Bundle(format!("unknown model tag {k}"))),
    };
    let mut v = [0.0; 6];
    for x in &mut v {
        *x = r.f64()?;
    }
    let params = DataParams {
        model,
        alpha: v[0],
        lambda: v[1],
        mu: v[2],
        rho: v[3],
        rho_test: v[4],
        d: v[5],
    };
    let n = r.u64()? as usize;
    let m_dim = r.u64()? as usize;
    // Guards against absurd allocations from corrupt headers.
    if n == 0 || m_dim == 0 || n > 1 << 24 || m_dim > 1 << 24 {
        return Err(Error::Bundle(format!("implausible dimensions {n} × {m_dim}")));
    }
    let seed = r.u64()?;
    let mode = r.u64()?;
    let symmetrized = match r.u64()? {
        0 => false,
        1 => true,
        k => return Err(Error::Bundle(format!("bad symmetrized flag {k}"))),
    };
    let labels = Array1::from(r.f64s(n)?);
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::Bundle("labels must be ±1".into()));
    }
    let ulen = r.len(m_dim, "hidden_u")?;
    let hidden_u = Array1::from(r.f64s(ulen)?);
    let features = Array2::from_shape_vec((n, m_dim), r.f64s(n * m_dim)?)
        .map_err(|e| Error::Bundle(e.to_string()))?;
    let train_mask = r.indices(n, "train_mask")?;
    let test_mask = r.indices(n, "test_mask")?;
    let adjacency = match mode {
        0 => {
            let words = n.div_ceil(64);
            let bits = (0..n * words).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            Adjacency::Bernoulli {
                bits: super::BitMatrix::from_words(n, bits)?,
                d: params.d,
            }
        }
        1 => {
            let noise = (0..n * n)
                .map(|_| r.bytes::<4>().map(f32::from_le_bytes))
                .collect::<Result<Vec<_>>>()?;
            Adjacency::GaussianEquivalent {
                lambda: params.lambda,
                labels: labels.clone(),
                noise: Array2::from_shape_vec((n, n), noise).map_err(|e| Error::Bundle(e.to_string()))?,
            }
        }
        k => return Err(Error::Bundle(format!("unknown adjacency mode {k}"))),
    };
    let mut rest = [0u8; 1];
    if r.0.read(&mut rest)? != 0 {
        return Err(Error::Bundle("trailing bytes".into()));
    }
    Ok(Dataset {
        params,
        n,
        m_dim,
        adjacency,
        symmetrized,
        features,
        labels,
        hidden_u,
        train_mask,
        test_mask,
        seed,
    })
}

pub fn export_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    write_bundle(ds, std::fs::File::create(path)?)
}

pub fn import_dataset(path: &Path) -> Result<Dataset> {
    read_bundle(std::fs::File::open(path)?)
}
