//! Embedding matrices E(X): external stores and a synthetic generator.
//!
//! Store layout (`.nise`): magic `NISE`, `u16` version, `u64` rows, `u64` width,
//! then row-major little-endian `f32`. A JSON sidecar next to it (same path
//! plus `.json`) records `{source, subject_ids, epoch_counts}`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::Real;

pub const DEFAULT_EMBEDDING_DIM: usize = 512;
const MAGIC: &[u8; 4] = b"NISE";
const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    ExternalFile,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix<T> {
    values: Array2<T>,
    source: EmbeddingSource,
}

impl<T: Real> EmbeddingMatrix<T> {
    pub fn new(values: Array2<T>, source: EmbeddingSource) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::Dimension("embedding width must be positive".into()));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { values, source })
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), rows),
            source: self.source,
        }
    }

    /// Provenance check against the epoch count of the paired record set.
    pub fn check_rows(&self, expected: usize) -> Result<()> {
        if self.n_rows() != expected {
            return Err(Error::Provenance(format!(
                "embedding store has {} rows, paired epochs number {expected}",
                self.n_rows()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub source: EmbeddingSource,
    pub subject_ids: Vec<String>,
    pub epoch_counts: Vec<usize>,
}

impl EmbeddingSidecar {
    pub fn total_rows(&self) -> usize {
        self.epoch_counts.iter().sum()
    }

    /// Row range of each subject, in sidecar order.
    pub fn row_ranges(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut start = 0;
        self.subject_ids
            .iter()
            .zip(&self.epoch_counts)
            .map(|(id, &n)| {
                let r = start..start + n;
                start += n;
                (id.clone(), r)
            })
            .collect()
    }

    /// Verifies the sidecar against `(subject_id, epoch_count)` pairs from an epoch store.
    pub fn check_against(&self, records: &[(String, usize)]) -> Result<()> {
        for (id, n) in records {
            match self.subject_ids.iter().position(|s| s == id) {
                None => return Err(Error::Provenance(format!("subject {id:?} has no embeddings"))),
                Some(i) if self.epoch_counts[i] != *n => {
                    return Err(Error::Provenance(format!(
                        "subject {id:?}: {} embedding rows for {n} epochs",
                        self.epoch_counts[i]
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_embedding_matrix<T: Real, W: Write>(em: &EmbeddingMatrix<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(em.n_rows() as u64)?;
    w.write_u64::<LittleEndian>(em.dim() as u64)?;
    for &v in em.values.iter() {
        w.write_f32::<LittleEndian>(v.as_f64() as f32)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embedding_matrix<T: Real, R: Read>(mut r: R, source: EmbeddingSource) -> Result<EmbeddingMatrix<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an embedding store (bad magic)".into()));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported embedding store version {version}")));
    }
    let n = r.read_u64::<LittleEndian>()? as usize;
    let d = r.read_u64::<LittleEndian>()? as usize;
    let mut raw = vec![0f32; n.checked_mul(d).ok_or_else(|| Error::Format("shape overflow".into()))?];
    r.read_f32_into::<LittleEndian>(&mut raw)
        .map_err(|e| Error::Format(format!("embedding payload of {n}x{d}: {e}")))?;
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i / d, col: i % d });
    }
    let values = Array2::from_shape_vec((n, d), raw.into_iter().map(|v| T::lit(v as f64)).collect())
        .map_err(|e| Error::Format(e.to_string()))?;
    EmbeddingMatrix::new(values, source)
}

pub fn write_embeddings<T: Real>(path: &Path, em: &EmbeddingMatrix<T>, sidecar: &EmbeddingSidecar) -> Result<()> {
    if sidecar.total_rows() != em.n_rows() || sidecar.subject_ids.len() != sidecar.epoch_counts.len() {
        return Err(Error::Provenance(
            "sidecar epoch counts do not cover the matrix rows".into(),
        ));
    }
    write_embedding_matrix(em, BufWriter::new(File::create(path)?))?;
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(sidecar)?)?;
    Ok(())
}

/// Loads an embedding store and its sidecar, checking that they agree.
pub fn load_embeddings<T: Real>(path: &Path) -> Result<(EmbeddingMatrix<T>, EmbeddingSidecar)> {
    let sidecar: EmbeddingSidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    let em = read_embedding_matrix(BufReader::new(File::open(path)?), sidecar.source)?;
    if sidecar.subject_ids.len() != sidecar.epoch_counts.len() {
        return Err(Error::Provenance(
            "sidecar subject and count lists differ in length".into(),
        ));
    }
    em.check_rows(sidecar.total_rows())?;
    Ok((em, sidecar))
}

/// Column-wise z-scores with population standard deviation; constant
/// columns become zero.
pub fn standardize<T: Real>(values: &Array2<T>) -> Array2<T> {
    let n = T::from_usize_lossy(values.nrows().max(1));
    let mut out = values.clone();
    for mut col in out.columns_mut() {
        let mean = col.iter().copied().sum::<T>() / n;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let sd = var.sqrt();
        col.mapv_inplace(|v| if sd > T::zero() { (v - mean) / sd } else { T::zero() });
    }
    out
}

/// Rows of a seeded Gaussian `p x d` matrix orthonormalized by modified Gram-Schmidt.
pub fn orthonormal_rows(p: usize, d: usize, seed: u64) -> Result<Array2<f64>> {
    if d < p {
        return Err(Error::Dimension(format!(
            "cannot fit {p} orthonormal rows in {d} dimensions"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g: Array2<f64> = Array2::from_shape_simple_fn((p, d), || StandardNormal.sample(&mut rng));
    for i in 0..p {
        for j in 0..i {
            let proj = g.row(i).dot(&g.row(j));
            let rj = g.row(j).to_owned();
            g.row_mut(i).scaled_add(-proj, &rj);
        }
        let norm = g.row(i).dot(&g.row(i)).sqrt();
        if norm < 1e-10 {
            return Err(Error::Dimension("degenerate random basis".into()));
        }
        g.row_mut(i).mapv_inplace(|v| v / norm);
    }
    Ok(g)
}

/// Synthetic embeddings `E = standardize(F) * G + 1 * g + noise_sigma * N`.
///
/// `G` (`p x d`) and `g` (`1 x d`) are orthonormal rows of one seeded basis,
/// so `E * G^T` recovers the standardized features and `E * g^T` is a constant
/// bias unit, which lets an intercept-free linear map reproduce `F` itself.
pub fn synth_embeddings<T: Real>(
    fm: &FeatureMatrix<T>,
    d: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<EmbeddingMatrix<T>> {
    let p = fm.n_features();
    if d <= p {
        return Err(Error::Dimension(format!(
            "embedding width {d} must exceed the {p} feature columns"
        )));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::Dimension(format!(
            "noise sigma must be non-negative, got {noise_sigma}"
        )));
    }
    let basis = orthonormal_rows(p + 1, d, seed)?;
    let fs = standardize(&fm.values().mapv(|v| v.as_f64()));
    let mut e = fs.dot(&basis.slice(ndarray::s![..p, ..]));
    let bias = basis.row(p);
    for mut row in e.rows_mut() {
        row += &bias;
    }
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
        e.mapv_inplace(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + noise_sigma * z
        });
    }
    EmbeddingMatrix::new(e.mapv(T::lit), EmbeddingSource::Synthetic)
}
