//! Feature store: one `NIFT` container per record holding the descriptor
//! list, optional labels and a row-major little-endian `f32` matrix.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{FeatureDescriptor, FeatureMatrix};
use crate::container;
use crate::error::{Error, Result};
use crate::psg_io::SleepStage;
use crate::scalar::Real;

pub const FEATURE_STORE_EXTENSION: &str = "features";
const MAGIC: &[u8; 4] = b"NIFT";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    subject_id: String,
    n_rows: usize,
    descriptors: Vec<FeatureDescriptor>,
    labels: Option<Vec<SleepStage>>,
}

pub fn write_feature_store<T: Real, W: Write>(subject_id: &str, fm: &FeatureMatrix<T>, w: W) -> Result<()> {
    let header = Header {
        version: VERSION,
        subject_id: subject_id.to_string(),
        n_rows: fm.n_rows(),
        descriptors: fm.descriptors().to_vec(),
        labels: fm.labels().map(<[_]>::to_vec),
    };
    let payload: Vec<f32> = fm.values().iter().map(|v| v.as_f64() as f32).collect();
    container::write(w, MAGIC, &header, &payload)
}

/// Returns the subject id and the matrix.
pub fn read_feature_store<T: Real, R: Read>(r: R) -> Result<(String, FeatureMatrix<T>)> {
    let (h, payload): (Header, _) = container::read(r, MAGIC, |h: &Header| h.n_rows * h.descriptors.len())?;
    if h.version != VERSION {
        return Err(Error::Format(format!(
            "unsupported feature store version {}",
            h.version
        )));
    }
    let values = Array2::from_shape_vec(
        (h.n_rows, h.descriptors.len()),
        payload.into_iter().map(|v| T::lit(v as f64)).collect(),
    )
    .map_err(|e| Error::Format(e.to_string()))?;
    Ok((h.subject_id, FeatureMatrix::new(h.descriptors, values, h.labels)?))
}
