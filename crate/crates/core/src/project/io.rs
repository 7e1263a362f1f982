//! `NIPM` model file: magic, λ (`f64`), d and p (`u64`), T row-major, μ, σ
//! (all `f64`), one frozen flag byte per column, then each descriptor name as
//! a `u32` byte length followed by UTF-8. Little-endian throughout.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::ProjectionModel;
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"NIPM";

pub fn write_projection<T: Real, W: Write>(m: &ProjectionModel<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_f64::<LittleEndian>(m.lambda)?;
    w.write_u64::<LittleEndian>(m.embedding_dim() as u64)?;
    w.write_u64::<LittleEndian>(m.n_features() as u64)?;
    for v in m.transform.iter().chain(m.mean.iter()).chain(m.scale.iter()) {
        w.write_f64::<LittleEndian>(v.as_f64())?;
    }
    for &f in &m.frozen {
        w.write_u8(f as u8)?;
    }
    for name in &m.descriptor_names {
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_f64s<T: Real, R: Read>(r: &mut R, n: usize) -> Result<Vec<T>> {
    let mut raw = vec![0f64; n];
    r.read_f64_into::<LittleEndian>(&mut raw)?;
    Ok(raw.into_iter().map(T::lit).collect())
}

pub fn read_projection<T: Real, R: Read>(mut r: R) -> Result<ProjectionModel<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a projection model (bad magic)".into()));
    }
    let lambda = r.read_f64::<LittleEndian>()?;
    let d = r.read_u64::<LittleEndian>()? as usize;
    let p = r.read_u64::<LittleEndian>()? as usize;
    let transform: Array2<T> =
        Array2::from_shape_vec((d, p), read_f64s(&mut r, d * p)?).map_err(|e| Error::Format(e.to_string()))?;
    let mean: Array1<T> = Array1::from(read_f64s(&mut r, p)?);
    let scale: Array1<T> = Array1::from(read_f64s(&mut r, p)?);
    let mut frozen = Vec::with_capacity(p);
    for _ in 0..p {
        frozen.push(r.read_u8()? != 0);
    }
    let mut descriptor_names = Vec::with_capacity(p);
    for _ in 0..p {
        let len = r.read_u32::<LittleEndian>()? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        descriptor_names
            .push(String::from_utf8(buf).map_err(|_| Error::Format("descriptor name is not UTF-8".into()))?);
    }
    if scale.iter().any(|s: &T| !(*s > T::zero())) || transform.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("projection model has invalid scale or transform".into()));
    }
    Ok(ProjectionModel {
        transform,
        lambda,
        mean,
        scale,
        frozen,
        descriptor_names,
    })
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = ProjectionModel {
            transform: array![[1.0, -2.5], [0.125, 3.0], [1e-12, 7.0]],
            lambda: 0.1,
            mean: array![0.5, -1.0],
            scale: array![2.0, 1.0],
            frozen: vec![false, true],
            descriptor_names: vec!["C3-A2|full|band_power_rel|power|delta".into(), "ü".into()],
        };
        let mut buf = Vec::new();
        write_projection(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"NIPM");
        assert_eq!(read_projection::<f64, _>(buf.as_slice()).unwrap(), m);
        assert!(read_projection::<f64, _>(&buf[..buf.len() - 1]).is_err());
    }
}
