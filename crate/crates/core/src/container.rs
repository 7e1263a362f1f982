//! Tagged container for float matrices: 4-byte magic, little-endian `u32`
//! header length, a JSON header, then little-endian `f32` payload.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write<W: Write, H: Serialize>(mut w: W, magic: &[u8; 4], header: &H, payload: &[f32]) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Format("header longer than u32::MAX bytes".into()))?;
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(len)?;
    w.write_all(&json)?;
    for &v in payload {
        w.write_f32::<LittleEndian>(v)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a container whose payload length the caller derives from the header.
pub fn read<R: Read, H: DeserializeOwned>(
    mut r: R,
    magic: &[u8; 4],
    payload_len: impl FnOnce(&H) -> usize,
) -> Result<(H, Vec<f32>)> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if &found != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&found),
            String::from_utf8_lossy(magic)
        )));
    }
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: H = serde_json::from_slice(&json)?;
    let n = payload_len(&header);
    let mut payload = vec![0f32; n];
    r.read_f32_into::<LittleEndian>(&mut payload)
        .map_err(|e| Error::Format(format!("payload of {n} floats: {e}")))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok((header, payload))
}
