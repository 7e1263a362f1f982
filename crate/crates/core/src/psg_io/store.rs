//! Epoch store: one file per record, `NIEP` container with a JSON header
//! followed by every epoch's channel windows as little-endian `f32`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ChannelInfo, Epoch, EpochedRecord, SleepStage};
use crate::container;
use crate::error::{Error, Result};

pub const EPOCH_STORE_EXTENSION: &str = "epochs";
const MAGIC: &[u8; 4] = b"NIEP";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    subject_id: String,
    epoch_len_s: f64,
    channels: Vec<ChannelInfo>,
    samples_per_epoch: Vec<usize>,
    epoch_indices: Vec<usize>,
    labels: Vec<Option<SleepStage>>,
}

pub fn write_epoch_store<W: Write>(rec: &EpochedRecord, w: W) -> Result<()> {
    let header = Header {
        version: VERSION,
        subject_id: rec.subject_id().to_string(),
        epoch_len_s: rec.epoch_len_s(),
        channels: rec.channels().to_vec(),
        samples_per_epoch: rec
            .channels()
            .iter()
            .map(|c| c.samples_per_epoch(rec.epoch_len_s()))
            .collect(),
        epoch_indices: rec.epochs().iter().map(|e| e.index).collect(),
        labels: rec.epochs().iter().map(|e| e.label).collect(),
    };
    let payload: Vec<f32> = rec
        .epochs()
        .iter()
        .flat_map(|e| e.windows.iter().flat_map(|w| w.iter().copied()))
        .collect();
    container::write(w, MAGIC, &header, &payload)
}

pub fn read_epoch_store<R: Read>(r: R) -> Result<EpochedRecord> {
    let (h, payload): (Header, _) = container::read(r, MAGIC, |h: &Header| {
        h.epoch_indices.len() * h.samples_per_epoch.iter().sum::<usize>()
    })?;
    if h.version != VERSION {
        return Err(Error::Format(format!("unsupported epoch store version {}", h.version)));
    }
    if h.labels.len() != h.epoch_indices.len() || h.samples_per_epoch.len() != h.channels.len() {
        return Err(Error::Format("epoch store header lengths disagree".into()));
    }
    let mut rest = payload.as_slice();
    let mut epochs = Vec::with_capacity(h.epoch_indices.len());
    for (&index, &label) in h.epoch_indices.iter().zip(&h.labels) {
        let windows = h
            .samples_per_epoch
            .iter()
            .map(|&n| {
                let (w, tail) = rest.split_at(n);
                rest = tail;
                w.to_vec()
            })
            .collect();
        epochs.push(Epoch { index, windows, label });
    }
    EpochedRecord::new(h.subject_id, h.epoch_len_s, h.channels, epochs)
}
