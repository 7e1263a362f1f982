use super::{ChannelInfo, Epoch, EpochLabel, EpochedRecord, PsgRecord};
use crate::error::{Error, Result};

fn channel_infos(record: &PsgRecord) -> Vec<ChannelInfo> {
    record
        .channels()
        .iter()
        .map(|c| ChannelInfo {
            name: c.name.clone(),
            sampling_hz: c.sampling_hz,
        })
        .collect()
}

fn available_windows(record: &PsgRecord, epoch_len_s: f64) -> Result<usize> {
    let mut n = usize::MAX;
    for ch in record.channels() {
        let len = super::samples_in(epoch_len_s, ch.sampling_hz);
        if len == 0 {
            return Err(Error::Alignment(format!(
                "channel {:?} yields zero samples per epoch",
                ch.name
            )));
        }
        n = n.min(ch.samples.len() / len);
    }
    Ok(if n == usize::MAX { 0 } else { n })
}

fn window(record: &PsgRecord, i: usize, epoch_len_s: f64) -> Vec<Vec<f32>> {
    record
        .channels()
        .iter()
        .map(|ch| {
            let len = super::samples_in(epoch_len_s, ch.sampling_hz);
            ch.samples[i * len..(i + 1) * len].to_vec()
        })
        .collect()
}

/// Cuts a recording into consecutive `epoch_len_s` windows and attaches the
/// aligned labels. Excluded epochs are dropped; trailing partial windows are
/// never padded.
pub fn epoch_record(record: &PsgRecord, labels: &[EpochLabel], epoch_len_s: f64) -> Result<EpochedRecord> {
    if !(epoch_len_s > 0.0) {
        return Err(Error::Alignment(format!(
            "epoch length must be positive, got {epoch_len_s}"
        )));
    }
    let available = available_windows(record, epoch_len_s)?;
    if labels.len() > available {
        return Err(Error::Alignment(format!(
            "{} labels but only {available} complete {epoch_len_s} s windows in {:?}",
            labels.len(),
            record.subject_id()
        )));
    }
    let epochs = labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.stage().map(|s| (i, s)))
        .map(|(i, stage)| Epoch {
            index: i,
            windows: window(record, i, epoch_len_s),
            label: Some(stage),
        })
        .collect();
    EpochedRecord::new(record.subject_id(), epoch_len_s, channel_infos(record), epochs)
}

/// Epochs every complete window without labels, for inference-only use.
pub fn epoch_unlabeled(record: &PsgRecord, epoch_len_s: f64) -> Result<EpochedRecord> {
    if !(epoch_len_s > 0.0) {
        return Err(Error::Alignment(format!(
            "epoch length must be positive, got {epoch_len_s}"
        )));
    }
    let n = available_windows(record, epoch_len_s)?;
    let epochs = (0..n)
        .map(|i| Epoch {
            index: i,
            windows: window(record, i, epoch_len_s),
            label: None,
        })
        .collect();
    EpochedRecord::new(record.subject_id(), epoch_len_s, channel_infos(record), epochs)
}
