//! Recording ingestion: EDF decoding, stage alignment, 30 s epoching,
//! subject-level splitting and the on-disk epoch store.

mod edf;
mod epoch;
mod labels;
mod split;
mod store;

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use edf::{parse_edf, write_edf, EdfSignalSpec};
pub use epoch::{epoch_record, epoch_unlabeled};
pub use labels::{align_stages, parse_label_file, AnnotationSchema, EpochLabel};
pub use split::{split_by_subject, split_subjects, test_subject_count, SubjectSplit};
pub use store::{read_epoch_store, write_epoch_store, EPOCH_STORE_EXTENSION};

/// Samples per second, kept exact since EDF stores it as a ratio of
/// samples-per-record to record duration.
pub type SamplingRate = Ratio<u64>;

pub const N_STAGES: usize = 5;

/// AASM sleep stage. The declaration order is the confusion-matrix order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SleepStage {
    W,
    N1,
    N2,
    N3,
    #[serde(rename = "REM")]
    Rem,
}

impl SleepStage {
    pub const ALL: [SleepStage; N_STAGES] = [
        SleepStage::W,
        SleepStage::N1,
        SleepStage::N2,
        SleepStage::N3,
        SleepStage::Rem,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SleepStage::W => "W",
            SleepStage::N1 => "N1",
            SleepStage::N2 => "N2",
            SleepStage::N3 => "N3",
            SleepStage::Rem => "REM",
        }
    }
}

impl fmt::Display for SleepStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SleepStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Labeling {
                token: s.to_string(),
                index: 0,
            })
    }
}

pub(crate) fn rate_to_f64(rate: SamplingRate) -> f64 {
    *rate.numer() as f64 / *rate.denom() as f64
}

/// Number of samples a span of `seconds` covers at `rate`, rounded to nearest.
pub fn samples_in(seconds: f64, rate: SamplingRate) -> usize {
    (seconds * rate_to_f64(rate)).round() as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub name: String,
    pub sampling_hz: SamplingRate,
    pub samples: Vec<f32>,
}

/// A decoded multi-channel recording.
#[derive(Clone, Debug, PartialEq)]
pub struct PsgRecord {
    subject_id: String,
    channels: Vec<Channel>,
    duration_s: f64,
}

impl PsgRecord {
    pub fn new(subject_id: impl Into<String>, channels: Vec<Channel>, duration_s: f64) -> Result<Self> {
        if !(duration_s >= 0.0) || !duration_s.is_finite() {
            return Err(Error::Structural(format!("invalid duration {duration_s}")));
        }
        for (i, ch) in channels.iter().enumerate() {
            if *ch.sampling_hz.numer() == 0 {
                return Err(Error::Structural(format!(
                    "channel {:?} has zero sampling rate",
                    ch.name
                )));
            }
            let expected = samples_in(duration_s, ch.sampling_hz);
            if ch.samples.len() != expected {
                return Err(Error::Structural(format!(
                    "channel {:?} holds {} samples, duration implies {expected}",
                    ch.name,
                    ch.samples.len()
                )));
            }
            if channels[..i].iter().any(|c| c.name == ch.name) {
                return Err(Error::Structural(format!("duplicate channel name {:?}", ch.name)));
            }
        }
        Ok(Self {
            subject_id: subject_id.into(),
            channels,
            duration_s,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn with_subject_id(mut self, id: impl Into<String>) -> Self {
        self.subject_id = id.into();
        self
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub name: String,
    pub sampling_hz: SamplingRate,
}

impl ChannelInfo {
    pub fn sampling_hz_f64(&self) -> f64 {
        rate_to_f64(self.sampling_hz)
    }

    pub fn samples_per_epoch(&self, epoch_len_s: f64) -> usize {
        samples_in(epoch_len_s, self.sampling_hz)
    }
}

/// One classification window across all channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Epoch {
    /// Position of this window in the source recording.
    pub index: usize,
    /// One window per channel, in channel order.
    pub windows: Vec<Vec<f32>>,
    pub label: Option<SleepStage>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochedRecord {
    subject_id: String,
    epoch_len_s: f64,
    channels: Vec<ChannelInfo>,
    epochs: Vec<Epoch>,
}

impl EpochedRecord {
    pub fn new(
        subject_id: impl Into<String>,
        epoch_len_s: f64,
        channels: Vec<ChannelInfo>,
        epochs: Vec<Epoch>,
    ) -> Result<Self> {
        if !(epoch_len_s > 0.0) || !epoch_len_s.is_finite() {
            return Err(Error::Alignment(format!(
                "epoch length must be positive, got {epoch_len_s}"
            )));
        }
        for ch in &channels {
            if ch.samples_per_epoch(epoch_len_s) == 0 {
                return Err(Error::Alignment(format!(
                    "channel {:?} yields zero samples per epoch",
                    ch.name
                )));
            }
        }
        for ep in &epochs {
            if ep.windows.len() != channels.len() {
                return Err(Error::Alignment(format!(
                    "epoch {} has {} windows for {} channels",
                    ep.index,
                    ep.windows.len(),
                    channels.len()
                )));
            }
            for (w, ch) in ep.windows.iter().zip(&channels) {
                if w.len() != ch.samples_per_epoch(epoch_len_s) {
                    return Err(Error::Alignment(format!(
                        "epoch {} channel {:?}: window of {} samples, expected {}",
                        ep.index,
                        ch.name,
                        w.len(),
                        ch.samples_per_epoch(epoch_len_s)
                    )));
                }
            }
        }
        Ok(Self {
            subject_id: subject_id.into(),
            epoch_len_s,
            channels,
            epochs,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn epoch_len_s(&self) -> f64 {
        self.epoch_len_s
    }

    pub fn channels(&self) -> &[ChannelInfo] {
        &self.channels
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Labels of all epochs, or `None` if any epoch is unlabeled.
    pub fn labels(&self) -> Option<Vec<SleepStage>> {
        self.epochs.iter().map(|e| e.label).collect()
    }
}
