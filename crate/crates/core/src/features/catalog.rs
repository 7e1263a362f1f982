//! FeatShort (clinical, AASM-aligned) and FeatLong (exhaustive) catalogs.
//!
//! FeatShort per channel role:
//! - EEG (10): relative power in slow, delta, theta, alpha, sigma and beta;
//!   delta-band RMS (slow-wave amplitude); sigma-band RMS (spindles);
//!   delta/beta and theta/alpha power ratios.
//! - EOG (9): the EEG set without theta/alpha.
//! - EMG (9): epoch RMS, 95th percentile of |x|, Hjorth triple, skewness,
//!   kurtosis, relative beta and relative high-band (20-45 Hz) power.
//!
//! FeatLong repeats 24 measures per channel on the full epoch and on each half.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::spectral::{band_power, median_frequency, spectral_entropy, Psd, WelchEstimator};
use super::timedomain::{abs_energy, hjorth, iqr, moments, p95_abs, rms, zero_crossings, Hjorth, Moments};
use super::{BandDefinition, FeatureDescriptor, FeatureKind, FeatureMatrix, Measure, Window};
use super::{DEFAULT_OVERLAP, DEFAULT_WINDOW_S};
use crate::error::{Error, Result};
use crate::psg_io::{ChannelInfo, EpochedRecord};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelRole {
    Eeg,
    Eog,
    Emg,
}

fn is_electrode(token: &str) -> bool {
    const PREFIXES: [&str; 12] = ["FP", "AF", "FC", "FT", "CP", "TP", "PO", "F", "C", "T", "P", "O"];
    PREFIXES.iter().any(|p| {
        token
            .strip_prefix(p)
            .is_some_and(|rest| rest == "Z" || (!rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit())))
    })
}

/// Infers the physiological role of a channel from its label.
pub fn channel_role(name: &str) -> Option<ChannelRole> {
    let upper = name.trim().to_ascii_uppercase();
    if upper.contains("EMG") || upper.contains("CHIN") {
        return Some(ChannelRole::Emg);
    }
    let first = upper.split_whitespace().next().unwrap_or("");
    let lead = first.split('-').next().unwrap_or("");
    if upper.contains("EOG") || ["ROC", "LOC", "E1", "E2"].contains(&lead) {
        return Some(ChannelRole::Eog);
    }
    if upper.starts_with("EEG") || is_electrode(lead) {
        return Some(ChannelRole::Eeg);
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Catalog {
    FeatShort,
    FeatLong,
}

impl std::str::FromStr for Catalog {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "featshort" | "short" => Ok(Catalog::FeatShort),
            "featlong" | "long" => Ok(Catalog::FeatLong),
            _ => Err(Error::Catalog(format!("unknown catalog {s:?}"))),
        }
    }
}

impl std::fmt::Display for Catalog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Catalog::FeatShort => "featshort",
            Catalog::FeatLong => "featlong",
        })
    }
}

type Spec = (FeatureKind, Measure, Option<&'static str>);

fn rel(band: &'static str) -> Spec {
    (FeatureKind::BandPowerRel, Measure::Power, Some(band))
}

fn short_specs(role: ChannelRole) -> Vec<Spec> {
    use FeatureKind as K;
    let clinical = ["slow", "delta", "theta", "alpha", "sigma", "beta"];
    match role {
        ChannelRole::Eeg | ChannelRole::Eog => {
            let mut v: Vec<Spec> = clinical.iter().map(|b| rel(b)).collect();
            v.push((K::BandPowerAbs, Measure::BandRms, Some("delta")));
            v.push((K::BandPowerAbs, Measure::BandRms, Some("sigma")));
            v.push((K::Ratio, Measure::Over("beta".into()), Some("delta")));
            if role == ChannelRole::Eeg {
                v.push((K::Ratio, Measure::Over("alpha".into()), Some("theta")));
            }
            v
        }
        ChannelRole::Emg => vec![
            (K::Statistical, Measure::Rms, None),
            (K::Statistical, Measure::P95Abs, None),
            (K::Hjorth, Measure::Activity, None),
            (K::Hjorth, Measure::Mobility, None),
            (K::Hjorth, Measure::Complexity, None),
            (K::Statistical, Measure::Skewness, None),
            (K::Statistical, Measure::Kurtosis, None),
            rel("beta"),
            rel("high"),
        ],
    }
}

fn long_specs() -> Vec<Spec> {
    use FeatureKind as K;
    let clinical = ["slow", "delta", "theta", "alpha", "sigma", "beta"];
    let mut v: Vec<Spec> = vec![
        (K::Statistical, Measure::Mean, None),
        (K::Statistical, Measure::Std, None),
        (K::Statistical, Measure::Skewness, None),
        (K::Statistical, Measure::Kurtosis, None),
        (K::Statistical, Measure::Iqr, None),
        (K::Statistical, Measure::ZeroCrossings, None),
        (K::Statistical, Measure::AbsEnergy, None),
        (K::Hjorth, Measure::Activity, None),
        (K::Hjorth, Measure::Mobility, None),
        (K::Hjorth, Measure::Complexity, None),
    ];
    v.extend(clinical.iter().map(|b| (K::BandPowerAbs, Measure::Power, Some(*b))));
    v.extend(clinical.iter().map(|b| rel(b)));
    v.push((K::Entropy, Measure::SpectralEntropy, None));
    v.push((K::Statistical, Measure::MedianFrequency, None));
    v
}

impl Catalog {
    /// Descriptor list for a channel layout; its length depends only on the channels.
    pub fn descriptors(self, channels: &[ChannelInfo]) -> Result<Vec<FeatureDescriptor>> {
        let mut out = Vec::new();
        let mut recognized = 0;
        for ch in channels {
            let Some(role) = channel_role(&ch.name) else { continue };
            recognized += 1;
            match self {
                Catalog::FeatShort => {
                    for (kind, measure, band) in short_specs(role) {
                        out.push(FeatureDescriptor::new(&ch.name, Window::Full, kind, measure, band)?);
                    }
                }
                Catalog::FeatLong => {
                    for window in [Window::Full, Window::FirstHalf, Window::SecondHalf] {
                        for (kind, measure, band) in long_specs() {
                            out.push(FeatureDescriptor::new(&ch.name, window, kind, measure, band)?);
                        }
                    }
                }
            }
        }
        if recognized == 0 {
            let names: Vec<&str> = channels.iter().map(|c| c.name.as_str()).collect();
            return Err(Error::Catalog(format!("no EEG, EOG or EMG channel among {names:?}")));
        }
        Ok(out)
    }
}

struct Analysis<T> {
    x: Vec<T>,
    psd: Psd<T>,
    moments: Moments<T>,
    hjorth: Hjorth<T>,
}

impl<T: Real> Analysis<T> {
    fn new(window: &[f32], welch: &WelchEstimator<T>) -> Result<Self> {
        let x: Vec<T> = window.iter().map(|&v| T::lit(v as f64)).collect();
        Ok(Self {
            psd: welch.estimate(&x)?,
            moments: moments(&x),
            hjorth: hjorth(&x)?,
            x,
        })
    }

    fn value(&self, d: &FeatureDescriptor) -> Result<T> {
        let band_abs = |b: &BandDefinition| band_power(&self.psd, b, false);
        Ok(match &d.measure {
            Measure::Mean => self.moments.mean,
            Measure::Std => self.moments.std,
            Measure::Skewness => self.moments.skewness,
            Measure::Kurtosis => self.moments.kurtosis,
            Measure::Iqr => iqr(&self.x),
            Measure::ZeroCrossings => T::from_usize_lossy(zero_crossings(&self.x)),
            Measure::AbsEnergy => abs_energy(&self.x),
            Measure::Rms => rms(&self.x),
            Measure::P95Abs => p95_abs(&self.x),
            Measure::MedianFrequency => median_frequency(&self.psd),
            Measure::Activity => self.hjorth.activity,
            Measure::Mobility => self.hjorth.mobility,
            Measure::Complexity => self.hjorth.complexity,
            Measure::Power => band_power(&self.psd, band_of(d)?, d.kind == FeatureKind::BandPowerRel)?,
            Measure::BandRms => band_abs(band_of(d)?)?.sqrt(),
            Measure::SpectralEntropy => spectral_entropy(&self.psd),
            Measure::Over(den) => {
                let den = BandDefinition::named(den).ok_or_else(|| Error::Catalog(format!("unknown band {den}")))?;
                let (num, den) = (band_abs(band_of(d)?)?, band_abs(&den)?);
                if den > T::zero() {
                    num / den
                } else {
                    T::zero()
                }
            }
        })
    }
}

fn band_of(d: &FeatureDescriptor) -> Result<&BandDefinition> {
    d.band
        .as_ref()
        .ok_or_else(|| Error::Catalog(format!("{} lacks a band", d.name)))
}

/// Computes a catalog for every epoch of a record.
pub fn extract<T: Real>(catalog: Catalog, rec: &EpochedRecord) -> Result<FeatureMatrix<T>> {
    if rec.is_empty() {
        return Err(Error::Catalog(format!("record {:?} has no epochs", rec.subject_id())));
    }
    let descriptors = catalog.descriptors(rec.channels())?;

    // One analysis per distinct (channel, window) pair, shared by descriptors.
    let mut plan: Vec<(usize, Window)> = Vec::new();
    let mut slot = Vec::with_capacity(descriptors.len());
    for d in &descriptors {
        let ch = rec
            .channels()
            .iter()
            .position(|c| c.name == d.channel)
            .expect("descriptor channel from record");
        let fs = rec.channels()[ch].sampling_hz_f64();
        for band in d.band.iter().chain(
            match &d.measure {
                Measure::Over(b) => BandDefinition::named(b),
                _ => None,
            }
            .as_ref(),
        ) {
            band.check_nyquist(fs)?;
        }
        let key = (ch, d.window);
        slot.push(plan.iter().position(|k| *k == key).unwrap_or_else(|| {
            plan.push(key);
            plan.len() - 1
        }));
    }
    let estimators: Vec<WelchEstimator<T>> = rec
        .channels()
        .iter()
        .map(|c| WelchEstimator::new(c.sampling_hz_f64(), DEFAULT_WINDOW_S, DEFAULT_OVERLAP))
        .collect::<Result<_>>()?;

    let mut values = Array2::zeros((rec.len(), descriptors.len()));
    for (row, epoch) in rec.epochs().iter().enumerate() {
        let analyses: Vec<Analysis<T>> = plan
            .iter()
            .map(|&(ch, window)| {
                let w = &epoch.windows[ch];
                Analysis::new(&w[window.range(w.len())], &estimators[ch])
            })
            .collect::<Result<_>>()?;
        for (col, d) in descriptors.iter().enumerate() {
            values[[row, col]] = analyses[slot[col]].value(d)?;
        }
    }
    FeatureMatrix::new(descriptors, values, rec.labels())
}

pub fn extract_featshort<T: Real>(rec: &EpochedRecord) -> Result<FeatureMatrix<T>> {
    extract(Catalog::FeatShort, rec)
}

pub fn extract_featlong<T: Real>(rec: &EpochedRecord) -> Result<FeatureMatrix<T>> {
    extract(Catalog::FeatLong, rec)
}
