//! Per-epoch feature catalogs computed from epoched signals.
//!
//! Every column is described by a [`FeatureDescriptor`] whose name is a pure
//! function of `(channel, window, kind, measure, band)` and parses back to it:
//!
//! ```text
//! {channel}|{window}|{kind}|{measure}[|{band}]
//! C3-A2|full|band_power_rel|power|delta
//! ```

mod catalog;
mod spectral;
mod store;
mod timedomain;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psg_io::SleepStage;
use crate::scalar::Real;

pub use catalog::{channel_role, extract, extract_featlong, extract_featshort, Catalog, ChannelRole};
pub use spectral::{
    band_power, integrate, median_frequency, spectral_entropy, welch_psd, Psd, WelchEstimator, ANALYSIS_LOW_HZ,
    DEFAULT_OVERLAP, DEFAULT_WINDOW_S,
};
pub use store::{read_feature_store, write_feature_store, FEATURE_STORE_EXTENSION};
pub use timedomain::{abs_energy, hjorth, iqr, moments, percentile, rms, zero_crossings, Hjorth, Moments};

/// A named frequency band. Only the fixed vocabulary from [`BandDefinition::named`]
/// appears in catalogs, so names resolve back to edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub name: String,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

const BANDS: [(&str, f64, f64); 7] = [
    ("slow", 0.5, 2.0),
    ("delta", 0.5, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 12.0),
    ("sigma", 12.0, 16.0),
    // Beta spans 8-20 Hz and overlaps alpha and sigma on purpose.
    ("beta", 8.0, 20.0),
    ("high", 20.0, 45.0),
];

impl BandDefinition {
    pub fn new(name: impl Into<String>, lo_hz: f64, hi_hz: f64) -> Result<Self> {
        let name = name.into();
        if !(lo_hz >= 0.0 && lo_hz < hi_hz && hi_hz.is_finite()) {
            return Err(Error::Band(format!(
                "band {name:?}: need 0 <= lo < hi, got [{lo_hz}, {hi_hz}]"
            )));
        }
        Ok(Self { name, lo_hz, hi_hz })
    }

    /// Looks up a band from the catalog vocabulary.
    pub fn named(name: &str) -> Option<Self> {
        BANDS.iter().find(|(n, _, _)| *n == name).map(|&(n, lo, hi)| Self {
            name: n.to_string(),
            lo_hz: lo,
            hi_hz: hi,
        })
    }

    /// The clinical bands used for relative powers: slow, delta, theta, alpha, sigma, beta.
    pub fn clinical() -> Vec<Self> {
        ["slow", "delta", "theta", "alpha", "sigma", "beta"]
            .iter()
            .map(|n| Self::named(n).unwrap())
            .collect()
    }

    /// Disjoint bands tiling `[0.5, nyquist]`.
    pub fn partition(nyquist_hz: f64) -> Vec<Self> {
        [(0.5, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 16.0), (16.0, nyquist_hz)]
            .iter()
            .map(|&(lo, hi)| Self {
                name: format!("{lo}-{hi}"),
                lo_hz: lo,
                hi_hz: hi,
            })
            .collect()
    }

    pub fn check_nyquist(&self, sampling_hz: f64) -> Result<()> {
        if self.hi_hz > sampling_hz / 2.0 + 1e-9 {
            return Err(Error::Band(format!(
                "band {:?} reaches {} Hz above the {} Hz Nyquist limit",
                self.name,
                self.hi_hz,
                sampling_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// Which part of the epoch a feature is computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Full,
    FirstHalf,
    SecondHalf,
}

impl Window {
    pub fn as_str(self) -> &'static str {
        match self {
            Window::Full => "full",
            Window::FirstHalf => "h1",
            Window::SecondHalf => "h2",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Window::Full, Window::FirstHalf, Window::SecondHalf]
            .into_iter()
            .find(|w| w.as_str() == s)
    }

    /// Sample range of this window within an epoch of `len` samples.
    pub fn range(self, len: usize) -> std::ops::Range<usize> {
        match self {
            Window::Full => 0..len,
            Window::FirstHalf => 0..len / 2,
            Window::SecondHalf => len / 2..len,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    BandPowerAbs,
    BandPowerRel,
    Hjorth,
    Statistical,
    Entropy,
    Ratio,
}

impl FeatureKind {
    const ALL: [FeatureKind; 6] = [
        FeatureKind::BandPowerAbs,
        FeatureKind::BandPowerRel,
        FeatureKind::Hjorth,
        FeatureKind::Statistical,
        FeatureKind::Entropy,
        FeatureKind::Ratio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::BandPowerAbs => "band_power_abs",
            FeatureKind::BandPowerRel => "band_power_rel",
            FeatureKind::Hjorth => "hjorth",
            FeatureKind::Statistical => "statistical",
            FeatureKind::Entropy => "entropy",
            FeatureKind::Ratio => "ratio",
        }
    }
}

/// The quantity a feature measures.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Mean,
    Std,
    Skewness,
    Kurtosis,
    Iqr,
    ZeroCrossings,
    AbsEnergy,
    Rms,
    P95Abs,
    MedianFrequency,
    Activity,
    Mobility,
    Complexity,
    /// Integrated band power (absolute or relative by kind).
    Power,
    /// Square root of the absolute band power, an amplitude proxy.
    BandRms,
    SpectralEntropy,
    /// Power of the descriptor's band divided by power of this band.
    Over(String),
}

impl Measure {
    fn token(&self) -> String {
        match self {
            Measure::Mean => "mean".into(),
            Measure::Std => "std".into(),
            Measure::Skewness => "skewness".into(),
            Measure::Kurtosis => "kurtosis".into(),
            Measure::Iqr => "iqr".into(),
            Measure::ZeroCrossings => "zero_crossings".into(),
            Measure::AbsEnergy => "abs_energy".into(),
            Measure::Rms => "rms".into(),
            Measure::P95Abs => "p95_abs".into(),
            Measure::MedianFrequency => "median_frequency".into(),
            Measure::Activity => "activity".into(),
            Measure::Mobility => "mobility".into(),
            Measure::Complexity => "complexity".into(),
            Measure::Power => "power".into(),
            Measure::BandRms => "band_rms".into(),
            Measure::SpectralEntropy => "spectral_entropy".into(),
            Measure::Over(b) => format!("over_{b}"),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        if let Some(b) = s.strip_prefix("over_") {
            return BandDefinition::named(b).map(|_| Measure::Over(b.to_string()));
        }
        Some(match s {
            "mean" => Measure::Mean,
            "std" => Measure::Std,
            "skewness" => Measure::Skewness,
            "kurtosis" => Measure::Kurtosis,
            "iqr" => Measure::Iqr,
            "zero_crossings" => Measure::ZeroCrossings,
            "abs_energy" => Measure::AbsEnergy,
            "rms" => Measure::Rms,
            "p95_abs" => Measure::P95Abs,
            "median_frequency" => Measure::MedianFrequency,
            "activity" => Measure::Activity,
            "mobility" => Measure::Mobility,
            "complexity" => Measure::Complexity,
            "power" => Measure::Power,
            "band_rms" => Measure::BandRms,
            "spectral_entropy" => Measure::SpectralEntropy,
            _ => return None,
        })
    }

    /// Kinds this measure may be filed under, and whether it takes a band.
    fn admits(&self, kind: FeatureKind) -> (bool, bool) {
        use FeatureKind as K;
        match self {
            Measure::Mean
            | Measure::Std
            | Measure::Skewness
            | Measure::Kurtosis
            | Measure::Iqr
            | Measure::ZeroCrossings
            | Measure::AbsEnergy
            | Measure::Rms
            | Measure::P95Abs
            | Measure::MedianFrequency => (kind == K::Statistical, false),
            Measure::Activity | Measure::Mobility | Measure::Complexity => (kind == K::Hjorth, false),
            Measure::Power => (matches!(kind, K::BandPowerAbs | K::BandPowerRel), true),
            Measure::BandRms => (kind == K::BandPowerAbs, true),
            Measure::SpectralEntropy => (kind == K::Entropy, false),
            Measure::Over(_) => (kind == K::Ratio, true),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub channel: String,
    pub window: Window,
    pub kind: FeatureKind,
    pub measure: Measure,
    pub band: Option<BandDefinition>,
}

impl FeatureDescriptor {
    pub fn new(channel: &str, window: Window, kind: FeatureKind, measure: Measure, band: Option<&str>) -> Result<Self> {
        if channel.is_empty() || channel.contains('|') {
            return Err(Error::Catalog(format!(
                "channel name {channel:?} cannot be used in a descriptor"
            )));
        }
        let (ok, needs_band) = measure.admits(kind);
        if !ok || needs_band != band.is_some() {
            return Err(Error::Catalog(format!(
                "measure {} with band {band:?} is not a {} feature",
                measure.token(),
                kind.as_str()
            )));
        }
        let band = match band {
            Some(b) => Some(BandDefinition::named(b).ok_or_else(|| Error::Catalog(format!("unknown band {b:?}")))?),
            None => None,
        };
        let mut name = format!("{channel}|{}|{}|{}", window.as_str(), kind.as_str(), measure.token());
        if let Some(b) = &band {
            name.push('|');
            name.push_str(&b.name);
        }
        Ok(Self {
            name,
            channel: channel.to_string(),
            window,
            kind,
            measure,
            band,
        })
    }
}

impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for FeatureDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Catalog(format!("cannot parse descriptor name {s:?}"));
        let parts: Vec<&str> = s.split('|').collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(bad());
        }
        let window = Window::parse(parts[1]).ok_or_else(bad)?;
        let kind = FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == parts[2])
            .ok_or_else(bad)?;
        let measure = Measure::parse(parts[3]).ok_or_else(bad)?;
        let d = Self::new(parts[0], window, kind, measure, parts.get(4).copied())?;
        if d.name != s {
            return Err(bad());
        }
        Ok(d)
    }
}

/// Epochs × features, with optional stage labels per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    descriptors: Vec<FeatureDescriptor>,
    values: Array2<T>,
    labels: Option<Vec<SleepStage>>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(
        descriptors: Vec<FeatureDescriptor>,
        values: Array2<T>,
        labels: Option<Vec<SleepStage>>,
    ) -> Result<Self> {
        if values.ncols() != descriptors.len() {
            return Err(Error::Dimension(format!(
                "{} columns for {} descriptors",
                values.ncols(),
                descriptors.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != values.nrows() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} rows",
                    l.len(),
                    values.nrows()
                )));
            }
        }
        for (i, d) in descriptors.iter().enumerate() {
            if descriptors[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::Catalog(format!("duplicate descriptor {}", d.name)));
            }
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self {
            descriptors,
            values,
            labels,
        })
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn names(&self) -> Vec<String> {
        self.descriptors.iter().map(|d| d.name.clone()).collect()
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[SleepStage]> {
        self.labels.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.descriptors.len()
    }

    /// Keeps the given columns in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_features()) {
            return Err(Error::Dimension(format!(
                "column {bad} out of range {}",
                self.n_features()
            )));
        }
        Ok(Self {
            descriptors: indices.iter().map(|&i| self.descriptors[i].clone()).collect(),
            values: self.values.select(Axis(1), indices),
            labels: self.labels.clone(),
        })
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            descriptors: self.descriptors.clone(),
            values: self.values.select(Axis(0), indices),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Stacks row blocks sharing one catalog. Labels survive only if every block has them.
    pub fn vstack(blocks: &[Self]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::Dimension("no feature blocks to stack".into()))?;
        if let Some(b) = blocks.iter().find(|b| b.descriptors != first.descriptors) {
            return Err(Error::Catalog(format!(
                "catalog mismatch while stacking ({} vs {} columns)",
                b.n_features(),
                first.n_features()
            )));
        }
        let views: Vec<_> = blocks.iter().map(|b| b.values.view()).collect();
        let values = ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Dimension(e.to_string()))?;
        let labels = blocks
            .iter()
            .map(|b| b.labels.clone())
            .collect::<Option<Vec<_>>>()
            .map(|ls| ls.concat());
        Ok(Self {
            descriptors: first.descriptors.clone(),
            values,
            labels,
        })
    }

    pub fn with_labels(mut self, labels: Option<Vec<SleepStage>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.n_rows() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} rows",
                    l.len(),
                    self.n_rows()
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn descriptor_names_parse_back() {
        let d = FeatureDescriptor::new(
            "EEG Fpz-Cz",
            Window::Full,
            FeatureKind::BandPowerRel,
            Measure::Power,
            Some("delta"),
        )
        .unwrap();
        assert_eq!(d.name, "EEG Fpz-Cz|full|band_power_rel|power|delta");
        assert_eq!(d.name.parse::<FeatureDescriptor>().unwrap(), d);
        let r = FeatureDescriptor::new(
            "C3-A2",
            Window::SecondHalf,
            FeatureKind::Ratio,
            Measure::Over("beta".into()),
            Some("delta"),
        )
        .unwrap();
        assert_eq!(r.name.parse::<FeatureDescriptor>().unwrap(), r);
    }

    #[test]
    fn inconsistent_descriptors_rejected() {
        assert!(
            FeatureDescriptor::new("C3", Window::Full, FeatureKind::Hjorth, Measure::Power, Some("delta")).is_err()
        );
        assert!(FeatureDescriptor::new("C3", Window::Full, FeatureKind::BandPowerAbs, Measure::Power, None).is_err());
        assert!(FeatureDescriptor::new("a|b", Window::Full, FeatureKind::Statistical, Measure::Mean, None).is_err());
        assert!("C3|full|statistical".parse::<FeatureDescriptor>().is_err());
        assert!("C3|full|statistical|mean|delta".parse::<FeatureDescriptor>().is_err());
    }

    #[test]
    fn matrix_rejects_non_finite() {
        let d =
            vec![FeatureDescriptor::new("C3", Window::Full, FeatureKind::Statistical, Measure::Mean, None).unwrap()];
        let v = ndarray::array![[1.0], [f64::NAN]];
        assert!(matches!(
            FeatureMatrix::new(d, v, None),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
    }

    fn arb_descriptor() -> impl Strategy<Value = FeatureDescriptor> {
        let measures = prop_oneof![
            Just((FeatureKind::Statistical, Measure::Kurtosis, None)),
            Just((FeatureKind::Hjorth, Measure::Mobility, None)),
            Just((FeatureKind::Entropy, Measure::SpectralEntropy, None)),
            Just((FeatureKind::BandPowerAbs, Measure::BandRms, Some("sigma"))),
            Just((FeatureKind::BandPowerRel, Measure::Power, Some("slow"))),
            Just((FeatureKind::Ratio, Measure::Over("alpha".to_string()), Some("theta"))),
        ];
        let windows = prop_oneof![Just(Window::Full), Just(Window::FirstHalf), Just(Window::SecondHalf)];
        ("[A-Za-z0-9 -]{1,12}", windows, measures)
            .prop_map(|(ch, w, (k, m, b))| FeatureDescriptor::new(&ch, w, k, m, b).unwrap())
    }

    proptest! {
        #[test]
        fn names_are_bijective(d in arb_descriptor()) {
            prop_assert_eq!(d.name.parse::<FeatureDescriptor>().unwrap(), d);
        }
    }
}
