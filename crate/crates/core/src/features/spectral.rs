//! Welch power spectral density and band integrals.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::BandDefinition;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_WINDOW_S: f64 = 5.0;
pub const DEFAULT_OVERLAP: f64 = 0.5;
/// Lower edge of the analyzed range used as the denominator of relative powers.
pub const ANALYSIS_LOW_HZ: f64 = 0.5;

/// One-sided power spectral density on a uniform grid starting at 0 Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct Psd<T> {
    pub freqs: Vec<T>,
    pub density: Vec<T>,
}

impl<T: Real> Psd<T> {
    pub fn resolution(&self) -> T {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            T::zero()
        }
    }

    pub fn max_freq(&self) -> T {
        self.freqs.last().copied().unwrap_or_else(T::zero)
    }

    /// `sum(density) * df`: the mean window-weighted power of the segments.
    pub fn total_power(&self) -> T {
        self.density.iter().copied().sum::<T>() * self.resolution()
    }
}

/// Reusable Welch estimator: Hann window, per-segment mean removal, averaged
/// periodograms scaled as a density.
pub struct WelchEstimator<T: Real> {
    sampling_hz: f64,
    nperseg: usize,
    step: usize,
    window: Vec<T>,
    window_power: T,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Real> WelchEstimator<T> {
    pub fn new(sampling_hz: f64, window_s: f64, overlap: f64) -> Result<Self> {
        if !(sampling_hz > 0.0) || !(window_s > 0.0) {
            return Err(Error::Spectral(format!(
                "need positive rate and window, got {sampling_hz} Hz / {window_s} s"
            )));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::Spectral(format!("overlap {overlap} outside [0, 1)")));
        }
        let nperseg = (window_s * sampling_hz).round() as usize;
        if nperseg < 2 {
            return Err(Error::Spectral(format!("window of {nperseg} samples is too short")));
        }
        let step = (nperseg - (overlap * nperseg as f64).floor() as usize).max(1);
        let n = T::from_usize_lossy(nperseg);
        let window: Vec<T> = (0..nperseg)
            .map(|i| {
                let phase = T::TAU() * T::from_usize_lossy(i) / n;
                T::lit(0.5) - T::lit(0.5) * phase.cos()
            })
            .collect();
        let window_power = window.iter().map(|&w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(nperseg);
        Ok(Self {
            sampling_hz,
            nperseg,
            step,
            window,
            window_power,
            fft,
        })
    }

    pub fn segment_len(&self) -> usize {
        self.nperseg
    }

    pub fn estimate(&self, signal: &[T]) -> Result<Psd<T>> {
        let n = self.nperseg;
        if signal.len() < n {
            return Err(Error::Spectral(format!(
                "signal of {} samples is shorter than one {n}-sample window",
                signal.len()
            )));
        }
        let n_bins = n / 2 + 1;
        let mut acc = vec![T::zero(); n_bins];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        let mut segments = 0usize;
        let mut start = 0;
        while start + n <= signal.len() {
            let seg = &signal[start..start + n];
            let mean = seg.iter().copied().sum::<T>() / T::from_usize_lossy(n);
            for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex::new((x - mean) * w, T::zero());
            }
            self.fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            segments += 1;
            start += self.step;
        }
        let fs = T::lit(self.sampling_hz);
        let scale = T::one() / (fs * self.window_power * T::from_usize_lossy(segments));
        let two = T::lit(2.0);
        let density = acc
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let one_sided = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
                if one_sided {
                    p * scale * two
                } else {
                    p * scale
                }
            })
            .collect();
        let df = fs / T::from_usize_lossy(n);
        let freqs = (0..n_bins).map(|k| T::from_usize_lossy(k) * df).collect();
        Ok(Psd { freqs, density })
    }
}

/// Welch PSD of `signal` sampled at `sampling_hz`.
pub fn welch_psd<T: Real>(signal: &[T], sampling_hz: f64, window_s: f64, overlap: f64) -> Result<Psd<T>> {
    WelchEstimator::new(sampling_hz, window_s, overlap)?.estimate(signal)
}

fn check_range<T: Real>(psd: &Psd<T>, lo: f64, hi: f64) -> Result<()> {
    let top = psd.max_freq().as_f64();
    if psd.freqs.len() < 2 {
        return Err(Error::Band("spectrum has fewer than two bins".into()));
    }
    if !(lo < hi) || lo < 0.0 || lo >= top || hi > top * (1.0 + 1e-12) {
        return Err(Error::Band(format!(
            "range [{lo}, {hi}] Hz has no bins inside [0, {top}] Hz"
        )));
    }
    Ok(())
}

/// Trapezoidal integral of the linearly interpolated density over `[lo, hi]`.
/// Integrals over adjacent ranges add up exactly.
pub fn integrate<T: Real>(psd: &Psd<T>, lo: f64, hi: f64) -> Result<T> {
    check_range(psd, lo, hi)?;
    let (lo, hi) = (T::lit(lo), T::lit(hi).min(psd.max_freq()));
    let half = T::lit(0.5);
    let mut area = T::zero();
    for i in 0..psd.freqs.len() - 1 {
        let (f0, f1) = (psd.freqs[i], psd.freqs[i + 1]);
        let a = lo.max(f0);
        let b = hi.min(f1);
        if b <= a {
            continue;
        }
        let (d0, d1) = (psd.density[i], psd.density[i + 1]);
        let at = |f: T| d0 + (d1 - d0) * (f - f0) / (f1 - f0);
        area += (b - a) * (at(a) + at(b)) * half;
    }
    Ok(area)
}

/// Absolute band power, or relative to `[0.5 Hz, Nyquist]` when `relative`.
/// A silent spectrum gives a relative power of 0.
pub fn band_power<T: Real>(psd: &Psd<T>, band: &BandDefinition, relative: bool) -> Result<T> {
    let abs = integrate(psd, band.lo_hz, band.hi_hz)?;
    if !relative {
        return Ok(abs);
    }
    let total = integrate(psd, ANALYSIS_LOW_HZ, psd.max_freq().as_f64())?;
    Ok(if total > T::zero() { abs / total } else { T::zero() })
}

fn analyzed_bins<T: Real>(psd: &Psd<T>) -> impl Iterator<Item = (T, T)> + '_ {
    let low = T::lit(ANALYSIS_LOW_HZ);
    psd.freqs
        .iter()
        .copied()
        .zip(psd.density.iter().copied())
        .filter(move |(f, _)| *f >= low)
}

/// Shannon entropy of the normalized spectrum over `[0.5 Hz, Nyquist]`, scaled
/// to [0, 1] by the log of the bin count. 0 for a silent spectrum.
pub fn spectral_entropy<T: Real>(psd: &Psd<T>) -> T {
    let total: T = analyzed_bins(psd).map(|(_, p)| p).sum();
    let m = analyzed_bins(psd).count();
    if total <= T::zero() || m < 2 {
        return T::zero();
    }
    let h: T = analyzed_bins(psd)
        .map(|(_, p)| p / total)
        .filter(|&q| q > T::zero())
        .map(|q| -q * q.ln())
        .sum();
    h / T::from_usize_lossy(m).ln()
}

/// Frequency splitting the `[0.5 Hz, Nyquist]` power in half. 0 for a silent spectrum.
pub fn median_frequency<T: Real>(psd: &Psd<T>) -> T {
    let top = psd.max_freq().as_f64();
    let Ok(total) = integrate(psd, ANALYSIS_LOW_HZ, top) else {
        return T::zero();
    };
    if total <= T::zero() {
        return T::zero();
    }
    let target = total * T::lit(0.5);
    let mut cum = T::zero();
    let mut prev = T::lit(ANALYSIS_LOW_HZ);
    for &f in psd.freqs.iter().filter(|&&f| f > T::lit(ANALYSIS_LOW_HZ)) {
        let part = integrate(psd, prev.as_f64(), f.as_f64()).unwrap_or_else(|_| T::zero());
        if cum + part >= target && part > T::zero() {
            return prev + (f - prev) * (target - cum) / part;
        }
        cum += part;
        prev = f;
    }
    psd.max_freq()
}
