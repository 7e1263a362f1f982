//! Plain EDF (European Data Format) decoding and encoding.
//!
//! Layout: a 256-byte fixed header, `256 * ns` bytes of per-signal header
//! fields stored column-wise, then data records holding each signal's
//! samples as 16-bit little-endian two's-complement integers.

use num_rational::Ratio;

use super::{Channel, PsgRecord, SamplingRate};
use crate::error::{Error, Result};

const FIXED_HEADER: usize = 256;
const PER_SIGNAL_HEADER: usize = 256;
const ANNOTATION_LABEL: &str = "EDF Annotations";

/// Ascii field cursor tracking byte offsets for error reporting.
struct Fields<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Fields<'a> {
    fn take(&mut self, width: usize) -> Result<(usize, &'a str)> {
        let offset = self.pos;
        let end = offset + width;
        let raw = self.bytes.get(offset..end).ok_or_else(|| Error::Parse {
            offset,
            message: format!("header truncated, needed {width} bytes"),
        })?;
        let text = std::str::from_utf8(raw).map_err(|_| Error::Parse {
            offset,
            message: "header field is not ASCII".into(),
        })?;
        self.pos = end;
        Ok((offset, text.trim()))
    }

    fn take_int(&mut self, width: usize, what: &str) -> Result<i64> {
        let (offset, text) = self.take(width)?;
        text.parse().map_err(|_| Error::Parse {
            offset,
            message: format!("{what}: expected integer, found {text:?}"),
        })
    }

    fn take_f64(&mut self, width: usize, what: &str) -> Result<f64> {
        let (offset, text) = self.take(width)?;
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Parse {
                offset,
                message: format!("{what}: expected number, found {text:?}"),
            })
    }
}

/// Parses a non-negative decimal such as `30`, `1.0` or `0.5` exactly.
fn parse_decimal(text: &str) -> Option<Ratio<u64>> {
    let (int, frac) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 12 {
        return None;
    }
    let int: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let denom = 10u64.pow(frac.len() as u32);
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some(Ratio::new(int.checked_mul(denom)?.checked_add(frac)?, denom))
}

struct SignalHeader {
    label: String,
    physical_min: f64,
    physical_max: f64,
    digital_min: i64,
    digital_max: i64,
    samples_per_record: usize,
}

/// Decodes an EDF byte stream into a calibrated recording.
///
/// The subject id is taken from the first token of the patient field; callers
/// usually override it with the file stem.
pub fn parse_edf(bytes: &[u8]) -> Result<PsgRecord> {
    let mut f = Fields { bytes, pos: 0 };
    let (off, version) = f.take(8)?;
    if version != "0" {
        return Err(Error::Parse {
            offset: off,
            message: format!("unsupported version {version:?}"),
        });
    }
    let (_, patient) = f.take(80)?;
    let subject_id = patient.split_whitespace().next().unwrap_or("X").to_string();
    f.take(80)?; // recording id
    f.take(8)?; // start date
    f.take(8)?; // start time
    let header_off = f.pos;
    let header_bytes = f.take_int(8, "header size")?;
    f.take(44)?; // reserved
    let records_off = f.pos;
    let declared_records = f.take_int(8, "number of data records")?;
    let (dur_off, dur_text) = f.take(8)?;
    let record_duration = parse_decimal(dur_text).ok_or_else(|| Error::Parse {
        offset: dur_off,
        message: format!("record duration: expected non-negative decimal, found {dur_text:?}"),
    })?;
    let ns_off = f.pos;
    let ns = f.take_int(4, "number of signals")?;
    if ns <= 0 {
        return Err(Error::Parse {
            offset: ns_off,
            message: format!("number of signals must be positive, got {ns}"),
        });
    }
    let ns = ns as usize;

    let expected_header = FIXED_HEADER + PER_SIGNAL_HEADER * ns;
    if header_bytes != expected_header as i64 {
        return Err(Error::Structural(format!(
            "header size field says {header_bytes} bytes (offset {header_off}), {ns} signals need {expected_header}"
        )));
    }
    if bytes.len() < expected_header {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!(
                "signal header truncated, file has {} of {expected_header} bytes",
                bytes.len()
            ),
        });
    }

    let mut labels = Vec::with_capacity(ns);
    for _ in 0..ns {
        labels.push(f.take(16)?.1.to_string());
    }
    f.pos += ns * (80 + 8); // transducer, physical dimension
    let physical_min: Vec<f64> = (0..ns)
        .map(|_| f.take_f64(8, "physical minimum"))
        .collect::<Result<_>>()?;
    let physical_max: Vec<f64> = (0..ns)
        .map(|_| f.take_f64(8, "physical maximum"))
        .collect::<Result<_>>()?;
    let digital_min: Vec<i64> = (0..ns)
        .map(|_| f.take_int(8, "digital minimum"))
        .collect::<Result<_>>()?;
    let digital_max: Vec<i64> = (0..ns)
        .map(|_| f.take_int(8, "digital maximum"))
        .collect::<Result<_>>()?;
    f.pos += ns * 80; // prefiltering
    let mut samples_per_record = Vec::with_capacity(ns);
    for _ in 0..ns {
        let (off, text) = f.take(8)?;
        let value: f64 = text.parse().map_err(|_| Error::Parse {
            offset: off,
            message: format!("samples per record: expected number, found {text:?}"),
        })?;
        if value.fract() != 0.0 || value < 1.0 {
            return Err(Error::Structural(format!(
                "samples per record must be a positive integer, found {text:?} at byte {off}"
            )));
        }
        samples_per_record.push(value as usize);
    }

    let signals: Vec<SignalHeader> = (0..ns)
        .map(|i| SignalHeader {
            label: labels[i].clone(),
            physical_min: physical_min[i],
            physical_max: physical_max[i],
            digital_min: digital_min[i],
            digital_max: digital_max[i],
            samples_per_record: samples_per_record[i],
        })
        .collect();

    let record_size: usize = signals.iter().map(|s| s.samples_per_record * 2).sum();
    let data = &bytes[expected_header..];
    let n_records = if declared_records == -1 {
        if !data.len().is_multiple_of(record_size) {
            return Err(Error::Structural(format!(
                "data section of {} bytes is not a whole number of {record_size}-byte records",
                data.len()
            )));
        }
        data.len() / record_size
    } else if declared_records < 0 {
        return Err(Error::Parse {
            offset: records_off,
            message: format!("invalid record count {declared_records}"),
        });
    } else {
        let n = declared_records as usize;
        if data.len() < n * record_size {
            return Err(Error::Structural(format!(
                "header declares {n} records of {record_size} bytes but only {} data bytes follow",
                data.len()
            )));
        }
        n
    };

    if *record_duration.numer() == 0 {
        return Err(Error::Structural("record duration of zero seconds".into()));
    }

    let mut channels = Vec::new();
    let mut record_offsets = Vec::with_capacity(ns);
    let mut acc = 0usize;
    for s in &signals {
        record_offsets.push(acc);
        acc += s.samples_per_record * 2;
    }
    for (i, sig) in signals.iter().enumerate() {
        if sig.label == ANNOTATION_LABEL {
            continue;
        }
        if sig.digital_max <= sig.digital_min {
            return Err(Error::Structural(format!(
                "signal {:?}: digital maximum {} not above minimum {}",
                sig.label, sig.digital_max, sig.digital_min
            )));
        }
        if sig.physical_max == sig.physical_min {
            return Err(Error::Structural(format!(
                "signal {:?}: empty physical range",
                sig.label
            )));
        }
        let gain = (sig.physical_max - sig.physical_min) / (sig.digital_max - sig.digital_min) as f64;
        let mut samples = Vec::with_capacity(n_records * sig.samples_per_record);
        for r in 0..n_records {
            let start = r * record_size + record_offsets[i];
            let chunk = &data[start..start + sig.samples_per_record * 2];
            samples.extend(chunk.chunks_exact(2).map(|b| {
                let d = i16::from_le_bytes([b[0], b[1]]) as f64;
                ((d - sig.digital_min as f64) * gain + sig.physical_min) as f32
            }));
        }
        let rate: SamplingRate = Ratio::from_integer(sig.samples_per_record as u64) / record_duration;
        channels.push(Channel {
            name: sig.label.clone(),
            sampling_hz: rate,
            samples,
        });
    }

    let duration_s = n_records as f64 * *record_duration.numer() as f64 / *record_duration.denom() as f64;
    PsgRecord::new(subject_id, channels, duration_s)
}

/// Description of one signal for [`write_edf`].
#[derive(Clone, Debug)]
pub struct EdfSignalSpec {
    pub label: String,
    pub samples_per_record: usize,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i16,
    pub digital_max: i16,
    pub physical_dimension: String,
}

impl EdfSignalSpec {
    /// Full 16-bit digital range over `[-range, range]` microvolts.
    pub fn microvolts(label: impl Into<String>, samples_per_record: usize, range: f64) -> Self {
        Self {
            label: label.into(),
            samples_per_record,
            physical_min: -range,
            physical_max: range,
            digital_min: i16::MIN,
            digital_max: i16::MAX,
            physical_dimension: "uV".into(),
        }
    }
}

fn put(out: &mut Vec<u8>, text: &str, width: usize) -> Result<()> {
    if !text.is_ascii() || text.len() > width {
        return Err(Error::Format(format!(
            "{text:?} does not fit an EDF field of {width} bytes"
        )));
    }
    out.extend_from_slice(text.as_bytes());
    out.extend(std::iter::repeat_n(b' ', width - text.len()));
    Ok(())
}

fn short_number(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 8 {
        s
    } else {
        format!("{v:.*}", 8usize.saturating_sub(format!("{}", v.trunc()).len() + 1))
    }
}

/// Encodes physical-unit signals as an EDF file. Every signal must hold a
/// whole number of data records.
pub fn write_edf(patient_id: &str, record_duration_s: f64, signals: &[(EdfSignalSpec, Vec<f64>)]) -> Result<Vec<u8>> {
    if signals.is_empty() {
        return Err(Error::Format("no signals to write".into()));
    }
    let n_records = signals[0].1.len() / signals[0].0.samples_per_record.max(1);
    for (spec, samples) in signals {
        if spec.samples_per_record == 0 || samples.len() != n_records * spec.samples_per_record {
            return Err(Error::Format(format!(
                "signal {:?}: {} samples is not {n_records} records of {}",
                spec.label,
                samples.len(),
                spec.samples_per_record
            )));
        }
    }
    let ns = signals.len();
    let mut out = Vec::with_capacity(FIXED_HEADER + PER_SIGNAL_HEADER * ns);
    put(&mut out, "0", 8)?;
    put(&mut out, patient_id, 80)?;
    put(&mut out, "Startdate X X X X", 80)?;
    put(&mut out, "01.01.00", 8)?;
    put(&mut out, "00.00.00", 8)?;
    put(&mut out, &(FIXED_HEADER + PER_SIGNAL_HEADER * ns).to_string(), 8)?;
    put(&mut out, "", 44)?;
    put(&mut out, &n_records.to_string(), 8)?;
    put(&mut out, &short_number(record_duration_s), 8)?;
    put(&mut out, &ns.to_string(), 4)?;
    for (s, _) in signals {
        put(&mut out, &s.label, 16)?;
    }
    for _ in signals {
        put(&mut out, "", 80)?;
    }
    for (s, _) in signals {
        put(&mut out, &s.physical_dimension, 8)?;
    }
    for (s, _) in signals {
        put(&mut out, &short_number(s.physical_min), 8)?;
    }
    for (s, _) in signals {
        put(&mut out, &short_number(s.physical_max), 8)?;
    }
    for (s, _) in signals {
        put(&mut out, &s.digital_min.to_string(), 8)?;
    }
    for (s, _) in signals {
        put(&mut out, &s.digital_max.to_string(), 8)?;
    }
    for _ in signals {
        put(&mut out, "", 80)?;
    }
    for (s, _) in signals {
        put(&mut out, &s.samples_per_record.to_string(), 8)?;
    }
    for _ in signals {
        put(&mut out, "", 32)?;
    }
    for r in 0..n_records {
        for (s, samples) in signals {
            let dmin = s.digital_min as f64;
            let dmax = s.digital_max as f64;
            let scale = (dmax - dmin) / (s.physical_max - s.physical_min);
            for &p in &samples[r * s.samples_per_record..(r + 1) * s.samples_per_record] {
                let d = ((p - s.physical_min) * scale + dmin).round().clamp(dmin, dmax) as i16;
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_channel(records: usize, spr: usize) -> Vec<u8> {
        let samples: Vec<f64> = (0..records * spr).map(|i| (i % 50) as f64).collect();
        write_edf(
            "subj01 X X X",
            1.0,
            &[(EdfSignalSpec::microvolts("EEG Fpz-Cz", spr, 250.0), samples)],
        )
        .unwrap()
    }

    #[test]
    fn decimal_durations_are_exact() {
        assert_eq!(parse_decimal("30"), Some(Ratio::from_integer(30)));
        assert_eq!(parse_decimal("0.5"), Some(Ratio::new(1, 2)));
        assert_eq!(parse_decimal("1.0"), Some(Ratio::from_integer(1)));
        assert_eq!(parse_decimal("-1"), None);
        assert_eq!(parse_decimal("abc"), None);
    }

    #[test]
    fn header_arithmetic() {
        let rec = parse_edf(&one_channel(2, 100)).unwrap();
        assert_eq!(rec.subject_id(), "subj01");
        assert_eq!(rec.channels().len(), 1);
        assert_eq!(rec.channels()[0].samples.len(), 200);
        assert_eq!(rec.channels()[0].sampling_hz, Ratio::from_integer(100));
        assert_eq!(rec.duration_s(), 2.0);
    }

    #[test]
    fn unknown_record_count_resolved_from_length() {
        let mut bytes = one_channel(3, 100);
        bytes[236..244].copy_from_slice(b"-1      ");
        let rec = parse_edf(&bytes).unwrap();
        assert_eq!(rec.duration_s(), 3.0);
        bytes.pop();
        assert!(matches!(parse_edf(&bytes), Err(Error::Structural(_))));
    }

    #[test]
    fn truncated_data_is_structural() {
        let bytes = one_channel(2, 100);
        let err = parse_edf(&bytes[..bytes.len() - 10]).unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "{err}");
    }

    #[test]
    fn malformed_header_reports_offset() {
        let mut bytes = one_channel(1, 100);
        bytes[252..256].copy_from_slice(b"ab  ");
        match parse_edf(&bytes) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 252),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_edf(&bytes[..100]), Err(Error::Parse { .. })));
    }

    #[test]
    fn fractional_samples_per_record_rejected() {
        let mut bytes = one_channel(1, 100);
        // samples-per-record field for the single signal
        let off = 256 + 16 + 80 + 8 * 5 + 80;
        bytes[off..off + 8].copy_from_slice(b"100.5   ");
        assert!(matches!(parse_edf(&bytes), Err(Error::Structural(_))));
    }

    #[test]
    fn annotation_signal_is_skipped() {
        let eeg = (EdfSignalSpec::microvolts("EEG", 10, 100.0), vec![1.0; 20]);
        let ann = (EdfSignalSpec::microvolts(ANNOTATION_LABEL, 4, 1.0), vec![0.0; 8]);
        let rec = parse_edf(&write_edf("p", 1.0, &[eeg, ann]).unwrap()).unwrap();
        assert_eq!(rec.channels().len(), 1);
    }
}
