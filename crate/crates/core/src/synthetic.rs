//! Seeded synthetic polysomnography for tests and demonstrations.
//!
//! Each epoch's stage sets a dominant EEG rhythm (W 10 Hz, N1 6 Hz, N2 14 Hz,
//! N3 1.25 Hz, REM 18 Hz) over a weak broadband background; EOG carries slow
//! eye movements in W and REM and EMG tone falls from W to REM.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::psg_io::{write_edf, Channel, EdfSignalSpec, PsgRecord, SamplingRate, SleepStage, N_STAGES};

/// Two EEG channels, one EOG and one EMG.
pub const DEFAULT_CHANNELS: [&str; 4] = ["EEG Fpz-Cz", "EEG Pz-Oz", "EOG horizontal", "EMG submental"];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_subjects: usize,
    pub epochs_per_subject: usize,
    pub sampling_hz: u64,
    pub epoch_len_s: f64,
    pub channels: Vec<String>,
    /// Standard deviation of the white background in microvolts.
    pub noise_uv: f64,
    /// Probability that the next epoch keeps the current stage.
    pub persistence: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_subjects: 10,
            epochs_per_subject: 40,
            sampling_hz: 100,
            epoch_len_s: 30.0,
            channels: DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect(),
            noise_uv: 2.0,
            persistence: 0.6,
            seed: 0,
        }
    }
}

pub fn dominant_frequency(stage: SleepStage) -> f64 {
    match stage {
        SleepStage::W => 10.0,
        SleepStage::N1 => 6.0,
        SleepStage::N2 => 14.0,
        SleepStage::N3 => 1.25,
        SleepStage::Rem => 18.0,
    }
}

fn emg_tone(stage: SleepStage) -> f64 {
    match stage {
        SleepStage::W => 20.0,
        SleepStage::N1 => 12.0,
        SleepStage::N2 => 8.0,
        SleepStage::N3 => 6.0,
        SleepStage::Rem => 2.0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSubject {
    pub record: PsgRecord,
    pub stages: Vec<SleepStage>,
}

fn subject_id(i: usize) -> String {
    format!("SYN{i:03}")
}

fn stage_sequence(n: usize, persistence: f64, rng: &mut ChaCha8Rng) -> Vec<SleepStage> {
    let mut out = Vec::with_capacity(n);
    let mut current = SleepStage::from_index(rng.random_range(0..N_STAGES)).expect("index");
    for _ in 0..n {
        if rng.random::<f64>() >= persistence {
            current = SleepStage::from_index(rng.random_range(0..N_STAGES)).expect("index");
        }
        out.push(current);
    }
    out
}

fn synth_channel(
    name: &str,
    stages: &[SleepStage],
    fs: f64,
    spe: usize,
    cfg: &SyntheticConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f32> {
    let upper = name.to_ascii_uppercase();
    let is_emg = upper.contains("EMG") || upper.contains("CHIN");
    let is_eog = upper.contains("EOG");
    let mut out = Vec::with_capacity(stages.len() * spe);
    for &stage in stages {
        let amp = rng.random_range(30.0..60.0);
        let phase = rng.random_range(0.0..TAU);
        let f0 = dominant_frequency(stage) * rng.random_range(0.97..1.03);
        let eye = if matches!(stage, SleepStage::W | SleepStage::Rem) {
            rng.random_range(20.0..40.0)
        } else {
            0.0
        };
        let tone = emg_tone(stage) * rng.random_range(0.8..1.2);
        for k in 0..spe {
            let t = k as f64 / fs;
            let noise: f64 = StandardNormal.sample(rng);
            let v = if is_emg {
                {
                    let burst: f64 = StandardNormal.sample(rng);
                    tone * burst + cfg.noise_uv * noise
                }
            } else if is_eog {
                eye * (TAU * 0.6 * t + phase).sin() + 0.3 * amp * (TAU * f0 * t).sin() + cfg.noise_uv * noise
            } else {
                amp * (TAU * f0 * t + phase).sin() + cfg.noise_uv * noise
            };
            out.push(v as f32);
        }
    }
    out
}

/// Generates `n_subjects` labelled recordings.
pub fn generate(cfg: &SyntheticConfig) -> Result<Vec<SyntheticSubject>> {
    if cfg.n_subjects == 0 || cfg.epochs_per_subject == 0 || cfg.sampling_hz == 0 || cfg.channels.is_empty() {
        return Err(Error::Format(
            "synthetic corpus needs subjects, epochs, channels and a sampling rate".into(),
        ));
    }
    let fs = cfg.sampling_hz as f64;
    let spe = (cfg.epoch_len_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_subjects)
        .map(|i| {
            let stages = stage_sequence(cfg.epochs_per_subject, cfg.persistence, &mut rng);
            let channels = cfg
                .channels
                .iter()
                .map(|name| Channel {
                    name: name.clone(),
                    sampling_hz: SamplingRate::from_integer(cfg.sampling_hz),
                    samples: synth_channel(name, &stages, fs, spe, cfg, &mut rng),
                })
                .collect();
            let duration = cfg.epochs_per_subject as f64 * cfg.epoch_len_s;
            Ok(SyntheticSubject {
                record: PsgRecord::new(subject_id(i), channels, duration)?,
                stages,
            })
        })
        .collect()
}

/// Label-file text in the `epoch_index<TAB>label` format.
pub fn label_file_text(stages: &[SleepStage]) -> String {
    stages.iter().enumerate().map(|(i, s)| format!("{i}\t{s}\n")).collect()
}

/// Writes `<id>.edf` and `<id>.txt` per subject into `dir`, returning the EDF paths.
pub fn write_fixture_dir(dir: &Path, cfg: &SyntheticConfig) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for subject in generate(cfg)? {
        let rec = &subject.record;
        let signals: Vec<(EdfSignalSpec, Vec<f64>)> = rec
            .channels()
            .iter()
            .map(|ch| {
                let spr = *ch.sampling_hz.numer() as usize;
                (
                    EdfSignalSpec::microvolts(&ch.name, spr, 500.0),
                    ch.samples.iter().map(|&v| v as f64).collect(),
                )
            })
            .collect();
        let bytes = write_edf(rec.subject_id(), 1.0, &signals)?;
        let edf = dir.join(format!("{}.edf", rec.subject_id()));
        std::fs::write(&edf, bytes)?;
        std::fs::write(
            dir.join(format!("{}.txt", rec.subject_id())),
            label_file_text(&subject.stages),
        )?;
        paths.push(edf);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psg_io::{parse_edf, EpochLabel};

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            n_subjects: 2,
            epochs_per_subject: 6,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_shaped() {
        let a = generate(&small()).unwrap();
        assert_eq!(a, generate(&small()).unwrap());
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].record.channels()[0].samples.len(), 6 * 3000);
        assert_eq!(a[1].record.subject_id(), "SYN001");
    }

    #[test]
    fn fixtures_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_fixture_dir(dir.path(), &small()).unwrap();
        let rec = parse_edf(&std::fs::read(&paths[0]).unwrap()).unwrap();
        assert_eq!(rec.subject_id(), "SYN000");
        assert_eq!(rec.channels().len(), 4);
        let text = std::fs::read_to_string(dir.path().join("SYN000.txt")).unwrap();
        let labels = crate::psg_io::align_stages(
            &crate::psg_io::parse_label_file(&text).unwrap(),
            crate::psg_io::AnnotationSchema::Aasm,
        )
        .unwrap();
        assert_eq!(labels.len(), 6);
        assert!(labels.iter().all(|l| matches!(l, EpochLabel::Stage(_))));
    }
}
