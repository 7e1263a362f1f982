use serde::{Deserialize, Serialize};

use super::SleepStage;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationSchema {
    Aasm,
    /// Rechtschaffen & Kales; stages 3 and 4 collapse into N3.
    Rk,
}

/// Aligned label for one epoch. Movement and unscored epochs are kept as
/// `Excluded` so the epoching step can drop them without shifting indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpochLabel {
    Stage(SleepStage),
    Excluded,
}

impl EpochLabel {
    pub fn stage(self) -> Option<SleepStage> {
        match self {
            EpochLabel::Stage(s) => Some(s),
            EpochLabel::Excluded => None,
        }
    }
}

fn normalize(token: &str) -> String {
    let t = token.trim().to_ascii_uppercase();
    t.strip_prefix("SLEEP STAGE ").map(str::trim).unwrap_or(&t).to_string()
}

fn map_aasm(t: &str) -> Option<EpochLabel> {
    use SleepStage::*;
    Some(match t {
        "W" | "WAKE" => EpochLabel::Stage(W),
        "N1" => EpochLabel::Stage(N1),
        "N2" => EpochLabel::Stage(N2),
        "N3" => EpochLabel::Stage(N3),
        "R" | "REM" => EpochLabel::Stage(Rem),
        "?" | "UNKNOWN" | "UNSCORED" => EpochLabel::Excluded,
        _ => return None,
    })
}

fn map_rk(t: &str) -> Option<EpochLabel> {
    use SleepStage::*;
    Some(match t {
        "W" | "WAKE" => EpochLabel::Stage(W),
        "1" | "S1" | "N1" => EpochLabel::Stage(N1),
        "2" | "S2" | "N2" => EpochLabel::Stage(N2),
        "3" | "S3" | "N3" | "4" | "S4" | "N4" => EpochLabel::Stage(N3),
        "R" | "REM" => EpochLabel::Stage(Rem),
        "M" | "MT" | "MOVEMENT" | "MOVEMENT TIME" | "?" | "UNKNOWN" => EpochLabel::Excluded,
        _ => return None,
    })
}

/// Maps raw annotation strings onto the five AASM stages.
pub fn align_stages<S: AsRef<str>>(raw_labels: &[S], schema: AnnotationSchema) -> Result<Vec<EpochLabel>> {
    raw_labels
        .iter()
        .enumerate()
        .map(|(index, raw)| {
            let t = normalize(raw.as_ref());
            let mapped = match schema {
                AnnotationSchema::Aasm => map_aasm(&t),
                AnnotationSchema::Rk => map_rk(&t),
            };
            mapped.ok_or_else(|| Error::Labeling {
                token: raw.as_ref().to_string(),
                index,
            })
        })
        .collect()
}

/// Reads a sidecar label file of `epoch_index<TAB>label` lines. Indices must
/// run 0, 1, 2, ... in order; blank lines and `#` comments are ignored.
pub fn parse_label_file(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (idx, label) = line.split_once('\t').ok_or_else(|| Error::LabelFile {
            line: lineno + 1,
            message: "expected epoch_index<TAB>label".into(),
        })?;
        let idx: usize = idx.trim().parse().map_err(|_| Error::LabelFile {
            line: lineno + 1,
            message: format!("bad epoch index {idx:?}"),
        })?;
        if idx != out.len() {
            return Err(Error::LabelFile {
                line: lineno + 1,
                message: format!("epoch index {idx} out of sequence, expected {}", out.len()),
            });
        }
        out.push(label.trim().to_string());
    }
    Ok(out)
}
