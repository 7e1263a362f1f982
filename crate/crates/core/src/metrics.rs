//! Evaluation: confusion matrix, accuracy, macro F1, Cohen's κ and the
//! cross-dataset Average Performance aggregate.
//!
//! Macro F1 is the unweighted mean over all five stages; a stage that never
//! occurs in either sequence contributes an F1 of 0. κ is defined as 0 when
//! chance agreement is 1.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psg_io::{SleepStage, N_STAGES};

pub type Confusion = [[u64; N_STAGES]; N_STAGES];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub stage: SleepStage,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Rows are true stages, columns predicted stages.
    pub confusion: Confusion,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub kappa: f64,
    pub n: u64,
    pub per_class: Vec<ClassScores>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

impl EvalReport {
    /// Derives every score from the confusion matrix alone.
    pub fn from_confusion(confusion: Confusion) -> Result<Self> {
        let n: u64 = confusion.iter().flatten().sum();
        if n == 0 {
            return Err(Error::Evaluation("confusion matrix is empty".into()));
        }
        let nf = n as f64;
        let row: [u64; N_STAGES] = std::array::from_fn(|i| confusion[i].iter().sum());
        let col: [u64; N_STAGES] = std::array::from_fn(|j| confusion.iter().map(|r| r[j]).sum());
        let trace: u64 = (0..N_STAGES).map(|i| confusion[i][i]).sum();
        let per_class: Vec<ClassScores> = SleepStage::ALL
            .iter()
            .map(|&stage| {
                let c = stage.index();
                let tp = confusion[c][c] as f64;
                let precision = ratio(tp, col[c] as f64);
                let recall = ratio(tp, row[c] as f64);
                let f1 = ratio(2.0 * precision * recall, precision + recall);
                ClassScores {
                    stage,
                    precision,
                    recall,
                    f1,
                    support: row[c],
                }
            })
            .collect();
        let accuracy = trace as f64 / nf;
        let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / N_STAGES as f64;
        let p_e = (0..N_STAGES)
            .map(|c| (row[c] as f64 / nf) * (col[c] as f64 / nf))
            .sum::<f64>();
        let kappa = if p_e >= 1.0 {
            0.0
        } else {
            (accuracy - p_e) / (1.0 - p_e)
        };
        Ok(Self {
            confusion,
            accuracy,
            macro_f1,
            kappa,
            n,
            per_class,
        })
    }

    pub fn triple(&self) -> MetricTriple {
        MetricTriple {
            accuracy: self.accuracy,
            macro_f1: self.macro_f1,
            kappa: self.kappa,
        }
    }
}

pub fn confusion_matrix(y_true: &[SleepStage], y_pred: &[SleepStage]) -> Result<Confusion> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Evaluation(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut m = [[0u64; N_STAGES]; N_STAGES];
    for (t, p) in y_true.iter().zip(y_pred) {
        m[t.index()][p.index()] += 1;
    }
    Ok(m)
}

pub fn evaluate(y_true: &[SleepStage], y_pred: &[SleepStage]) -> Result<EvalReport> {
    if y_true.is_empty() {
        return Err(Error::Evaluation("no predictions to evaluate".into()));
    }
    EvalReport::from_confusion(confusion_matrix(y_true, y_pred)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub kappa: f64,
}

impl MetricTriple {
    pub fn values(&self) -> [f64; 3] {
        [self.accuracy, self.macro_f1, self.kappa]
    }
}

/// Rounds to three decimals, halves away from zero.
pub fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Unweighted mean of the given scores, rounded to three decimals.
pub fn average_of(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Evaluation("average performance needs at least one value".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("average performance input is not finite".into()));
    }
    Ok(round3(values.iter().sum::<f64>() / values.len() as f64))
}

/// Mean of every (dataset, metric) score, rounded to three decimals.
pub fn average_performance(reports: &[(String, MetricTriple)]) -> Result<f64> {
    let values: Vec<f64> = reports.iter().flat_map(|(_, t)| t.values()).collect();
    average_of(&values)
}

/// One evaluated pipeline variant on one dataset, as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub dataset: String,
    pub model: String,
    pub report: EvalReport,
}

/// One row of the comparison table: a pipeline variant scored per dataset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableRow {
    pub variant: String,
    pub scores: BTreeMap<String, MetricTriple>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
}

const BLANK_FOOTNOTE: &str = "* Average Performance needs scores on at least two datasets.";

/// Accuracy, macro F1 and κ per dataset followed by Average Performance,
/// which is left blank (with a footnote) for rows covering a single dataset.
pub fn render_table(rows: &[TableRow], format: TableFormat) -> String {
    let datasets: Vec<&String> = {
        let mut all: Vec<&String> = rows.iter().flat_map(|r| r.scores.keys()).collect();
        all.sort();
        all.dedup();
        all
    };
    let mut header = vec!["Model".to_string()];
    for d in &datasets {
        for m in ["Accuracy", "F1 Score (Macro)", "Cohen's kappa"] {
            header.push(format!("{d} {m}"));
        }
    }
    header.push("Average Performance".into());
    let mut body = Vec::new();
    let mut any_blank = false;
    for row in rows {
        let mut cells = vec![row.variant.clone()];
        for d in &datasets {
            match row.scores.get(*d) {
                Some(t) => cells.extend(t.values().iter().map(|v| format!("{v:.3}"))),
                None => cells.extend(std::iter::repeat_n(String::new(), 3)),
            }
        }
        if row.scores.len() >= 2 {
            let entries: Vec<(String, MetricTriple)> = row.scores.iter().map(|(k, v)| (k.clone(), *v)).collect();
            cells.push(average_performance(&entries).map_or(String::new(), |v| format!("{v:.3}")));
        } else {
            any_blank = true;
            cells.push(match format {
                TableFormat::Text => "*".into(),
                TableFormat::Csv => String::new(),
            });
        }
        body.push(cells);
    }
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            let quote = |s: &String| {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            };
            for cells in std::iter::once(&header).chain(&body) {
                let _ = writeln!(out, "{}", cells.iter().map(quote).collect::<Vec<_>>().join(","));
            }
        }
        TableFormat::Text => {
            let widths: Vec<usize> = (0..header.len())
                .map(|j| {
                    std::iter::once(&header)
                        .chain(&body)
                        .map(|r| r[j].chars().count())
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |cells: &Vec<String>| {
                cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect::<Vec<_>>()
                    .join(" | ")
                    .trim_end()
                    .to_string()
            };
            let _ = writeln!(out, "{}", line(&header));
            let _ = writeln!(
                out,
                "{}",
                widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-")
            );
            for cells in &body {
                let _ = writeln!(out, "{}", line(cells));
            }
            if any_blank {
                let _ = writeln!(out, "{BLANK_FOOTNOTE}");
            }
        }
    }
    out
}
