//! EDF + label-file ingestion into per-subject epoch stores.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sleepstage::psg_io::{
    align_stages, epoch_record, parse_edf, parse_label_file, read_epoch_store, write_epoch_store, AnnotationSchema,
    EpochedRecord, EPOCH_STORE_EXTENSION,
};

use crate::error::{CliError, Result, StageContext};
use crate::fsutil::{atomic_write, file_name, files_with_extension, read};

pub const LEDGER_FILE: &str = "ingest_ledger.json";
pub const LABEL_EXTENSION: &str = "txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub file: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub subject_id: String,
    pub source: String,
    pub store: String,
    pub epochs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub stored: Vec<StoredRecord>,
    pub ledger: Vec<LedgerEntry>,
}

pub struct IngestOptions<'a> {
    pub edf_dir: &'a Path,
    /// Defaults to `edf_dir`.
    pub label_dir: Option<&'a Path>,
    pub out_store: &'a Path,
    pub schema: AnnotationSchema,
    pub epoch_len_s: f64,
}

fn ingest_one(edf: &Path, label_dir: &Path, schema: AnnotationSchema, epoch_len_s: f64) -> Result<EpochedRecord> {
    let stem = edf
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| CliError::Usage(format!("{} has no file stem", edf.display())))?;
    let record = parse_edf(&read(edf)?).stage("ingest")?.with_subject_id(&stem);
    let label_path = label_dir.join(format!("{stem}.{LABEL_EXTENSION}"));
    let text = std::fs::read_to_string(&label_path).map_err(|e| CliError::io(&label_path, e))?;
    let raw = parse_label_file(&text).stage("ingest")?;
    let labels = align_stages(&raw, schema).stage("ingest")?;
    epoch_record(&record, &labels, epoch_len_s).stage("ingest")
}

/// Ingests every `*.edf` in `edf_dir`. Each malformed file is recorded in
/// the ledger (also written to `out_store/ingest_ledger.json`) and skipped.
/// An input directory without EDF files is a usage error.
pub fn cmd_ingest(opts: &IngestOptions<'_>) -> Result<IngestSummary> {
    if !opts.edf_dir.is_dir() {
        return Err(CliError::Usage(format!(
            "{} is not a directory",
            opts.edf_dir.display()
        )));
    }
    let edfs = files_with_extension(opts.edf_dir, "edf")?;
    if edfs.is_empty() {
        return Err(CliError::Usage(format!("no .edf files in {}", opts.edf_dir.display())));
    }
    let label_dir = opts.label_dir.unwrap_or(opts.edf_dir);
    let mut summary = IngestSummary::default();
    for edf in &edfs {
        match ingest_one(edf, label_dir, opts.schema, opts.epoch_len_s) {
            Ok(rec) => {
                let name = format!("{}.{EPOCH_STORE_EXTENSION}", rec.subject_id());
                let mut bytes = Vec::new();
                write_epoch_store(&rec, &mut bytes).stage("ingest")?;
                atomic_write(&opts.out_store.join(&name), &bytes)?;
                summary.stored.push(StoredRecord {
                    subject_id: rec.subject_id().to_string(),
                    source: file_name(edf),
                    store: name,
                    epochs: rec.len(),
                });
            }
            Err(e) => summary.ledger.push(LedgerEntry {
                file: file_name(edf),
                error: e.to_string(),
            }),
        }
    }
    let ledger = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    atomic_write(&opts.out_store.join(LEDGER_FILE), &ledger)?;
    Ok(summary)
}

/// Loads every epoch store in `dir`, sorted by subject id.
pub fn load_store_dir(dir: &Path) -> Result<Vec<(PathBuf, EpochedRecord)>> {
    let paths = files_with_extension(dir, EPOCH_STORE_EXTENSION)?;
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no .{EPOCH_STORE_EXTENSION} files in {}",
            dir.display()
        )));
    }
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let rec = read_epoch_store(read(&p)?.as_slice()).map_err(|e| CliError::Artifact {
            path: p.clone(),
            message: e.to_string(),
        })?;
        out.push((p, rec));
    }
    out.sort_by(|a, b| a.1.subject_id().cmp(b.1.subject_id()));
    Ok(out)
}
