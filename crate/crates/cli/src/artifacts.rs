//! Reading and writing pipeline artifacts, always atomically.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sleepstage::embed::{sidecar_path, write_embedding_matrix, EmbeddingMatrix, EmbeddingSidecar};
use sleepstage::features::{read_feature_store, write_feature_store, FeatureMatrix, FEATURE_STORE_EXTENSION};
use sleepstage::models::{read_model, write_model, TrainedModel};
use sleepstage::project::{read_projection, write_projection, ProjectionModel};

use crate::error::{CliError, Result, StageContext};
use crate::fsutil::{atomic_write, files_with_extension, read};

pub const SELECTION_FILE: &str = "selection.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.nise";
pub const PROJECTION_FILE: &str = "projection.nipm";
pub const MODEL_FILE: &str = "model.bin";
pub const REPORT_FILE: &str = "report.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const ATTRIBUTIONS_FILE: &str = "attributions.csv";
pub const IMPORTANCE_FILE: &str = "importance.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CATALOG_FILE: &str = "catalog.json";

fn artifact_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    bytes
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, &json_bytes(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?).map_err(|e| artifact_error(path, e))
}

pub fn write_projection_file(path: &Path, model: &ProjectionModel<f64>) -> Result<()> {
    let mut bytes = Vec::new();
    write_projection(model, &mut bytes).stage("project")?;
    atomic_write(path, &bytes)
}

pub fn read_projection_file(path: &Path) -> Result<ProjectionModel<f64>> {
    read_projection(read(path)?.as_slice()).map_err(|e| artifact_error(path, e))
}

pub fn write_model_file(path: &Path, model: &TrainedModel<f64>) -> Result<()> {
    let mut bytes = Vec::new();
    write_model(model, &mut bytes).stage("train")?;
    atomic_write(path, &bytes)
}

pub fn read_model_file(path: &Path) -> Result<TrainedModel<f64>> {
    read_model(read(path)?.as_slice()).map_err(|e| artifact_error(path, e))
}

pub fn write_embeddings_file(path: &Path, em: &EmbeddingMatrix<f64>, sidecar: &EmbeddingSidecar) -> Result<()> {
    let mut bytes = Vec::new();
    write_embedding_matrix(em, &mut bytes).stage("embed")?;
    atomic_write(path, &bytes)?;
    write_json(&sidecar_path(path), sidecar)
}

pub fn write_feature_file(path: &Path, subject_id: &str, fm: &FeatureMatrix<f64>) -> Result<()> {
    let mut bytes = Vec::new();
    write_feature_store(subject_id, fm, &mut bytes).stage("extract")?;
    atomic_write(path, &bytes)
}

/// Every feature store in `dir`, sorted by subject id.
pub fn load_feature_dir(dir: &Path) -> Result<Vec<(String, FeatureMatrix<f64>)>> {
    let paths = files_with_extension(dir, FEATURE_STORE_EXTENSION)?;
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no .{FEATURE_STORE_EXTENSION} files in {}",
            dir.display()
        )));
    }
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        out.push(read_feature_store(read(&p)?.as_slice()).map_err(|e| artifact_error(&p, e))?);
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}
