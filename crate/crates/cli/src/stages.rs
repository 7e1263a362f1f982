//! Single-stage subcommands operating on artifacts in directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use sleepstage::embed::{load_embeddings, synth_embeddings, EmbeddingMatrix, EmbeddingSidecar, EmbeddingSource};
use sleepstage::explain::summarize_importance;
use sleepstage::features::{extract, Catalog, FeatureMatrix, FEATURE_STORE_EXTENSION};
use sleepstage::metrics::EvalRecord;
use sleepstage::models::TrainedModel;
use sleepstage::project::{fit_projection, ProjectionModel};
use sleepstage::psg_io::SleepStage;
use sleepstage::select::{select_top_fraction, SelectionMask};

use crate::artifacts::{
    load_feature_dir, read_json, read_model_file, read_projection_file, write_embeddings_file, write_feature_file,
    write_json, write_model_file, write_projection_file, ATTRIBUTIONS_FILE, CATALOG_FILE, EMBEDDINGS_FILE,
    EVALUATION_FILE, IMPORTANCE_FILE, MODEL_FILE, PROJECTION_FILE, SELECTION_FILE,
};
use crate::config::{ExplainConfig, ModelConfig};
use crate::error::{CliError, Result, StageContext};
use crate::fsutil::atomic_write;
use crate::ingest::load_store_dir;
use crate::pipeline::{evaluate_model, explain_model, train_model};

/// Extracts `catalog` for every epoch store in `store_dir` into
/// `<subject>.features` files plus a `catalog.json` descriptor list.
pub fn cmd_features(store_dir: &Path, catalog: Catalog, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut descriptors = None;
    for (_, rec) in load_store_dir(store_dir)? {
        let fm = extract::<f64>(catalog, &rec).stage("extract")?;
        descriptors.get_or_insert_with(|| fm.descriptors().to_vec());
        let path = out_dir.join(format!("{}.{FEATURE_STORE_EXTENSION}", rec.subject_id()));
        write_feature_file(&path, rec.subject_id(), &fm)?;
        written.push(path);
    }
    write_json(&out_dir.join(CATALOG_FILE), &descriptors)?;
    Ok(written)
}

/// Subject ids with their row counts, in stacking order.
type RowCounts = Vec<(String, usize)>;

fn stacked(blocks: Vec<(String, FeatureMatrix<f64>)>) -> Result<(RowCounts, FeatureMatrix<f64>)> {
    let counts = blocks.iter().map(|(id, fm)| (id.clone(), fm.n_rows())).collect();
    let fms: Vec<FeatureMatrix<f64>> = blocks.into_iter().map(|(_, fm)| fm).collect();
    Ok((counts, FeatureMatrix::vstack(&fms).stage("extract")?))
}

/// Ranks the columns of every store in `features_dir` (pass the training
/// subjects only) and writes `selection.json`.
pub fn cmd_select(features_dir: &Path, fraction: f64, out_dir: &Path) -> Result<SelectionMask> {
    let (_, fm) = stacked(load_feature_dir(features_dir)?)?;
    let (mask, _) = select_top_fraction(&fm, fraction).stage("select")?;
    write_json(&out_dir.join(SELECTION_FILE), &mask)?;
    Ok(mask)
}

/// Synthetic embeddings for every store in `features_dir`, in subject order.
pub fn cmd_embed_synth(features_dir: &Path, dim: usize, noise: f64, seed: u64, out_dir: &Path) -> Result<PathBuf> {
    let (counts, fm) = stacked(load_feature_dir(features_dir)?)?;
    let em = synth_embeddings(&fm, dim, noise, seed).stage("embed")?;
    let sidecar = EmbeddingSidecar {
        source: EmbeddingSource::Synthetic,
        subject_ids: counts.iter().map(|c| c.0.clone()).collect(),
        epoch_counts: counts.iter().map(|c| c.1).collect(),
    };
    let path = out_dir.join(EMBEDDINGS_FILE);
    write_embeddings_file(&path, &em, &sidecar)?;
    Ok(path)
}

/// Embedding rows and feature rows for the subjects in `features_dir`,
/// aligned through the embedding sidecar, with the selection applied.
pub fn load_aligned(
    embeddings: &Path,
    features_dir: &Path,
    selection: Option<&Path>,
) -> Result<(EmbeddingMatrix<f64>, FeatureMatrix<f64>)> {
    let (counts, fm) = stacked(load_feature_dir(features_dir)?)?;
    let (em, sidecar) = load_embeddings::<f64>(embeddings).stage("embed")?;
    sidecar.check_against(&counts).stage("embed")?;
    let ranges: BTreeMap<String, std::ops::Range<usize>> = sidecar.row_ranges().into_iter().collect();
    let rows: Vec<usize> = counts.iter().flat_map(|(id, _)| ranges[id].clone()).collect();
    let fm = match selection {
        Some(p) => read_json::<SelectionMask>(p)?.apply(&fm).stage("select")?,
        None => fm,
    };
    Ok((em.select_rows(&rows), fm))
}

pub fn cmd_project(
    embeddings: &Path,
    features_dir: &Path,
    selection: Option<&Path>,
    lambda: f64,
    out_dir: &Path,
) -> Result<ProjectionModel<f64>> {
    let (em, fm) = load_aligned(embeddings, features_dir, selection)?;
    let model = fit_projection(&em, &fm, lambda).stage("project")?;
    write_projection_file(&out_dir.join(PROJECTION_FILE), &model)?;
    Ok(model)
}

/// Normalized representation of the aligned rows and their stage labels.
fn represent(embeddings: &Path, features_dir: &Path, projection: &Path) -> Result<(Array2<f64>, Vec<SleepStage>)> {
    let (em, fm) = load_aligned(embeddings, features_dir, None)?;
    let model = read_projection_file(projection)?;
    let r = model.transform(&em).stage("transform")?;
    let y = fm
        .labels()
        .map(<[_]>::to_vec)
        .ok_or_else(|| CliError::Usage(format!("feature stores in {} carry no labels", features_dir.display())))?;
    Ok((r.values, y))
}

pub fn cmd_train(
    embeddings: &Path,
    features_dir: &Path,
    projection: &Path,
    model_cfg: &ModelConfig,
    out_dir: &Path,
) -> Result<TrainedModel<f64>> {
    let (x, y) = represent(embeddings, features_dir, projection)?;
    let model = train_model(model_cfg, &x, &y).stage("train")?;
    write_model_file(&out_dir.join(MODEL_FILE), &model)?;
    Ok(model)
}

pub fn cmd_evaluate(
    embeddings: &Path,
    features_dir: &Path,
    projection: &Path,
    model: &Path,
    dataset: &str,
    out_dir: &Path,
) -> Result<EvalRecord> {
    let (x, y) = represent(embeddings, features_dir, projection)?;
    let m = read_model_file(model)?;
    let record = EvalRecord {
        dataset: dataset.to_string(),
        model: m.kind().to_string(),
        report: evaluate_model(&m, &x, &y).stage("evaluate")?,
    };
    write_json(&out_dir.join(EVALUATION_FILE), &record)?;
    Ok(record)
}

/// Attributes rows of `features_dir` against `background` (the mean of the
/// representation rows of `background_dir`, or of the explained rows when unset).
#[allow(clippy::too_many_arguments)]
pub fn cmd_explain(
    embeddings: &Path,
    features_dir: &Path,
    background_dir: Option<&Path>,
    projection: &Path,
    model: &Path,
    cfg: &ExplainConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    let (x, _) = represent(embeddings, features_dir, projection)?;
    let background: Array1<f64> = match background_dir {
        Some(dir) => represent(embeddings, dir, projection)?.0,
        None => x.clone(),
    }
    .mean_axis(Axis(0))
    .expect("non-empty representation");
    let names = read_projection_file(projection)?.descriptor_names;
    let m = read_model_file(model)?;
    let attr = explain_model(&m, &x, &background, &names, cfg, seed).stage("explain")?;
    let summary = summarize_importance(&attr, cfg.top_k).stage("explain")?;
    atomic_write(&out_dir.join(ATTRIBUTIONS_FILE), attr.to_csv().as_bytes())?;
    atomic_write(&out_dir.join(IMPORTANCE_FILE), summary.to_csv().as_bytes())
}
