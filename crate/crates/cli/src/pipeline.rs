//! The end-to-end run: split, extract, select, embed, project, transform,
//! train, evaluate and explain, recorded in a manifest written last.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};
use sleepstage::embed::{
    load_embeddings, sidecar_path, synth_embeddings, EmbeddingMatrix, EmbeddingSidecar, EmbeddingSource,
};
use sleepstage::explain::{
    attribute_rows, shap_linear, summarize_importance, AttributionMatrix, Estimator, MarginFn, MAX_EXACT_FEATURES,
};
use sleepstage::features::{extract, Catalog, FeatureMatrix};
use sleepstage::metrics::{evaluate, EvalReport};
use sleepstage::models::{train_gbt, train_logistic, train_tree, Classifier, ModelKind, TrainedModel};
use sleepstage::project::fit_projection;
use sleepstage::psg_io::{split_subjects, EpochedRecord, SleepStage};
use sleepstage::select::select_top_fraction;

use crate::artifacts::{
    json_bytes, write_embeddings_file, write_json, write_model_file, write_projection_file, ATTRIBUTIONS_FILE,
    EMBEDDINGS_FILE, IMPORTANCE_FILE, MANIFEST_FILE, MODEL_FILE, PROJECTION_FILE, REPORT_FILE, SELECTION_FILE,
};
use crate::config::{EstimatorChoice, ExplainConfig, ModelConfig, RunConfig};
use crate::error::{CliError, Result, StageContext};
use crate::fsutil::{atomic_write, sha256_file};
use crate::ingest::{cmd_ingest, load_store_dir, IngestOptions};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Stage names in execution order.
pub const STAGE_ORDER: [&str; 10] = [
    "ingest",
    "split",
    "extract",
    "select",
    "embed",
    "project",
    "transform",
    "train",
    "evaluate",
    "explain",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    pub train_epochs: usize,
    pub test_epochs: usize,
    pub catalog_features: usize,
    pub selected_features: usize,
    pub embedding_dim: usize,
    pub frozen_columns: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    /// Input file (relative to its directory) to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub stages: Vec<StageTiming>,
    /// Artifact key to file name, relative to the manifest's directory.
    pub outputs: BTreeMap<String, String>,
    pub output_hashes: BTreeMap<String, String>,
    pub summary: RunSummary,
}

impl RunManifest {
    pub fn stage_names(&self) -> Vec<&str> {
        self.stages.iter().map(|s| s.name.as_str()).collect()
    }
}

/// Evaluation of one run, written as `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub dataset: String,
    pub variant: String,
    pub model: ModelKind,
    pub catalog: Catalog,
    pub lambda: f64,
    pub fraction: f64,
    pub seed: u64,
    pub selected_features: Vec<String>,
    pub train: EvalReport,
    pub test: EvalReport,
}

pub fn train_model(cfg: &ModelConfig, x: &Array2<f64>, y: &[SleepStage]) -> sleepstage::Result<TrainedModel<f64>> {
    Ok(match cfg.kind {
        ModelKind::Logistic => TrainedModel::Logistic(train_logistic(x, y, &cfg.logistic_config())?),
        ModelKind::Tree => TrainedModel::Tree(train_tree(x, y, &cfg.tree_config())?),
        ModelKind::Gbt => TrainedModel::Gbt(train_gbt(x, y, &cfg.gbt_config())?),
    })
}

pub fn evaluate_model(model: &TrainedModel<f64>, x: &Array2<f64>, y: &[SleepStage]) -> sleepstage::Result<EvalReport> {
    let predicted = model.predict(x)?;
    evaluate(y, &predicted)
}

/// Attributions of the leading `max_samples` rows of `x` (all rows when 0)
/// against the single reference `background`.
pub fn explain_model(
    model: &TrainedModel<f64>,
    x: &Array2<f64>,
    background: &ndarray::Array1<f64>,
    names: &[String],
    cfg: &ExplainConfig,
    seed: u64,
) -> sleepstage::Result<AttributionMatrix<f64>> {
    let n = if cfg.max_samples == 0 {
        x.nrows()
    } else {
        cfg.max_samples.min(x.nrows())
    };
    let rows = x.slice(s![..n, ..]).to_owned();
    let sampling = Estimator::Sampling {
        n_permutations: cfg.n_permutations,
        seed,
    };
    let estimator = match (cfg.estimator, model) {
        (EstimatorChoice::Auto, TrainedModel::Logistic(m)) => return shap_linear(m, &rows, background, names),
        (EstimatorChoice::Auto, _) if names.len() <= MAX_EXACT_FEATURES => Estimator::Exact,
        (EstimatorChoice::Exact, _) => Estimator::Exact,
        _ => sampling,
    };
    let f = |z: &Array2<f64>| model.margins(z);
    attribute_rows(&f as &MarginFn<'_, f64>, &rows, background, names, estimator)
}

struct Timer {
    stages: Vec<StageTiming>,
}

impl Timer {
    fn run<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.stages.push(StageTiming {
            name: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }
}

fn stack(blocks: &[&FeatureMatrix<f64>], stage: &'static str) -> Result<FeatureMatrix<f64>> {
    let owned: Vec<FeatureMatrix<f64>> = blocks.iter().map(|b| (*b).clone()).collect();
    FeatureMatrix::vstack(&owned).stage(stage)
}

fn rows_of(ranges: &BTreeMap<String, Range<usize>>, ids: &[String]) -> Vec<usize> {
    ids.iter().flat_map(|id| ranges[id].clone()).collect()
}

fn labels(fm: &FeatureMatrix<f64>, stage: &'static str) -> Result<Vec<SleepStage>> {
    fm.labels().map(<[_]>::to_vec).ok_or(CliError::Stage {
        stage,
        source: sleepstage::Error::Training("records carry no stage labels".into()),
    })
}

/// Embeddings for every record (in `records` order) with each subject's row range.
fn embeddings_for(
    cfg: &RunConfig,
    records: &[EpochedRecord],
    features: &[FeatureMatrix<f64>],
    inputs: &mut BTreeMap<String, String>,
) -> Result<(EmbeddingMatrix<f64>, EmbeddingSidecar)> {
    let pairs: Vec<(String, usize)> = records.iter().map(|r| (r.subject_id().to_string(), r.len())).collect();
    match cfg.embeddings.source {
        EmbeddingSource::Synthetic => {
            let all = stack(&features.iter().collect::<Vec<_>>(), "embed")?;
            let em = synth_embeddings(&all, cfg.embeddings.dim, cfg.embeddings.noise, cfg.seed).stage("embed")?;
            let sidecar = EmbeddingSidecar {
                source: EmbeddingSource::Synthetic,
                subject_ids: pairs.iter().map(|p| p.0.clone()).collect(),
                epoch_counts: pairs.iter().map(|p| p.1).collect(),
            };
            Ok((em, sidecar))
        }
        EmbeddingSource::ExternalFile => {
            let path = cfg.embeddings.path.as_deref().expect("validated");
            for p in [path.to_path_buf(), sidecar_path(path)] {
                inputs.insert(format!("embeddings/{}", crate::fsutil::file_name(&p)), sha256_file(&p)?);
            }
            let (em, sidecar) = load_embeddings::<f64>(path).stage("embed")?;
            sidecar.check_against(&pairs).stage("embed")?;
            Ok((em, sidecar))
        }
    }
}

/// Executes the full pipeline into `out_dir`. Artifacts from earlier stages
/// stay on disk when a later stage fails; the manifest is written last.
pub fn cmd_run(cfg: &RunConfig, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut timer = Timer { stages: Vec::new() };
    let mut inputs: BTreeMap<String, String> = BTreeMap::new();
    let mut outputs: BTreeMap<String, String> = BTreeMap::new();

    let store_dir: PathBuf = match (&cfg.input.store, &cfg.input.edf_dir) {
        (Some(store), _) => store.clone(),
        (None, Some(edf_dir)) => {
            let store = out_dir.join("epochs");
            timer.run("ingest", || {
                let label_dir = cfg.input.label_dir.as_deref().unwrap_or(edf_dir);
                for p in crate::fsutil::files_with_extension(edf_dir, "edf")?
                    .into_iter()
                    .chain(crate::fsutil::files_with_extension(label_dir, "txt")?)
                {
                    inputs.insert(format!("edf/{}", crate::fsutil::file_name(&p)), sha256_file(&p)?);
                }
                let summary = cmd_ingest(&IngestOptions {
                    edf_dir,
                    label_dir: Some(label_dir),
                    out_store: &store,
                    schema: cfg.input.schema,
                    epoch_len_s: cfg.input.epoch_len_s,
                })?;
                if !summary.ledger.is_empty() {
                    return Err(CliError::PartialIngest {
                        stored: summary.stored.len(),
                        rejected: summary.ledger.len(),
                        ledger: store.join(crate::ingest::LEDGER_FILE),
                    });
                }
                Ok(())
            })?;
            outputs.insert("epochs".into(), "epochs".into());
            store
        }
        (None, None) => return Err(CliError::Usage("config needs input.store or input.edf_dir".into())),
    };

    let loaded = load_store_dir(&store_dir)?;
    for (path, _) in &loaded {
        inputs.insert(format!("store/{}", crate::fsutil::file_name(path)), sha256_file(path)?);
    }
    let records: Vec<EpochedRecord> = loaded.into_iter().map(|(_, r)| r).collect();

    let split = timer.run("split", || {
        let ids: Vec<String> = records.iter().map(|r| r.subject_id().to_string()).collect();
        split_subjects(&ids, cfg.split.train_fraction, cfg.seed).stage("split")
    })?;

    let catalog = cfg.features.catalog;
    let per_subject: Vec<FeatureMatrix<f64>> = timer.run("extract", || {
        records
            .iter()
            .map(|r| extract::<f64>(catalog, r).stage("extract"))
            .collect()
    })?;
    let by_id: BTreeMap<&str, &FeatureMatrix<f64>> =
        records.iter().map(|r| r.subject_id()).zip(per_subject.iter()).collect();
    let pick = |ids: &[String]| ids.iter().map(|id| by_id[id.as_str()]).collect::<Vec<_>>();
    let train_full = stack(&pick(&split.train), "extract")?;
    let test_full = stack(&pick(&split.test), "extract")?;

    let fraction = cfg.features.effective_fraction();
    let (mask, train_f) = timer.run("select", || {
        let (mask, selected) = select_top_fraction(&train_full, fraction).stage("select")?;
        write_json(&out_dir.join(SELECTION_FILE), &mask)?;
        Ok((mask, selected))
    })?;
    outputs.insert("selection".into(), SELECTION_FILE.into());
    let test_f = mask.apply(&test_full).stage("select")?;

    let (train_e, test_e) = timer.run("embed", || {
        let (em, sidecar) = embeddings_for(cfg, &records, &per_subject, &mut inputs)?;
        if em.source() == EmbeddingSource::Synthetic {
            write_embeddings_file(&out_dir.join(EMBEDDINGS_FILE), &em, &sidecar)?;
        }
        let ranges: BTreeMap<String, Range<usize>> = sidecar.row_ranges().into_iter().collect();
        Ok((
            em.select_rows(&rows_of(&ranges, &split.train)),
            em.select_rows(&rows_of(&ranges, &split.test)),
        ))
    })?;
    if cfg.embeddings.source == EmbeddingSource::Synthetic {
        outputs.insert("embeddings".into(), EMBEDDINGS_FILE.into());
    }

    let projection = timer.run("project", || {
        let model = fit_projection(&train_e, &train_f, cfg.projection.lambda).stage("project")?;
        write_projection_file(&out_dir.join(PROJECTION_FILE), &model)?;
        Ok(model)
    })?;
    outputs.insert("projection".into(), PROJECTION_FILE.into());

    let (r_train, r_test) = timer.run("transform", || {
        Ok((
            projection.transform(&train_e).stage("transform")?.values,
            projection.transform(&test_e).stage("transform")?.values,
        ))
    })?;

    let y_train = labels(&train_f, "train")?;
    let y_test = labels(&test_f, "evaluate")?;
    let model = timer.run("train", || {
        let model = train_model(&cfg.model, &r_train, &y_train).stage("train")?;
        write_model_file(&out_dir.join(MODEL_FILE), &model)?;
        Ok(model)
    })?;
    outputs.insert("model".into(), MODEL_FILE.into());

    timer.run("evaluate", || {
        let report = RunReport {
            tool_version: TOOL_VERSION.into(),
            dataset: cfg.dataset.clone(),
            variant: cfg.variant_name(),
            model: cfg.model.kind,
            catalog,
            lambda: cfg.projection.lambda,
            fraction,
            seed: cfg.seed,
            selected_features: mask.kept_names().iter().map(|s| s.to_string()).collect(),
            train: evaluate_model(&model, &r_train, &y_train).stage("evaluate")?,
            test: evaluate_model(&model, &r_test, &y_test).stage("evaluate")?,
        };
        write_json(&out_dir.join(REPORT_FILE), &report)
    })?;
    outputs.insert("report".into(), REPORT_FILE.into());

    if cfg.explain.enabled {
        timer.run("explain", || {
            let background = r_train.mean_axis(Axis(0)).expect("training rows");
            let attr = explain_model(
                &model,
                &r_test,
                &background,
                &projection.descriptor_names,
                &cfg.explain,
                cfg.seed,
            )
            .stage("explain")?;
            let summary = summarize_importance(&attr, cfg.explain.top_k).stage("explain")?;
            atomic_write(&out_dir.join(ATTRIBUTIONS_FILE), attr.to_csv().as_bytes())?;
            atomic_write(&out_dir.join(IMPORTANCE_FILE), summary.to_csv().as_bytes())
        })?;
        outputs.insert("attributions".into(), ATTRIBUTIONS_FILE.into());
        outputs.insert("importance".into(), IMPORTANCE_FILE.into());
    }

    let mut output_hashes = BTreeMap::new();
    for (key, name) in &outputs {
        let path = out_dir.join(name);
        if path.is_file() {
            output_hashes.insert(key.clone(), sha256_file(&path)?);
        }
    }
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        config: cfg.clone(),
        inputs,
        stages: timer.stages,
        outputs,
        output_hashes,
        summary: RunSummary {
            train_epochs: train_f.n_rows(),
            test_epochs: test_f.n_rows(),
            train_subjects: split.train,
            test_subjects: split.test,
            catalog_features: train_full.n_features(),
            selected_features: mask.kept_indices.len(),
            embedding_dim: train_e.dim(),
            frozen_columns: projection.frozen.iter().filter(|&&f| f).count(),
        },
    };
    atomic_write(&out_dir.join(MANIFEST_FILE), &json_bytes(&manifest))?;
    Ok(manifest)
}
