//! Run configuration: a TOML document over built-in defaults, with
//! command-line overrides applied last.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sleepstage::embed::{EmbeddingSource, DEFAULT_EMBEDDING_DIM};
use sleepstage::features::Catalog;
use sleepstage::models::{ClassWeighting, GbtConfig, LogisticConfig, ModelKind, TreeConfig};
use sleepstage::project::DEFAULT_LAMBDA;
use sleepstage::psg_io::AnnotationSchema;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset label used as the column group in comparison tables.
    pub dataset: String,
    /// Row label in comparison tables; derived from catalog and model when unset.
    pub variant: Option<String>,
    pub seed: u64,
    pub input: InputConfig,
    pub split: SplitConfig,
    pub features: FeatureConfig,
    pub embeddings: EmbeddingConfig,
    pub projection: ProjectionConfig,
    pub model: ModelConfig,
    pub explain: ExplainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Directory of epoch stores.
    pub store: Option<PathBuf>,
    /// Directory of EDF recordings, ingested before the run when `store` is unset.
    pub edf_dir: Option<PathBuf>,
    /// Directory of `<stem>.txt` label files; defaults to `edf_dir`.
    pub label_dir: Option<PathBuf>,
    pub schema: AnnotationSchema,
    pub epoch_len_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub catalog: Catalog,
    /// Fraction of catalog columns kept by the ANOVA ranking.
    pub fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub source: EmbeddingSource,
    /// Embedding store for `external_file`.
    pub path: Option<PathBuf>,
    pub dim: usize,
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub class_weighting: ClassWeighting,
    pub logistic: LogisticSettings,
    pub tree: TreeSettings,
    pub gbt: GbtSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticSettings {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSettings {
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtSettings {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    /// Closed form for the logistic model, enumeration up to 12 features, sampling beyond.
    #[default]
    Auto,
    Exact,
    Sampling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub enabled: bool,
    pub estimator: EstimatorChoice,
    /// Leading test rows to attribute; 0 attributes every test row.
    pub max_samples: usize,
    pub n_permutations: usize,
    pub top_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            variant: None,
            seed: 0,
            input: InputConfig::default(),
            split: SplitConfig::default(),
            features: FeatureConfig::default(),
            embeddings: EmbeddingConfig::default(),
            projection: ProjectionConfig::default(),
            model: ModelConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            store: None,
            edf_dir: None,
            label_dir: None,
            schema: AnnotationSchema::Aasm,
            epoch_len_s: 30.0,
        }
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_fraction: 0.8 }
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            catalog: Catalog::FeatShort,
            fraction: None,
        }
    }
}

impl FeatureConfig {
    /// The configured fraction, or 0.9 for FeatShort and 0.1 for FeatLong.
    pub fn effective_fraction(&self) -> f64 {
        self.fraction.unwrap_or(match self.catalog {
            Catalog::FeatShort => 0.9,
            Catalog::FeatLong => 0.1,
        })
    }
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            source: EmbeddingSource::Synthetic,
            path: None,
            dim: DEFAULT_EMBEDDING_DIM,
            noise: 0.0,
        }
    }
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self { lambda: DEFAULT_LAMBDA }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Logistic,
            class_weighting: ClassWeighting::Uniform,
            logistic: LogisticSettings::default(),
            tree: TreeSettings::default(),
            gbt: GbtSettings::default(),
        }
    }
}

impl Default for LogisticSettings {
    fn default() -> Self {
        let d = LogisticConfig::default();
        Self {
            l2: d.l2,
            max_iter: d.max_iter,
            tol: d.tol,
        }
    }
}

impl Default for TreeSettings {
    fn default() -> Self {
        let d = TreeConfig::default();
        Self {
            max_depth: d.max_depth,
            min_leaf: d.min_leaf,
        }
    }
}

impl Default for GbtSettings {
    fn default() -> Self {
        let d = GbtConfig::default();
        Self {
            n_rounds: d.n_rounds,
            learning_rate: d.learning_rate,
            max_depth: d.max_depth,
            min_leaf: d.min_leaf,
            lambda: d.lambda,
        }
    }
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            estimator: EstimatorChoice::Auto,
            max_samples: 100,
            n_permutations: 64,
            top_k: sleepstage::explain::DEFAULT_TOP_K,
        }
    }
}

impl ModelConfig {
    pub fn logistic_config(&self) -> LogisticConfig {
        LogisticConfig {
            l2: self.logistic.l2,
            max_iter: self.logistic.max_iter,
            tol: self.logistic.tol,
            class_weighting: self.class_weighting,
        }
    }

    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.tree.max_depth,
            min_leaf: self.tree.min_leaf,
            class_weighting: self.class_weighting,
        }
    }

    pub fn gbt_config(&self) -> GbtConfig {
        GbtConfig {
            n_rounds: self.gbt.n_rounds,
            learning_rate: self.gbt.learning_rate,
            max_depth: self.gbt.max_depth,
            min_leaf: self.gbt.min_leaf,
            lambda: self.gbt.lambda,
            class_weighting: self.class_weighting,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// Defaults, overlaid with the file at `path` when given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn variant_name(&self) -> String {
        self.variant.clone().unwrap_or_else(|| {
            let catalog = match self.features.catalog {
                Catalog::FeatShort => "FeatShort",
                Catalog::FeatLong => "FeatLong",
            };
            let model = match self.model.kind {
                ModelKind::Logistic => "Logistic Regression",
                ModelKind::Tree => "Decision Tree",
                ModelKind::Gbt => "Gradient Boosting",
            };
            format!("{catalog}-{model}")
        })
    }

    /// Rejects values no stage could accept before any work starts.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Usage(m));
        let f = self.features.effective_fraction();
        if !(f > 0.0 && f <= 1.0) {
            return bad(format!("features.fraction {f} outside (0, 1]"));
        }
        let t = self.split.train_fraction;
        if !(t > 0.0 && t < 1.0) {
            return bad(format!("split.train_fraction {t} outside (0, 1)"));
        }
        if !(self.projection.lambda >= 0.0) {
            return bad(format!(
                "projection.lambda {} must be non-negative",
                self.projection.lambda
            ));
        }
        if !(self.input.epoch_len_s > 0.0) {
            return bad(format!("input.epoch_len_s {} must be positive", self.input.epoch_len_s));
        }
        if self.embeddings.dim == 0 || !(self.embeddings.noise >= 0.0) {
            return bad("embeddings.dim must be positive and embeddings.noise non-negative".into());
        }
        if self.embeddings.source == EmbeddingSource::ExternalFile && self.embeddings.path.is_none() {
            return bad("embeddings.source = \"external_file\" needs embeddings.path".into());
        }
        if self.explain.enabled && self.explain.n_permutations == 0 {
            return bad("explain.n_permutations must be positive".into());
        }
        Ok(())
    }
}
