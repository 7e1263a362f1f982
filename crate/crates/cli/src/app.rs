//! Argument parsing and dispatch for the `sleepstage` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sleepstage::embed::EmbeddingSource;
use sleepstage::features::Catalog;
use sleepstage::metrics::TableFormat;
use sleepstage::models::ModelKind;
use sleepstage::psg_io::AnnotationSchema;

use crate::config::RunConfig;
use crate::error::{CliError, Result, EXIT_OK, EXIT_USAGE};
use crate::fsutil::atomic_write;
use crate::ingest::{cmd_ingest, IngestOptions, LEDGER_FILE};
use crate::pipeline::cmd_run;
use crate::report::cmd_report;
use crate::stages::{cmd_embed_synth, cmd_evaluate, cmd_explain, cmd_features, cmd_project, cmd_select, cmd_train};

#[derive(Debug, Parser)]
#[command(name = "sleepstage", version, about = "Interpretable sleep staging pipeline")]
pub struct Cli {
    /// Seed for the subject split, synthetic embeddings and sampled attributions.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// TOML configuration; command-line flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (`report` writes the table here as a file instead of stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CatalogArg {
    Featshort,
    Featlong,
}

impl From<CatalogArg> for Catalog {
    fn from(c: CatalogArg) -> Self {
        match c {
            CatalogArg::Featshort => Catalog::FeatShort,
            CatalogArg::Featlong => Catalog::FeatLong,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Logistic,
    Tree,
    Gbt,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Logistic => ModelKind::Logistic,
            ModelArg::Tree => ModelKind::Tree,
            ModelArg::Gbt => ModelKind::Gbt,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SchemaArg {
    Aasm,
    Rk,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum FormatArg {
    #[default]
    Text,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse EDF recordings and label files into epoch stores.
    Ingest {
        /// Directory of `.edf` recordings.
        #[arg(long)]
        edf_dir: PathBuf,
        /// Directory of `<stem>.txt` label files (defaults to --edf-dir).
        #[arg(long)]
        label_dir: Option<PathBuf>,
        /// Annotation schema of the label files (default aasm).
        #[arg(long, value_enum)]
        schema: Option<SchemaArg>,
        /// Epoch length in seconds (default 30).
        #[arg(long)]
        epoch_len: Option<f64>,
    },
    /// Compute a feature catalog for every epoch store.
    Features {
        /// Directory of epoch stores.
        #[arg(long)]
        store: PathBuf,
        /// Feature catalog (default featshort).
        #[arg(long, value_enum)]
        catalog: Option<CatalogArg>,
    },
    /// Rank feature columns by ANOVA F and keep the top fraction.
    Select {
        /// Feature stores of the training subjects.
        #[arg(long)]
        features: PathBuf,
        /// Fraction of columns kept (default 0.9 for featshort, 0.1 for featlong).
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Generate synthetic embeddings from feature stores.
    EmbedSynth {
        /// Directory of feature stores; the full catalog of each is embedded.
        #[arg(long)]
        features: PathBuf,
        /// Embedding dimension (default 512).
        #[arg(long)]
        dim: Option<usize>,
        /// Standard deviation of added Gaussian noise (default 0).
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Fit the ridge projection from embeddings onto (selected) features.
    Project {
        #[command(flatten)]
        data: DataArgs,
        /// Selection mask from `select`; all catalog columns are used when absent.
        #[arg(long)]
        selection: Option<PathBuf>,
        /// Ridge penalty (default 1).
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Train a classifier on the normalized representation.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Projection file from `project`.
        #[arg(long)]
        projection: PathBuf,
        /// Classifier (default logistic).
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
    /// Score a trained classifier.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Projection file from `project`.
        #[arg(long)]
        projection: PathBuf,
        /// Model file from `train`.
        #[arg(long)]
        model_file: PathBuf,
        /// Dataset name recorded in the evaluation.
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Shapley attributions and per-stage importance rankings.
    Explain {
        #[command(flatten)]
        data: DataArgs,
        /// Feature stores whose representation mean is the attribution reference.
        #[arg(long)]
        background: Option<PathBuf>,
        /// Projection file from `project`.
        #[arg(long)]
        projection: PathBuf,
        /// Model file from `train`.
        #[arg(long)]
        model_file: PathBuf,
        /// Number of rows to attribute (default 100).
        #[arg(long)]
        samples: Option<usize>,
        /// Permutations per row when sampling is used (default 64).
        #[arg(long)]
        permutations: Option<usize>,
        /// Features listed per stage in the importance ranking (default 10).
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Run the whole pipeline and write a manifest.
    Run(RunArgs),
    /// Compare runs in an accuracy / macro F1 / kappa table.
    Report {
        /// Run directories or their manifest.json files.
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        /// Table format.
        #[arg(long, value_enum, default_value_t)]
        format: FormatArg,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Embedding store aligned with the feature stores.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Directory of feature stores.
    #[arg(long)]
    pub features: PathBuf,
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Directory of epoch stores written by `ingest`.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// EDF directory to ingest before running (ignored when --store is given).
    #[arg(long)]
    pub edf_dir: Option<PathBuf>,
    /// Directory of `<stem>.txt` label files (defaults to --edf-dir).
    #[arg(long)]
    pub label_dir: Option<PathBuf>,
    /// Feature catalog (default featshort).
    #[arg(long, value_enum)]
    pub catalog: Option<CatalogArg>,
    /// Fraction of catalog columns kept by ANOVA selection (default 0.9 for featshort, 0.1 for featlong).
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Fraction of subjects assigned to the training split (default 0.8).
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// External embedding store; synthetic embeddings are generated when absent.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Synthetic embedding dimension (default 512).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Standard deviation of Gaussian noise added to synthetic embeddings (default 0).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Ridge penalty of the projection (default 1).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Classifier (default logistic).
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Dataset name recorded in the report.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Variant name recorded in the report (default `<catalog>-<model>`).
    #[arg(long)]
    pub variant: Option<String>,
    /// Skip the Shapley explanation stage.
    #[arg(long)]
    pub no_explain: bool,
}

impl RunArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = &self.store {
            cfg.input.store = Some(v.clone());
        }
        if let Some(v) = &self.edf_dir {
            cfg.input.edf_dir = Some(v.clone());
        }
        if let Some(v) = &self.label_dir {
            cfg.input.label_dir = Some(v.clone());
        }
        if let Some(v) = self.catalog {
            cfg.features.catalog = v.into();
        }
        if let Some(v) = self.fraction {
            cfg.features.fraction = Some(v);
        }
        if let Some(v) = self.train_fraction {
            cfg.split.train_fraction = v;
        }
        if let Some(v) = &self.embeddings {
            cfg.embeddings.source = EmbeddingSource::ExternalFile;
            cfg.embeddings.path = Some(v.clone());
        }
        if let Some(v) = self.dim {
            cfg.embeddings.dim = v;
        }
        if let Some(v) = self.noise {
            cfg.embeddings.noise = v;
        }
        if let Some(v) = self.lambda {
            cfg.projection.lambda = v;
        }
        if let Some(v) = self.model {
            cfg.model.kind = v.into();
        }
        if let Some(v) = &self.dataset {
            cfg.dataset = v.clone();
        }
        if let Some(v) = &self.variant {
            cfg.variant = Some(v.clone());
        }
        if self.no_explain {
            cfg.explain.enabled = false;
        }
    }
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --out <DIR>".into()))
}

/// Executes a parsed command, returning the lines to print on success.
pub fn execute(cli: &Cli) -> Result<Vec<String>> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Ingest {
            edf_dir,
            label_dir,
            schema,
            epoch_len,
        } => {
            let out = out_dir(cli)?;
            if let Some(s) = schema {
                cfg.input.schema = match s {
                    SchemaArg::Aasm => AnnotationSchema::Aasm,
                    SchemaArg::Rk => AnnotationSchema::Rk,
                };
            }
            let summary = cmd_ingest(&IngestOptions {
                edf_dir,
                label_dir: label_dir.as_deref().or(cfg.input.label_dir.as_deref()),
                out_store: out,
                schema: cfg.input.schema,
                epoch_len_s: epoch_len.unwrap_or(cfg.input.epoch_len_s),
            })?;
            let mut lines: Vec<String> = summary
                .stored
                .iter()
                .map(|s| format!("stored {} ({} epochs) from {}", s.store, s.epochs, s.source))
                .collect();
            lines.extend(
                summary
                    .ledger
                    .iter()
                    .map(|l| format!("rejected {}: {}", l.file, l.error)),
            );
            if !summary.ledger.is_empty() {
                for l in &lines {
                    eprintln!("{l}");
                }
                return Err(CliError::PartialIngest {
                    stored: summary.stored.len(),
                    rejected: summary.ledger.len(),
                    ledger: out.join(LEDGER_FILE),
                });
            }
            Ok(lines)
        }
        Command::Features { store, catalog } => {
            let catalog = catalog.map_or(cfg.features.catalog, Catalog::from);
            let written = cmd_features(store, catalog, out_dir(cli)?)?;
            Ok(vec![format!("wrote {} feature store(s)", written.len())])
        }
        Command::Select { features, fraction } => {
            if let Some(f) = fraction {
                cfg.features.fraction = Some(*f);
            }
            cfg.validate()?;
            let mask = cmd_select(features, cfg.features.effective_fraction(), out_dir(cli)?)?;
            Ok(vec![format!(
                "kept {} of {} features",
                mask.kept_indices.len(),
                mask.descriptor_names.len()
            )])
        }
        Command::EmbedSynth { features, dim, noise } => {
            let path = cmd_embed_synth(
                features,
                dim.unwrap_or(cfg.embeddings.dim),
                noise.unwrap_or(cfg.embeddings.noise),
                cfg.seed,
                out_dir(cli)?,
            )?;
            Ok(vec![format!("wrote {}", path.display())])
        }
        Command::Project {
            data,
            selection,
            lambda,
        } => {
            let lambda = lambda.unwrap_or(cfg.projection.lambda);
            let m = cmd_project(
                &data.embeddings,
                &data.features,
                selection.as_deref(),
                lambda,
                out_dir(cli)?,
            )?;
            Ok(vec![format!(
                "fitted {} x {} projection (lambda {lambda})",
                m.embedding_dim(),
                m.n_features()
            )])
        }
        Command::Train {
            data,
            projection,
            model,
        } => {
            if let Some(m) = model {
                cfg.model.kind = (*m).into();
            }
            let m = cmd_train(&data.embeddings, &data.features, projection, &cfg.model, out_dir(cli)?)?;
            Ok(vec![format!("trained {} model", m.kind())])
        }
        Command::Evaluate {
            data,
            projection,
            model_file,
            dataset,
        } => {
            let dataset = dataset.as_deref().unwrap_or(&cfg.dataset);
            let r = cmd_evaluate(
                &data.embeddings,
                &data.features,
                projection,
                model_file,
                dataset,
                out_dir(cli)?,
            )?;
            Ok(vec![format!(
                "accuracy {:.3}  macro F1 {:.3}  kappa {:.3}  (n = {})",
                r.report.accuracy, r.report.macro_f1, r.report.kappa, r.report.n
            )])
        }
        Command::Explain {
            data,
            background,
            projection,
            model_file,
            samples,
            permutations,
            top_k,
        } => {
            if let Some(v) = samples {
                cfg.explain.max_samples = *v;
            }
            if let Some(v) = permutations {
                cfg.explain.n_permutations = *v;
            }
            if let Some(v) = top_k {
                cfg.explain.top_k = *v;
            }
            cmd_explain(
                &data.embeddings,
                &data.features,
                background.as_deref(),
                projection,
                model_file,
                &cfg.explain,
                cfg.seed,
                out_dir(cli)?,
            )?;
            Ok(vec!["wrote attributions and importance rankings".into()])
        }
        Command::Run(args) => {
            args.apply(&mut cfg);
            let out = out_dir(cli)?;
            let m = cmd_run(&cfg, out)?;
            let report: crate::pipeline::RunReport = crate::artifacts::read_json(&out.join(&m.outputs["report"]))?;
            Ok(vec![
                format!(
                    "{} on {}: accuracy {:.3}  macro F1 {:.3}  kappa {:.3}",
                    report.variant, report.dataset, report.test.accuracy, report.test.macro_f1, report.test.kappa
                ),
                format!("manifest: {}", out.join(crate::artifacts::MANIFEST_FILE).display()),
            ])
        }
        Command::Report { manifests, format } => {
            let format = match format {
                FormatArg::Text => TableFormat::Text,
                FormatArg::Csv => TableFormat::Csv,
            };
            let table = cmd_report(manifests, format)?;
            match &cli.out {
                Some(path) => {
                    atomic_write(path, table.as_bytes())?;
                    Ok(vec![format!("wrote {}", path.display())])
                }
                None => Ok(table.lines().map(str::to_string).collect()),
            }
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
