use std::path::{Path, PathBuf};

use sleepstage::synthetic::{write_fixture_dir, SyntheticConfig};
use sleepstage_cli::artifacts::{read_json, IMPORTANCE_FILE, MANIFEST_FILE, REPORT_FILE};
use sleepstage_cli::error::{EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
use sleepstage_cli::fsutil::sha256_file;
use sleepstage_cli::{cmd_ingest, cmd_run, run_cli, IngestOptions, RunConfig, RunManifest, RunReport, STAGE_ORDER};
use tempfile::TempDir;

fn corpus(dir: &Path, n_subjects: usize, epochs: usize, seed: u64) {
    let cfg = SyntheticConfig {
        n_subjects,
        epochs_per_subject: epochs,
        seed,
        ..Default::default()
    };
    write_fixture_dir(dir, &cfg).unwrap();
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn cli(args: &[&str]) -> i32 {
    run_cli(std::iter::once("sleepstage").chain(args.iter().copied()))
}

fn ingested(n_subjects: usize, epochs: usize) -> (TempDir, PathBuf) {
    let tmp = TempDir::new().unwrap();
    let edf = tmp.path().join("edf");
    corpus(&edf, n_subjects, epochs, 3);
    let store = tmp.path().join("store");
    assert_eq!(cli(&["ingest", "--edf-dir", &s(&edf), "--out", &s(&store)]), EXIT_OK);
    (tmp, store)
}

#[test]
fn ingest_reports_partial_success_with_a_ledger() {
    let tmp = TempDir::new().unwrap();
    let edf = tmp.path().join("edf");
    corpus(&edf, 2, 4, 1);
    std::fs::write(edf.join("BROKEN.edf"), b"0       not an edf header").unwrap();
    std::fs::write(edf.join("BROKEN.txt"), "0\tW\n").unwrap();
    let store = tmp.path().join("store");
    let summary = cmd_ingest(&IngestOptions {
        edf_dir: &edf,
        label_dir: None,
        out_store: &store,
        schema: sleepstage::psg_io::AnnotationSchema::Aasm,
        epoch_len_s: 30.0,
    })
    .unwrap();
    assert_eq!(summary.stored.len(), 2);
    assert_eq!(summary.ledger.len(), 1);
    assert_eq!(summary.ledger[0].file, "BROKEN.edf");
    assert_eq!(cli(&["ingest", "--edf-dir", &s(&edf), "--out", &s(&store)]), EXIT_DATA);
    assert!(store.join("ingest_ledger.json").is_file());
}

#[test]
fn ingest_of_empty_directory_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("store");
    assert_eq!(
        cli(&["ingest", "--edf-dir", &s(tmp.path()), "--out", &s(&out)]),
        EXIT_USAGE
    );
}

#[test]
fn missing_label_file_is_a_ledger_entry() {
    let tmp = TempDir::new().unwrap();
    let edf = tmp.path().join("edf");
    corpus(&edf, 2, 4, 1);
    std::fs::remove_file(edf.join("SYN001.txt")).unwrap();
    let store = tmp.path().join("store");
    assert_eq!(cli(&["ingest", "--edf-dir", &s(&edf), "--out", &s(&store)]), EXIT_DATA);
    assert!(store.join("SYN000.epochs").is_file());
    assert!(!store.join("SYN001.epochs").exists());
}

#[test]
fn reingesting_unchanged_inputs_gives_identical_stores() {
    let tmp = TempDir::new().unwrap();
    let edf = tmp.path().join("edf");
    corpus(&edf, 2, 4, 5);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(cli(&["ingest", "--edf-dir", &s(&edf), "--out", &s(&a)]), EXIT_OK);
    assert_eq!(cli(&["ingest", "--edf-dir", &s(&edf), "--out", &s(&b)]), EXIT_OK);
    for name in ["SYN000.epochs", "SYN001.epochs"] {
        assert_eq!(sha256_file(&a.join(name)).unwrap(), sha256_file(&b.join(name)).unwrap());
    }
}

#[test]
fn run_smoke_writes_report_importance_and_ordered_manifest() {
    let (tmp, store) = ingested(5, 20);
    let out = tmp.path().join("run");
    let code = cli(&[
        "run",
        "--store",
        &s(&store),
        "--catalog",
        "featshort",
        "--model",
        "logistic",
        "--seed",
        "7",
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.join(REPORT_FILE).is_file());
    let importance = std::fs::read_to_string(out.join(IMPORTANCE_FILE)).unwrap();
    assert!(importance.starts_with("stage,rank,feature,mean_abs_attribution\n"));
    let m: RunManifest = read_json(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.config.seed, 7);
    let expected: Vec<&str> = STAGE_ORDER[1..].to_vec();
    assert_eq!(m.stage_names(), expected);
    assert_eq!(m.summary.catalog_features, 38);
    assert_eq!(m.summary.selected_features, 34);
    assert_eq!(m.inputs.len(), 5);
    for (key, hash) in &m.output_hashes {
        assert_eq!(&sha256_file(&out.join(&m.outputs[key])).unwrap(), hash);
    }
    let r: RunReport = read_json(&out.join(REPORT_FILE)).unwrap();
    assert_eq!(r.selected_features.len(), 34);
    assert!(r.test.accuracy > 0.8, "accuracy {}", r.test.accuracy);
}

#[test]
fn run_from_edf_directory_records_the_ingest_stage() {
    let tmp = TempDir::new().unwrap();
    let edf = tmp.path().join("edf");
    corpus(&edf, 3, 6, 2);
    let out = tmp.path().join("run");
    let code = cli(&["run", "--edf-dir", &s(&edf), "--model", "tree", "--out", &s(&out)]);
    assert_eq!(code, EXIT_OK);
    let m: RunManifest = read_json(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.stage_names(), STAGE_ORDER.to_vec());
    assert!(out.join("epochs/SYN000.epochs").is_file());
}

#[test]
fn isruc_layout_with_fraction_point_nine_selects_78() {
    let tmp = TempDir::new().unwrap();
    let edf = tmp.path().join("edf");
    let channels = [
        "F3-A2", "C3-A2", "F4-A1", "C4-A1", "O1-A2", "O2-A1", "ROC-A1", "LOC-A2", "Chin-EMG",
    ];
    let cfg = SyntheticConfig {
        n_subjects: 3,
        epochs_per_subject: 6,
        sampling_hz: 200,
        channels: channels.iter().map(|c| c.to_string()).collect(),
        seed: 4,
        ..Default::default()
    };
    write_fixture_dir(&edf, &cfg).unwrap();
    let mut run = RunConfig::default();
    run.input.edf_dir = Some(edf);
    run.features.fraction = Some(0.9);
    run.explain.enabled = false;
    let m = cmd_run(&run, &tmp.path().join("run")).unwrap();
    assert_eq!(m.summary.catalog_features, 87);
    assert_eq!(m.summary.selected_features, 78);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let (tmp, store) = ingested(3, 6);
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "seed = 11\ndataset = \"fixture\"\n[input]\nstore = {:?}\n[model]\nkind = \"tree\"\n[explain]\nenabled = false\n",
            s(&store)
        ),
    )
    .unwrap();
    let out = tmp.path().join("run");
    let code = cli(&[
        "--config",
        &s(&config),
        "run",
        "--model",
        "logistic",
        "--seed",
        "12",
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let m: RunManifest = read_json(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.config.seed, 12);
    assert_eq!(m.config.dataset, "fixture");
    assert_eq!(m.config.model.kind, sleepstage::models::ModelKind::Logistic);
    assert!(!m.stage_names().contains(&"explain"));
}

#[test]
fn bad_config_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, "[model]\nkind = \"svm\"\n").unwrap();
    assert_eq!(
        cli(&["--config", &s(&config), "run", "--out", &s(tmp.path())]),
        EXIT_USAGE
    );
}

#[test]
fn singular_projection_exits_with_numerical_code() {
    let (tmp, store) = ingested(3, 4);
    let out = tmp.path().join("run");
    let code = cli(&[
        "run",
        "--store",
        &s(&store),
        "--lambda",
        "0",
        "--dim",
        "64",
        "--out",
        &s(&out),
    ]);
    assert_eq!(code, EXIT_NUMERICAL);
    assert!(out.join("selection.json").is_file());
    assert!(!out.join(MANIFEST_FILE).exists());
}

#[test]
fn stage_subcommands_chain_into_an_evaluation() {
    let (tmp, store) = ingested(4, 10);
    let p = |n: &str| s(&tmp.path().join(n));
    assert_eq!(
        cli(&["features", "--store", &s(&store), "--out", &p("features")]),
        EXIT_OK
    );
    assert!(tmp.path().join("features/catalog.json").is_file());
    assert_eq!(
        cli(&[
            "select",
            "--features",
            &p("features"),
            "--fraction",
            "0.5",
            "--out",
            &p("sel")
        ]),
        EXIT_OK
    );
    assert_eq!(
        cli(&[
            "embed-synth",
            "--features",
            &p("features"),
            "--dim",
            "64",
            "--seed",
            "3",
            "--out",
            &p("emb")
        ]),
        EXIT_OK
    );
    let emb = p("emb/embeddings.nise");
    let sel = p("sel/selection.json");
    let proj = p("proj/projection.nipm");
    let model = p("model/model.bin");
    let data = ["--embeddings", emb.as_str(), "--features", &p("features")];
    let with = |extra: &[&str]| -> i32 {
        let args: Vec<&str> = extra[..1].iter().chain(&data).chain(&extra[1..]).copied().collect();
        cli(&args)
    };
    assert_eq!(with(&["project", "--selection", &sel, "--out", &p("proj")]), EXIT_OK);
    assert_eq!(
        with(&["train", "--projection", &proj, "--model", "gbt", "--out", &p("model")]),
        EXIT_OK
    );
    assert_eq!(
        with(&[
            "evaluate",
            "--projection",
            &proj,
            "--model-file",
            &model,
            "--out",
            &p("eval")
        ]),
        EXIT_OK
    );
    assert_eq!(
        with(&[
            "explain",
            "--projection",
            &proj,
            "--model-file",
            &model,
            "--samples",
            "3",
            "--permutations",
            "8",
            "--out",
            &p("explain"),
        ]),
        EXIT_OK
    );
    let record: sleepstage::metrics::EvalRecord = read_json(&tmp.path().join("eval/evaluation.json")).unwrap();
    assert_eq!(record.model, "gbt");
    assert_eq!(record.report.n, 40);
    let attributions = std::fs::read_to_string(tmp.path().join("explain/attributions.csv")).unwrap();
    assert_eq!(attributions.lines().count(), 1 + 3 * 5);
}

#[test]
fn external_embeddings_must_match_the_epoch_store() {
    let (tmp, store) = ingested(3, 6);
    let p = |n: &str| s(&tmp.path().join(n));
    assert_eq!(
        cli(&["features", "--store", &s(&store), "--out", &p("features")]),
        EXIT_OK
    );
    assert_eq!(
        cli(&[
            "embed-synth",
            "--features",
            &p("features"),
            "--dim",
            "48",
            "--out",
            &p("emb")
        ]),
        EXIT_OK
    );
    let emb = p("emb/embeddings.nise");
    assert_eq!(
        cli(&["run", "--store", &s(&store), "--embeddings", &emb, "--out", &p("ok")]),
        EXIT_OK
    );
    let m: RunManifest = read_json(&tmp.path().join("ok").join(MANIFEST_FILE)).unwrap();
    assert!(m.inputs.contains_key("embeddings/embeddings.nise"));

    let (other_tmp, other_store) = ingested(3, 7);
    let code = cli(&[
        "run",
        "--store",
        &s(&other_store),
        "--embeddings",
        &emb,
        "--out",
        &p("bad"),
    ]);
    assert_eq!(code, EXIT_DATA);
    drop(other_tmp);
}

fn run_variant(store: &Path, out: &Path, dataset: &str, model: &str) -> PathBuf {
    let code = cli(&[
        "run",
        "--store",
        &s(store),
        "--model",
        model,
        "--dataset",
        dataset,
        "--no-explain",
        "--out",
        &s(out),
    ]);
    assert_eq!(code, EXIT_OK);
    out.join(MANIFEST_FILE)
}

#[test]
fn report_builds_comparison_tables() {
    let (tmp, store) = ingested(4, 8);
    let a = run_variant(&store, &tmp.path().join("a"), "alpha", "logistic");
    let single = sleepstage_cli::cmd_report(std::slice::from_ref(&a), sleepstage::metrics::TableFormat::Text).unwrap();
    assert_eq!(
        single
            .lines()
            .filter(|l| l.starts_with("FeatShort-Logistic Regression"))
            .count(),
        1
    );
    assert!(single
        .lines()
        .any(|l| l.starts_with("FeatShort-Logistic Regression") && l.ends_with('*')));
    assert!(single.contains("* Average Performance"));

    let b = run_variant(&store, &tmp.path().join("b"), "beta", "logistic");
    let both = sleepstage_cli::cmd_report(&[a.clone(), b.clone()], sleepstage::metrics::TableFormat::Csv).unwrap();
    let row = both.lines().find(|l| l.starts_with("FeatShort")).unwrap();
    let cells: Vec<f64> = row.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells.len(), 7);
    let mean = cells[..6].iter().sum::<f64>() / 6.0;
    assert!((cells[6] - (mean * 1000.0).round() / 1000.0).abs() < 2e-3);

    let mut m: serde_json::Value = serde_json::from_slice(&std::fs::read(&b).unwrap()).unwrap();
    m["tool_version"] = "9.9.9".into();
    std::fs::write(&b, serde_json::to_vec(&m).unwrap()).unwrap();
    let warned = sleepstage_cli::cmd_report(&[a.clone(), b], sleepstage::metrics::TableFormat::Text).unwrap();
    assert!(warned.starts_with("WARNING: manifests come from different tool versions"));

    let table = tmp.path().join("table.txt");
    assert_eq!(
        cli(&["report", &s(&tmp.path().join("a")), "--out", &s(&table)]),
        EXIT_OK
    );
    assert!(std::fs::read_to_string(&table).unwrap().contains("Average Performance"));
}

#[test]
fn report_lists_missing_files() {
    let (tmp, store) = ingested(3, 6);
    let a = run_variant(&store, &tmp.path().join("a"), "alpha", "tree");
    std::fs::remove_file(tmp.path().join("a").join(REPORT_FILE)).unwrap();
    let ghost = tmp.path().join("ghost/manifest.json");
    let err = sleepstage_cli::cmd_report(&[a.clone(), ghost], sleepstage::metrics::TableFormat::Text).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("report.json") && msg.contains("ghost"), "{msg}");
    assert_eq!(cli(&["report", &s(&a)]), EXIT_DATA);
}
