//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sleepstage::embed::{EmbeddingMatrix, EmbeddingSource};
use sleepstage::explain::{shap_exact_enum, shap_linear, shap_sampling, MarginFn};
use sleepstage::features::{band_power, extract, welch_psd, BandDefinition, Catalog, FeatureMatrix};
use sleepstage::metrics::{average_of, evaluate};
use sleepstage::models::{logistic_gradient, logistic_objective, train_gbt, train_logistic, Classifier, GbtConfig};
use sleepstage::models::{LogisticConfig, ModelKind};
use sleepstage::project::{fit_projection, ridge_gradient, ridge_solve};
use sleepstage::psg_io::{parse_edf, write_epoch_store, Epoch, EpochedRecord, SleepStage};
use sleepstage::select::{anova_f, kept_count};
use sleepstage::synthetic::{generate, SyntheticConfig};
use sleepstage_cli::artifacts::{
    ATTRIBUTIONS_FILE, IMPORTANCE_FILE, MODEL_FILE, PROJECTION_FILE, REPORT_FILE, SELECTION_FILE,
};
use sleepstage_cli::{cmd_run, RunConfig, RunReport};
use sleepstage_oracle::{
    anova_f_exact, calibrate, central_gradient, edf_bytes, max_abs, max_abs_diff, ridge_normal_equations,
    shapley_all_permutations, FixtureSignal,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, detail: String) -> Outcome {
    let t = start.elapsed();
    check(
        t < limit,
        format!("{detail}; {:.2} s of {} s", t.as_secs_f64(), limit.as_secs()),
    )
}

fn stage(i: usize) -> SleepStage {
    SleepStage::from_index(i).unwrap()
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn selection_counts() -> Outcome {
    let start = Instant::now();
    let cases = [(2488, 0.10, 249), (1048, 0.10, 105), (87, 0.90, 78), (38, 0.90, 34)];
    let got: Vec<usize> = cases.iter().map(|&(p, f, _)| kept_count(p, f)).collect();
    let want: Vec<usize> = cases.iter().map(|c| c.2).collect();
    if got != want {
        return Err(format!("kept counts {got:?}, expected {want:?}"));
    }
    within(Duration::from_secs(1), start, format!("kept counts {got:?}"))
}

struct RidgeCase {
    e: Array2<f64>,
    f: Array2<f64>,
    lambda: f64,
}

fn ridge_cases() -> Vec<RidgeCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..100)
        .map(|i| {
            let n = rng.random_range(2..=100);
            let d = rng.random_range(1..=16);
            let p = rng.random_range(1..=8);
            RidgeCase {
                e: Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0)),
                f: Array2::from_shape_fn((n, p), |_| rng.random_range(-5.0..5.0)),
                lambda: [0.01, 0.1, 1.0][i % 3],
            }
        })
        .collect()
}

fn ridge_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for c in ridge_cases() {
        let t = ridge_solve(&c.e, &c.f, c.lambda).map_err(|e| e.to_string())?;
        let oracle =
            ridge_normal_equations(&to_rows(&c.e), &to_rows(&c.f), c.lambda).ok_or("oracle found no solution")?;
        let flat: Vec<f64> = oracle.into_iter().flatten().collect();
        worst = worst.max(max_abs_diff(t.as_slice().unwrap(), &flat));
    }
    if worst > 1e-8 {
        return Err(format!("max |T - T_exact| = {worst:.3e} > 1e-8"));
    }
    within(
        Duration::from_secs(10),
        start,
        format!("100 instances, max |T - T_exact| = {worst:.3e}"),
    )
}

fn ridge_optimality() -> Outcome {
    let mut worst: f64 = 0.0;
    for c in ridge_cases() {
        let t = ridge_solve(&c.e, &c.f, c.lambda).map_err(|e| e.to_string())?;
        let g = ridge_gradient(&c.e, &c.f, &t, c.lambda);
        let scale = 2.0 * max_abs(c.e.t().dot(&c.f).as_slice().unwrap()).max(1e-300);
        worst = worst.max(max_abs(g.as_slice().unwrap()) / scale);
    }
    check(
        worst <= 1e-6,
        format!("max |grad| / (2 max |E^T F|) = {worst:.3e} over 100 instances"),
    )
}

fn named(p: usize) -> Vec<sleepstage::features::FeatureDescriptor> {
    use sleepstage::features::{FeatureDescriptor, FeatureKind, Measure, Window};
    (0..p)
        .map(|j| {
            FeatureDescriptor::new(
                &format!("f{j}"),
                Window::Full,
                FeatureKind::Statistical,
                Measure::Mean,
                None,
            )
            .unwrap()
        })
        .collect()
}

fn normalization_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut worst_mean, mut worst_sd, mut frozen_seen): (f64, f64, usize) = (0.0, 0.0, 0);
    for case in 0..50 {
        let n = rng.random_range(3..80);
        let d = rng.random_range(1..12);
        let p = rng.random_range(1..6);
        let mut e = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0) * 10f64.powi(case % 4));
        if case % 7 == 0 {
            e.fill(1.0);
        }
        let f = Array2::from_shape_fn((n, p), |_| rng.random_range(-4.0..4.0));
        let em = EmbeddingMatrix::new(e, EmbeddingSource::Synthetic).map_err(|e| e.to_string())?;
        let fm = FeatureMatrix::new(named(p), f, None).map_err(|e| e.to_string())?;
        let model = fit_projection(&em, &fm, 0.1).map_err(|e| e.to_string())?;
        let r = model.transform(&em).map_err(|e| e.to_string())?.values;
        for (j, col) in r.columns().into_iter().enumerate() {
            if model.frozen[j] {
                frozen_seen += 1;
                continue;
            }
            let mean = col.mean().unwrap();
            let sd = (col.mapv(|v| (v - mean).powi(2)).mean().unwrap()).sqrt();
            worst_mean = worst_mean.max(mean.abs());
            worst_sd = worst_sd.max((sd - 1.0).abs());
        }
    }
    check(
        worst_mean <= 1e-8 && worst_sd <= 1e-6,
        format!("max |mean| = {worst_mean:.2e}, max |sd - 1| = {worst_sd:.2e}, {frozen_seen} frozen columns exempt"),
    )
}

fn first_eeg_band_rule(fm: &FeatureMatrix<f64>) -> Result<Vec<SleepStage>, String> {
    let names = fm.names();
    let col = |band: &str| -> Result<usize, String> {
        let key = format!("EEG Fpz-Cz|full|band_power_rel|power|{band}");
        names
            .iter()
            .position(|n| *n == key)
            .ok_or(format!("missing column {key}"))
    };
    let (a, t, s, d, b) = (col("alpha")?, col("theta")?, col("sigma")?, col("delta")?, col("beta")?);
    Ok(fm
        .values()
        .rows()
        .into_iter()
        .map(|r| {
            let scores = [r[a], r[t], r[s], r[d], r[b] - r[a] - r[s]];
            stage(sleepstage::models::argmax(scores))
        })
        .collect())
}

/// Writes epoch stores whose labels follow a fixed rule on FeatShort band powers.
fn rule_labelled_stores(dir: &Path) -> Result<(), String> {
    let cfg = SyntheticConfig {
        n_subjects: 10,
        epochs_per_subject: 40,
        seed: 5,
        ..Default::default()
    };
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    for subject in generate(&cfg).map_err(|e| e.to_string())? {
        let labels: Vec<_> = subject
            .stages
            .iter()
            .map(|&s| sleepstage::psg_io::EpochLabel::Stage(s))
            .collect();
        let rec = sleepstage::psg_io::epoch_record(&subject.record, &labels, 30.0).map_err(|e| e.to_string())?;
        let fm = extract::<f64>(Catalog::FeatShort, &rec).map_err(|e| e.to_string())?;
        let rule = first_eeg_band_rule(&fm)?;
        let epochs: Vec<Epoch> = rec
            .epochs()
            .iter()
            .zip(rule)
            .map(|(e, l)| Epoch {
                label: Some(l),
                ..e.clone()
            })
            .collect();
        let relabelled =
            EpochedRecord::new(rec.subject_id(), 30.0, rec.channels().to_vec(), epochs).map_err(|e| e.to_string())?;
        let mut bytes = Vec::new();
        write_epoch_store(&relabelled, &mut bytes).map_err(|e| e.to_string())?;
        std::fs::write(dir.join(format!("{}.epochs", rec.subject_id())), bytes).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn synthetic_recovery() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = tmp.path().join("store");
    rule_labelled_stores(&store)?;
    let mut cfg = RunConfig::default();
    cfg.input.store = Some(store);
    cfg.embeddings.noise = 0.0;
    cfg.projection.lambda = 1e-8;
    cfg.model.kind = ModelKind::Logistic;
    cfg.model.logistic.l2 = 1e-6;
    cfg.model.logistic.max_iter = 5000;
    cfg.explain.enabled = false;
    cfg.seed = 7;
    let out = tmp.path().join("run");
    let m = cmd_run(&cfg, &out).map_err(|e| e.to_string())?;
    let r: RunReport = serde_json::from_slice(&std::fs::read(out.join(REPORT_FILE)).unwrap()).unwrap();
    let acc = r.test.accuracy;
    if acc < 0.99 {
        return Err(format!(
            "held-out accuracy {acc:.4} < 0.99 on {} test epochs",
            m.summary.test_epochs
        ));
    }
    within(
        Duration::from_secs(60),
        start,
        format!("held-out accuracy {acc:.4} on {} test epochs", m.summary.test_epochs),
    )
}

fn spectral_correctness() -> Outcome {
    let fs = 100.0;
    let sine: Vec<f64> = (0..3000)
        .map(|i| (std::f64::consts::TAU * 2.0 * i as f64 / fs).sin())
        .collect();
    let psd = welch_psd(&sine, fs, 5.0, 0.5).map_err(|e| e.to_string())?;
    let delta = band_power(&psd, &BandDefinition::named("delta").unwrap(), true).map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noise: Vec<f64> = (0..30_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let npsd = welch_psd(&noise, fs, 5.0, 0.5).map_err(|e| e.to_string())?;
    let partition_sum: f64 = BandDefinition::partition(fs / 2.0)
        .iter()
        .map(|b| band_power(&npsd, b, true).unwrap())
        .sum();
    let mean = noise.iter().sum::<f64>() / noise.len() as f64;
    let var = noise.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / noise.len() as f64;
    let parseval = npsd.total_power() / var;
    check(
        delta >= 0.98 && (partition_sum - 1.0).abs() <= 1e-6 && (parseval - 1.0).abs() <= 0.05,
        format!(
            "2 Hz relative delta {delta:.5}, partition sum {partition_sum:.9}, total power / variance {parseval:.4}"
        ),
    )
}

fn metric_oracles() -> Outcome {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (t, p, k) in [(0, 0, 40), (0, 1, 10), (1, 0, 10), (1, 1, 40)] {
        truth.extend(std::iter::repeat_n(stage(t), k));
        pred.extend(std::iter::repeat_n(stage(p), k));
    }
    let kappa = evaluate(&truth, &pred).map_err(|e| e.to_string())?.kappa;
    let constant = vec![stage(0); truth.len()];
    let kappa0 = evaluate(&truth, &constant).map_err(|e| e.to_string())?.kappa;
    let a = average_of(&[0.855, 0.807, 0.801, 0.783, 0.800, 0.748]).map_err(|e| e.to_string())?;
    let b = average_of(&[0.836, 0.750, 0.777, 0.712, 0.773, 0.675]).map_err(|e| e.to_string())?;
    check(
        (kappa - 0.6).abs() < 1e-12 && kappa0 == 0.0 && a == 0.799 && b == 0.754,
        format!("kappa {kappa:.12}, single-class kappa {kappa0}, averages {a:.3} and {b:.3}"),
    )
}

fn anova_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=5);
        let n = rng.random_range(k + 1..30);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let groups: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        let labels: Vec<SleepStage> = groups.iter().map(|&g| stage(g)).collect();
        let got = anova_f(&values, &labels).map_err(|e| e.to_string())?;
        let want = anova_f_exact(&values, &groups).ok_or("oracle undefined")?;
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
    }
    check(
        worst <= 1e-10,
        format!("1000 instances, max relative deviation {worst:.2e}"),
    )
}

fn logistic_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (n, p) = (40, 6);
    let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
    let y: Vec<usize> = (0..n).map(|i| i % 5).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let l2 = 0.03;
    let unpack = |theta: &[f64]| {
        let w = Array2::from_shape_vec((5, p), theta[..5 * p].to_vec()).unwrap();
        let b = Array1::from_vec(theta[5 * p..].to_vec());
        (w, b)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let theta: Vec<f64> = (0..5 * p + 5).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (w, b) = unpack(&theta);
        let (gw, gb) = logistic_gradient(&w, &b, &x, &y, &weights, l2);
        let analytic: Vec<f64> = gw.iter().chain(gb.iter()).copied().collect();
        let numeric = central_gradient(
            |t| {
                let (w, b) = unpack(t);
                logistic_objective(&w, &b, &x, &y, &weights, l2)
            },
            &theta,
            1e-5,
        );
        worst = worst.max(max_abs_diff(&analytic, &numeric) / max_abs(&analytic).max(1e-12));
    }
    check(worst <= 1e-5, format!("20 points, max relative deviation {worst:.2e}"))
}

fn shapley_axioms() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();

    // Constructed nonlinear model: features 0 and 1 enter symmetrically, 3 is ignored.
    let p = 7;
    let g = |z: &Array2<f64>| -> sleepstage::Result<Array2<f64>> {
        Ok(Array2::from_shape_fn((z.nrows(), 5), |(i, c)| {
            let r = z.row(i);
            let c = c as f64;
            (r[0] * r[1]) * (1.0 + c) + (r[0] + r[1]).sin() + r[2] * r[4] * r[5] - c * r[6].powi(2) + 0.5 * r[2]
        }))
    };
    let x = Array1::from_vec(vec![0.7, 0.7, -1.2, 5.0, 0.3, 2.0, -0.8]);
    let bg = Array1::from_vec(vec![0.1, 0.1, 0.4, -3.0, -0.5, 1.0, 0.2]);
    let phi = shap_exact_enum(&g as &MarginFn<'_, f64>, x.view(), &bg).map_err(|e| e.to_string())?;
    let fx = g(&x.clone().insert_axis(Axis(0))).unwrap();
    let fb = g(&bg.clone().insert_axis(Axis(0))).unwrap();
    let mut eff: f64 = 0.0;
    let mut oracle_dev: f64 = 0.0;
    for c in 0..5 {
        eff = eff.max((phi.phi.column(c).sum() - (fx[[0, c]] - fb[[0, c]])).abs());
        let value = |mask: u32| {
            let z = Array2::from_shape_fn((1, p), |(_, j)| if mask >> j & 1 == 1 { x[j] } else { bg[j] });
            g(&z).unwrap()[[0, c]]
        };
        let oracle = shapley_all_permutations(p, value);
        oracle_dev = oracle_dev.max(max_abs_diff(&phi.phi.column(c).to_vec(), &oracle));
    }
    let sym = (0..5)
        .map(|c| (phi.phi[[0, c]] - phi.phi[[1, c]]).abs())
        .fold(0.0, f64::max);
    let dummy = (0..5).map(|c| phi.phi[[3, c]].abs()).fold(0.0, f64::max);
    let axioms_ok = eff <= 1e-9 && sym <= 1e-9 && dummy <= 1e-9 && oracle_dev <= 1e-9;
    notes.push(format!(
        "efficiency {eff:.1e}, symmetry {sym:.1e}, dummy {dummy:.1e}, vs permutation oracle {oracle_dev:.1e}"
    ));

    // Linear closed form against enumeration.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let xl = Array2::from_shape_fn((200, 6), |_| rng.random_range(-1.0..1.0));
    let yl: Vec<SleepStage> = xl
        .rows()
        .into_iter()
        .map(|r| stage(sleepstage::models::argmax(r.iter().take(5).copied())))
        .collect();
    let lm = train_logistic(&xl, &yl, &LogisticConfig::default()).map_err(|e| e.to_string())?;
    let names: Vec<String> = (0..6).map(|j| format!("f{j}")).collect();
    let bgl = xl.mean_axis(Axis(0)).unwrap();
    let rows = xl.slice(ndarray::s![..5, ..]).to_owned();
    let lin = shap_linear(&lm, &rows, &bgl, &names).map_err(|e| e.to_string())?;
    let lf = |z: &Array2<f64>| lm.margins(z);
    let mut lin_dev: f64 = 0.0;
    for i in 0..5 {
        let ex = shap_exact_enum(&lf as &MarginFn<'_, f64>, rows.row(i), &bgl).map_err(|e| e.to_string())?;
        let diff = &lin.values.index_axis(Axis(0), i) - &ex.phi;
        lin_dev = lin_dev.max(diff.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    notes.push(format!("linear vs enumeration {lin_dev:.1e}"));

    // Sampling estimator on an 8-feature boosted model.
    let xg = Array2::from_shape_fn((300, 8), |_| rng.random_range(-1.0..1.0));
    let yg: Vec<SleepStage> = xg
        .rows()
        .into_iter()
        .map(|r| {
            stage(((r[0] + r[1] * r[2] > 0.0) as usize) * 2 + (r[3] - r[4] > 0.5) as usize + (r[5] > 0.8) as usize)
        })
        .collect();
    let gbt = train_gbt(
        &xg,
        &yg,
        &GbtConfig {
            n_rounds: 30,
            max_depth: 3,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let gf = |z: &Array2<f64>| gbt.margins(z);
    let bgg = xg.mean_axis(Axis(0)).unwrap();
    let (mut inside, mut total, mut worst_ratio) = (0usize, 0usize, 0.0f64);
    for i in 0..3 {
        let exact = shap_exact_enum(&gf as &MarginFn<'_, f64>, xg.row(i), &bgg).map_err(|e| e.to_string())?;
        let est = shap_sampling(&gf as &MarginFn<'_, f64>, xg.row(i), &bgg, 2000, 100 + i as u64)
            .map_err(|e| e.to_string())?;
        let se = est
            .standard_errors
            .as_ref()
            .ok_or("sampling returned no standard errors")?;
        for ((e, x), s) in est.phi.iter().zip(exact.phi.iter()).zip(se.iter()) {
            let err = (e - x).abs();
            total += 1;
            if err <= 3.0 * s + 1e-12 {
                inside += 1;
            }
            if *s > 0.0 {
                worst_ratio = worst_ratio.max(err / s);
            }
        }
    }
    notes.push(format!(
        "sampling within 3 SE on {inside}/{total} coordinates (worst {worst_ratio:.2} SE)"
    ));
    let ok = axioms_ok && lin_dev <= 1e-9 && inside == total;
    if !ok {
        return Err(notes.join("; "));
    }
    within(Duration::from_secs(120), start, notes.join("; "))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let edf = tmp.path().join("edf");
    let fixture = SyntheticConfig {
        n_subjects: 5,
        epochs_per_subject: 16,
        seed: 21,
        ..Default::default()
    };
    sleepstage::synthetic::write_fixture_dir(&edf, &fixture).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for kind in [ModelKind::Logistic, ModelKind::Gbt] {
        let mut cfg = RunConfig::default();
        cfg.input.edf_dir = Some(edf.clone());
        cfg.model.kind = kind;
        cfg.model.gbt.n_rounds = 20;
        cfg.embeddings.noise = 0.1;
        cfg.explain.max_samples = 8;
        cfg.explain.n_permutations = 16;
        cfg.seed = 7;
        let a = tmp.path().join(format!("{kind}-a"));
        let b = tmp.path().join(format!("{kind}-b"));
        cmd_run(&cfg, &a).map_err(|e| e.to_string())?;
        cmd_run(&cfg, &b).map_err(|e| e.to_string())?;
        for name in [
            REPORT_FILE,
            MODEL_FILE,
            PROJECTION_FILE,
            SELECTION_FILE,
            ATTRIBUTIONS_FILE,
            IMPORTANCE_FILE,
        ] {
            let (x, y) = (
                std::fs::read(a.join(name)).unwrap(),
                std::fs::read(b.join(name)).unwrap(),
            );
            if x != y {
                return Err(format!("{kind}: {name} differs between runs"));
            }
            compared += 1;
        }
    }
    Ok(format!(
        "{compared} artifacts byte-identical across repeated logistic and boosted runs"
    ))
}

fn edf_round_trip() -> Outcome {
    let mk = |label: &str, spr: usize, records: usize, pmin: f64, pmax: f64, dmin: i16, dmax: i16| {
        let span = dmax as i64 - dmin as i64;
        FixtureSignal {
            label: label.into(),
            samples_per_record: spr,
            physical_min: pmin,
            physical_max: pmax,
            digital_min: dmin,
            digital_max: dmax,
            digital: (0..spr * records)
                .map(|i| (dmin as i64 + (i as i64 * 104_729) % (span + 1)) as i16)
                .collect(),
        }
    };
    let signals = [
        mk("EEG Fpz-Cz", 100, 4, -250.0, 250.0, -32768, 32767),
        mk("EOG horizontal", 50, 4, -800.0, 600.0, -2048, 2047),
        mk("EMG submental", 1, 4, 0.0, 10.0, 0, 100),
    ];
    let rec = parse_edf(&edf_bytes("SC4011 X X X", "4", "1", &signals)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut counts = Vec::new();
    for (ch, s) in rec.channels().iter().zip(&signals) {
        if ch.samples.len() != s.digital.len() {
            return Err(format!(
                "{}: {} samples, expected {}",
                s.label,
                ch.samples.len(),
                s.digital.len()
            ));
        }
        counts.push(ch.samples.len());
        for (&v, &d) in ch.samples.iter().zip(&s.digital) {
            let want = calibrate(d, s);
            worst = worst.max((v as f64 - want).abs() / want.abs().max(1.0));
        }
    }
    check(
        worst <= 1e-6,
        format!("sample counts {counts:?}, max relative calibration deviation {worst:.1e}"),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 12] = [
        ("selection-count reproduction", selection_counts),
        ("ridge oracle equivalence", ridge_oracle),
        ("ridge optimality", ridge_optimality),
        ("normalization identity", normalization_identity),
        ("synthetic end-to-end recovery", synthetic_recovery),
        ("spectral correctness", spectral_correctness),
        ("metric oracles", metric_oracles),
        ("ANOVA oracle", anova_oracle),
        ("logistic gradient check", logistic_gradient_check),
        ("Shapley axioms and estimators", shapley_axioms),
        ("run determinism", determinism),
        ("EDF round trip", edf_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  criterion {:>2}  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {:>2}  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
