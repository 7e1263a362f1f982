//! Shapley attributions of per-class margins over the representation
//! dimensions, with per-class importance summaries.
//!
//! The value of a coalition `S` is the model margin at the point taking `x`
//! on `S` and the background mean elsewhere. Linear models are attributed in
//! closed form; any model can be attributed by exact subset enumeration (up
//! to [`MAX_EXACT_FEATURES`] features) or by permutation sampling.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, Array3, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::LogisticModel;
use crate::psg_io::{SleepStage, N_STAGES};
use crate::scalar::Real;

pub const MAX_EXACT_FEATURES: usize = 12;
pub const DEFAULT_TOP_K: usize = 10;

/// Evaluates margins for a batch of rows, returning one column per output.
pub type MarginFn<'a, T> = dyn Fn(&Array2<T>) -> Result<Array2<T>> + 'a;

#[derive(Clone, Debug, PartialEq)]
pub struct AttributionMatrix<T> {
    /// `n x p x classes`.
    pub values: Array3<T>,
    pub base_values: Array1<T>,
    pub feature_names: Vec<String>,
    pub background_mean: Array1<T>,
    /// Monte-Carlo standard errors, present for sampled attributions.
    pub standard_errors: Option<Array3<T>>,
}

/// Attributions for a single row: `p x classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowAttribution<T> {
    pub phi: Array2<T>,
    pub base_values: Array1<T>,
    pub standard_errors: Option<Array2<T>>,
}

fn check_row<T: Real>(x: ArrayView1<T>, background: &Array1<T>) -> Result<()> {
    if x.len() != background.len() {
        return Err(Error::Attribution(format!(
            "row has {} features, background has {}",
            x.len(),
            background.len()
        )));
    }
    Ok(())
}

fn evaluate<T: Real>(f: &MarginFn<'_, T>, rows: &Array2<T>) -> Result<Array2<T>> {
    let out = f(rows)?;
    if out.nrows() != rows.nrows() || out.ncols() == 0 {
        return Err(Error::Attribution("margin function returned a malformed batch".into()));
    }
    Ok(out)
}

/// Closed-form attributions of a linear model:
/// `phi[i, j, c] = W[c, j] (x[i, j] - mean[j])`, base `W[c]·mean + b[c]`.
pub fn shap_linear<T: Real>(
    model: &LogisticModel<T>,
    x: &Array2<T>,
    background_mean: &Array1<T>,
    feature_names: &[String],
) -> Result<AttributionMatrix<T>> {
    let p = model.weights.ncols();
    if x.ncols() != p || background_mean.len() != p || feature_names.len() != p {
        return Err(Error::Attribution(format!(
            "model has {p} features; input has {}, background {}, names {}",
            x.ncols(),
            background_mean.len(),
            feature_names.len()
        )));
    }
    let mut values = Array3::zeros((x.nrows(), p, N_STAGES));
    for (i, row) in x.rows().into_iter().enumerate() {
        for j in 0..p {
            let delta = row[j] - background_mean[j];
            for c in 0..N_STAGES {
                values[[i, j, c]] = model.weights[[c, j]] * delta;
            }
        }
    }
    let base_values = Array1::from_shape_fn(N_STAGES, |c| model.weights.row(c).dot(background_mean) + model.bias[c]);
    Ok(AttributionMatrix {
        values,
        base_values,
        feature_names: feature_names.to_vec(),
        background_mean: background_mean.clone(),
        standard_errors: None,
    })
}

fn factorials(p: usize) -> Vec<f64> {
    let mut f = vec![1.0; p + 1];
    for k in 1..=p {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// Exact Shapley values by enumerating all `2^p` coalitions.
pub fn shap_exact_enum<T: Real>(
    f: &MarginFn<'_, T>,
    x: ArrayView1<T>,
    background_mean: &Array1<T>,
) -> Result<RowAttribution<T>> {
    check_row(x, background_mean)?;
    let p = x.len();
    if p > MAX_EXACT_FEATURES {
        return Err(Error::Size {
            features: p,
            limit: MAX_EXACT_FEATURES,
        });
    }
    let n_sets = 1usize << p;
    let points = Array2::from_shape_fn(
        (n_sets, p),
        |(s, j)| if s >> j & 1 == 1 { x[j] } else { background_mean[j] },
    );
    let v = evaluate(f, &points)?;
    let k = v.ncols();
    let fact = factorials(p);
    let weight: Vec<f64> = (0..p).map(|s| fact[s] * fact[p - s - 1] / fact[p]).collect();
    let mut phi = Array2::<f64>::zeros((p, k));
    for s in 0..n_sets {
        let size = s.count_ones() as usize;
        for j in 0..p {
            if s >> j & 1 == 1 {
                continue;
            }
            let with = s | 1 << j;
            let w = weight[size];
            for c in 0..k {
                phi[[j, c]] += w * (v[[with, c]].as_f64() - v[[s, c]].as_f64());
            }
        }
    }
    Ok(RowAttribution {
        phi: phi.mapv(T::lit),
        base_values: v.row(0).to_owned(),
        standard_errors: None,
    })
}

/// Seed for row `index` derived from the run seed.
pub fn row_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(index))
}

/// Permutation-sampling Shapley estimate with per-entry standard errors.
pub fn shap_sampling<T: Real>(
    f: &MarginFn<'_, T>,
    x: ArrayView1<T>,
    background_mean: &Array1<T>,
    n_permutations: usize,
    seed: u64,
) -> Result<RowAttribution<T>> {
    check_row(x, background_mean)?;
    if n_permutations == 0 {
        return Err(Error::Attribution("at least one permutation is required".into()));
    }
    let p = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..p).collect();
    let mut orders = Vec::with_capacity(n_permutations);
    let mut points = Array2::zeros((n_permutations * (p + 1), p));
    for t in 0..n_permutations {
        order.shuffle(&mut rng);
        let mut z = background_mean.clone();
        points.row_mut(t * (p + 1)).assign(&z);
        for (step, &j) in order.iter().enumerate() {
            z[j] = x[j];
            points.row_mut(t * (p + 1) + step + 1).assign(&z);
        }
        orders.push(order.clone());
    }
    let v = evaluate(f, &points)?;
    let k = v.ncols();
    let mut sum = Array2::<f64>::zeros((p, k));
    let mut sum_sq = Array2::<f64>::zeros((p, k));
    for (t, order) in orders.iter().enumerate() {
        for (step, &j) in order.iter().enumerate() {
            for c in 0..k {
                let d = v[[t * (p + 1) + step + 1, c]].as_f64() - v[[t * (p + 1) + step, c]].as_f64();
                sum[[j, c]] += d;
                sum_sq[[j, c]] += d * d;
            }
        }
    }
    let m = n_permutations as f64;
    let phi = &sum / m;
    let se = Array2::from_shape_fn((p, k), |(j, c)| {
        if n_permutations < 2 {
            return f64::INFINITY;
        }
        let var = ((sum_sq[[j, c]] - m * phi[[j, c]] * phi[[j, c]]) / (m - 1.0)).max(0.0);
        (var / m).sqrt()
    });
    Ok(RowAttribution {
        phi: phi.mapv(T::lit),
        base_values: v.row(0).to_owned(),
        standard_errors: Some(se.mapv(T::lit)),
    })
}

/// Attribution strategy for a batch of rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Exact,
    Sampling { n_permutations: usize, seed: u64 },
}

/// Attributes every row of `x`; sampled rows use seeds from [`row_seed`].
pub fn attribute_rows<T: Real>(
    f: &MarginFn<'_, T>,
    x: &Array2<T>,
    background_mean: &Array1<T>,
    feature_names: &[String],
    estimator: Estimator,
) -> Result<AttributionMatrix<T>> {
    let p = background_mean.len();
    if x.ncols() != p || feature_names.len() != p {
        return Err(Error::Attribution(
            "input, background and names disagree on feature count".into(),
        ));
    }
    let mut values: Option<Array3<T>> = None;
    let mut ses: Option<Array3<T>> = None;
    let mut base = None;
    for (i, row) in x.rows().into_iter().enumerate() {
        let r = match estimator {
            Estimator::Exact => shap_exact_enum(f, row, background_mean)?,
            Estimator::Sampling { n_permutations, seed } => {
                shap_sampling(f, row, background_mean, n_permutations, row_seed(seed, i as u64))?
            }
        };
        let k = r.phi.ncols();
        let vals = values.get_or_insert_with(|| Array3::zeros((x.nrows(), p, k)));
        vals.index_axis_mut(ndarray::Axis(0), i).assign(&r.phi);
        if let Some(se) = &r.standard_errors {
            ses.get_or_insert_with(|| Array3::zeros((x.nrows(), p, k)))
                .index_axis_mut(ndarray::Axis(0), i)
                .assign(se);
        }
        base.get_or_insert(r.base_values);
    }
    let base_values = match base {
        Some(b) => b,
        None => evaluate(f, &background_mean.clone().insert_axis(ndarray::Axis(0)))?
            .row(0)
            .to_owned(),
    };
    Ok(AttributionMatrix {
        values: values.unwrap_or_else(|| Array3::zeros((0, p, base_values.len()))),
        base_values,
        feature_names: feature_names.to_vec(),
        background_mean: background_mean.clone(),
        standard_errors: ses,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub mean_abs_attribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassImportance {
    pub stage: SleepStage,
    pub entries: Vec<ImportanceEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSummary {
    pub k: usize,
    pub classes: Vec<ClassImportance>,
}

/// Per class, the `k` features with the largest mean absolute attribution;
/// equal values are ordered by feature name. `k` is capped at `p`.
pub fn summarize_importance<T: Real>(attr: &AttributionMatrix<T>, k: usize) -> Result<ImportanceSummary> {
    let (n, p, classes) = attr.values.dim();
    if classes != N_STAGES {
        return Err(Error::Attribution(format!(
            "expected {N_STAGES} classes, attribution has {classes}"
        )));
    }
    let k = k.min(p);
    let mut out = Vec::with_capacity(N_STAGES);
    for stage in SleepStage::ALL {
        let c = stage.index();
        let mut entries: Vec<ImportanceEntry> = (0..p)
            .map(|j| {
                let total: f64 = (0..n).map(|i| attr.values[[i, j, c]].as_f64().abs()).sum();
                ImportanceEntry {
                    feature: attr.feature_names[j].clone(),
                    mean_abs_attribution: if n > 0 { total / n as f64 } else { 0.0 },
                }
            })
            .collect();
        entries.sort_by(|a, b| {
            b.mean_abs_attribution
                .total_cmp(&a.mean_abs_attribution)
                .then_with(|| a.feature.cmp(&b.feature))
        });
        entries.truncate(k);
        out.push(ClassImportance { stage, entries });
    }
    Ok(ImportanceSummary { k, classes: out })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ImportanceSummary {
    /// `stage,rank,feature,mean_abs_attribution`, one line per bar.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,rank,feature,mean_abs_attribution\n");
        for class in &self.classes {
            for (rank, e) in class.entries.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{:e}",
                    class.stage,
                    rank + 1,
                    csv_field(&e.feature),
                    e.mean_abs_attribution
                );
            }
        }
        out
    }
}

/// Serializable view of an [`AttributionMatrix`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionExport {
    pub feature_names: Vec<String>,
    pub classes: Vec<SleepStage>,
    pub base_values: Vec<f64>,
    pub background_mean: Vec<f64>,
    /// `[sample][feature][class]`.
    pub values: Vec<Vec<Vec<f64>>>,
    pub standard_errors: Option<Vec<Vec<Vec<f64>>>>,
}

fn nested<T: Real>(a: &Array3<T>) -> Vec<Vec<Vec<f64>>> {
    a.outer_iter()
        .map(|m| {
            m.rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v.as_f64()).collect())
                .collect()
        })
        .collect()
}

impl<T: Real> AttributionMatrix<T> {
    pub fn n_samples(&self) -> usize {
        self.values.dim().0
    }

    pub fn export(&self) -> AttributionExport {
        AttributionExport {
            feature_names: self.feature_names.clone(),
            classes: SleepStage::ALL[..self.base_values.len().min(N_STAGES)].to_vec(),
            base_values: self.base_values.iter().map(|v| v.as_f64()).collect(),
            background_mean: self.background_mean.iter().map(|v| v.as_f64()).collect(),
            values: nested(&self.values),
            standard_errors: self.standard_errors.as_ref().map(nested),
        }
    }

    /// Columnar CSV: `sample,stage,<feature...>`, one line per (sample, class).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,stage");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(&csv_field(name));
        }
        out.push('\n');
        let (n, p, k) = self.values.dim();
        for i in 0..n {
            for c in 0..k {
                let stage = SleepStage::from_index(c).map_or_else(|| c.to_string(), |s| s.to_string());
                let _ = write!(out, "{i},{stage}");
                for j in 0..p {
                    let _ = write!(out, ",{:e}", self.values[[i, j, c]].as_f64());
                }
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;
    use crate::models::{Classifier, TrainingMeta};

    fn linear(p: usize) -> LogisticModel<f64> {
        LogisticModel {
            weights: Array2::from_shape_fn((5, p), |(c, j)| ((c * 3 + j * 7) % 11) as f64 * 0.3 - 1.2),
            bias: array![0.1, -0.2, 0.3, 0.0, 0.5],
            l2: 0.0,
            meta: TrainingMeta {
                iterations: 0,
                objective: 0.0,
                gradient_max_abs: 0.0,
                converged: true,
            },
        }
    }

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("f{j}")).collect()
    }

    #[test]
    fn linear_local_accuracy_and_background_zero() {
        let m = linear(6);
        let x = Array2::from_shape_fn((4, 6), |(i, j)| (i + j) as f64 * 0.5 - 1.0);
        let bg = Array1::from_shape_fn(6, |j| j as f64 * 0.1);
        let a = shap_linear(&m, &x, &bg, &names(6)).unwrap();
        let margins = m.margins(&x).unwrap();
        for i in 0..4 {
            for c in 0..5 {
                let s: f64 = (0..6).map(|j| a.values[[i, j, c]]).sum::<f64>() + a.base_values[c];
                assert!((s - margins[[i, c]]).abs() < 1e-10);
            }
        }
        let at_bg = shap_linear(&m, &bg.clone().insert_axis(ndarray::Axis(0)), &bg, &names(6)).unwrap();
        assert!(at_bg.values.iter().all(|v| *v == 0.0));
        assert!(shap_linear(&m, &x, &bg, &names(5)).is_err());
    }

    #[test]
    fn linear_matches_enumeration() {
        let m = linear(6);
        let x = array![[1.0, -2.0, 0.5, 3.0, 0.0, -1.0]];
        let bg = Array1::from(vec![0.2, 0.1, -0.3, 0.0, 1.0, 0.4]);
        let a = shap_linear(&m, &x, &bg, &names(6)).unwrap();
        let f = |z: &Array2<f64>| m.margins(z);
        let e = shap_exact_enum(&f, x.row(0), &bg).unwrap();
        for j in 0..6 {
            for c in 0..5 {
                assert!((a.values[[0, j, c]] - e.phi[[j, c]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn additive_model_attributions() {
        let g = |z: &Array2<f64>| {
            Ok(z.map_axis(ndarray::Axis(1), |r| r[0].sin() + r[1] * r[1] + 3.0 * r[2])
                .insert_axis(ndarray::Axis(1)))
        };
        let x = array![0.7, -1.5, 2.0];
        let bg = array![0.1, 0.5, -1.0];
        let e = shap_exact_enum(&g, x.view(), &bg).unwrap();
        let want = [0.7f64.sin() - 0.1f64.sin(), 2.25 - 0.25, 9.0];
        for j in 0..3 {
            assert!((e.phi[[j, 0]] - want[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_features_is_size_error() {
        let f = |z: &Array2<f64>| Ok(z.clone());
        let x = Array1::zeros(13);
        assert!(matches!(
            shap_exact_enum(&f, x.view(), &x),
            Err(Error::Size {
                features: 13,
                limit: 12
            })
        ));
    }

    #[test]
    fn sampling_is_seeded_and_matches_linear() {
        let m = linear(5);
        let x = array![1.0, -2.0, 0.5, 3.0, 0.0];
        let bg = Array1::zeros(5);
        let f = |z: &Array2<f64>| m.margins(z);
        let a = shap_sampling(&f, x.view(), &bg, 50, 9).unwrap();
        assert_eq!(a, shap_sampling(&f, x.view(), &bg, 50, 9).unwrap());
        let exact = shap_linear(&m, &x.clone().insert_axis(ndarray::Axis(0)), &bg, &names(5)).unwrap();
        for j in 0..5 {
            for c in 0..5 {
                assert!((a.phi[[j, c]] - exact.values[[0, j, c]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn summary_orders_and_truncates() {
        let mut values = Array3::<f64>::zeros((2, 3, 5));
        for c in 0..5 {
            values[[0, 0, c]] = 1.0;
            values[[1, 0, c]] = -1.0;
            values[[0, 2, c]] = 1.0;
            values[[1, 2, c]] = 1.0;
        }
        let attr = AttributionMatrix {
            values,
            base_values: Array1::zeros(5),
            feature_names: vec!["b".into(), "z".into(), "a".into()],
            background_mean: Array1::zeros(3),
            standard_errors: None,
        };
        let s = summarize_importance(&attr, 3).unwrap();
        let order: Vec<&str> = s.classes[0].entries.iter().map(|e| e.feature.as_str()).collect();
        assert_eq!(order, ["a", "b", "z"]);
        assert_eq!(summarize_importance(&attr, 2).unwrap().classes[4].entries.len(), 2);
        assert_eq!(summarize_importance(&attr, 10).unwrap().k, 3);
        assert!(s
            .to_csv()
            .starts_with("stage,rank,feature,mean_abs_attribution\nW,1,a,1e0\n"));
        assert_eq!(attr.to_csv().lines().count(), 11);
    }
}
