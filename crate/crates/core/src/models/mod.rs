//! Simple classifiers over the representation (or raw features): multinomial
//! logistic regression, a CART decision tree and gradient-boosted trees.
//!
//! Class order is fixed to [`SleepStage::ALL`]. Every model exposes per-class
//! margins; probabilities are the softmax of the margins for the logistic and
//! boosted models and the leaf class distribution for the single tree.

mod gbt;
mod io;
mod logistic;
mod tree;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psg_io::{SleepStage, N_STAGES};
use crate::scalar::Real;

pub use gbt::{train_gbt, BoostedEnsemble, BoostedTree, GbtConfig};
pub use io::{read_model, write_model, LogisticExport};
pub use logistic::{
    logistic_gradient, logistic_objective, train_logistic, train_logistic_from, LogisticConfig, LogisticModel,
    TrainingMeta,
};
pub use tree::{train_tree, Node, RegressionTree, Tree, TreeConfig, TreeModel};

/// Fixed log-prior (`ln 1e-15`) given to classes absent from training labels.
pub const ABSENT_LOG_PRIOR: f64 = -34.538_776_394_910_684;

/// Per-row loss weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    #[default]
    Uniform,
    /// `n / (k * n_c)` for each of the `k` present classes.
    Balanced,
}

impl ClassWeighting {
    pub fn row_weights(self, y: &[usize]) -> Vec<f64> {
        match self {
            Self::Uniform => vec![1.0; y.len()],
            Self::Balanced => {
                let mut counts = [0usize; N_STAGES];
                for &c in y {
                    counts[c] += 1;
                }
                let k = counts.iter().filter(|&&c| c > 0).count() as f64;
                let n = y.len() as f64;
                y.iter().map(|&c| n / (k * counts[c] as f64)).collect()
            }
        }
    }
}

/// Common prediction contract.
pub trait Classifier<T: Real> {
    fn n_features(&self) -> usize;

    /// Per-class scores for one row, without input validation.
    fn margin_row(&self, x: ArrayView1<T>) -> [T; N_STAGES];

    /// Maps one row of margins to class probabilities.
    fn proba_from_margins(&self, margins: &[T; N_STAGES]) -> [T; N_STAGES];

    fn check_input(&self, x: &Array2<T>) -> Result<()> {
        if x.ncols() != self.n_features() {
            return Err(Error::Dimension(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.n_features()
            )));
        }
        Ok(())
    }

    /// `n x 5` margins.
    fn margins(&self, x: &Array2<T>) -> Result<Array2<T>> {
        self.check_input(x)?;
        let mut out = Array2::zeros((x.nrows(), N_STAGES));
        for (i, row) in x.rows().into_iter().enumerate() {
            let m = self.margin_row(row);
            for c in 0..N_STAGES {
                out[[i, c]] = m[c];
            }
        }
        Ok(out)
    }

    /// `n x 5` probabilities; rows sum to one.
    fn predict_proba(&self, x: &Array2<T>) -> Result<Array2<T>> {
        self.check_input(x)?;
        let mut out = Array2::zeros((x.nrows(), N_STAGES));
        for (i, row) in x.rows().into_iter().enumerate() {
            let p = self.proba_from_margins(&self.margin_row(row));
            for c in 0..N_STAGES {
                out[[i, c]] = p[c];
            }
        }
        Ok(out)
    }

    /// Arg-max of [`Classifier::predict_proba`], ties to the lower class index.
    fn predict(&self, x: &Array2<T>) -> Result<Vec<SleepStage>> {
        let proba = self.predict_proba(x)?;
        Ok(proba
            .rows()
            .into_iter()
            .map(|r| SleepStage::from_index(argmax(r.iter().copied())).expect("class index"))
            .collect())
    }
}

/// First index of the maximum.
pub fn argmax<T: PartialOrd>(values: impl IntoIterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match &best {
            Some((_, b)) if !(v > *b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map_or(0, |(i, _)| i)
}

pub fn softmax<T: Real>(z: &[T; N_STAGES]) -> [T; N_STAGES] {
    let m = z.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let mut out = [T::zero(); N_STAGES];
    let mut sum = T::zero();
    for c in 0..N_STAGES {
        out[c] = (z[c] - m).exp();
        sum += out[c];
    }
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Mean (optionally weighted) multinomial cross-entropy of margins `f`.
pub(crate) fn cross_entropy(f: &Array2<f64>, y: &[usize], w: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mut total = 0.0;
    for (i, row) in f.rows().into_iter().enumerate() {
        let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        total += w[i] * (lse - row[y[i]]);
    }
    total / n
}

/// Validates a training set and returns its labels as class indices.
pub(crate) fn check_training<T: Real>(x: &Array2<T>, y: &[SleepStage], min_classes: usize) -> Result<Vec<usize>> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!("{} rows vs {} labels", x.nrows(), y.len())));
    }
    if x.ncols() == 0 {
        return Err(Error::Dimension("no feature columns".into()));
    }
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    let idx: Vec<usize> = y.iter().map(|s| s.index()).collect();
    let mut present = [false; N_STAGES];
    for &c in &idx {
        present[c] = true;
    }
    if y.is_empty() || present.iter().filter(|&&p| p).count() < min_classes {
        return Err(Error::Training(format!(
            "training labels contain fewer than {min_classes} classes"
        )));
    }
    Ok(idx)
}

pub(crate) fn to_f64<T: Real>(x: &Array2<T>) -> Array2<f64> {
    x.mapv(|v| v.as_f64())
}

/// Empirical class frequencies.
pub fn class_priors(y: &[SleepStage]) -> Array1<f64> {
    let mut p = Array1::zeros(N_STAGES);
    for s in y {
        p[s.index()] += 1.0;
    }
    p / y.len().max(1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Tree,
    Gbt,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" | "logreg" | "logistic_regression" => Ok(Self::Logistic),
            "tree" | "decision_tree" => Ok(Self::Tree),
            "gbt" | "boosted" | "xgboost" => Ok(Self::Gbt),
            _ => Err(Error::Format(format!(
                "unknown classifier {s:?}; expected logistic, tree or gbt"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Logistic => "logistic",
            Self::Tree => "tree",
            Self::Gbt => "gbt",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel<T> {
    Logistic(LogisticModel<T>),
    Tree(TreeModel<T>),
    Gbt(BoostedEnsemble<T>),
}

impl<T: Real> TrainedModel<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Logistic(_) => ModelKind::Logistic,
            Self::Tree(_) => ModelKind::Tree,
            Self::Gbt(_) => ModelKind::Gbt,
        }
    }

    fn inner(&self) -> &dyn Classifier<T> {
        match self {
            Self::Logistic(m) => m,
            Self::Tree(m) => m,
            Self::Gbt(m) => m,
        }
    }
}

impl<T: Real> Classifier<T> for TrainedModel<T> {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn margin_row(&self, x: ArrayView1<T>) -> [T; N_STAGES] {
        self.inner().margin_row(x)
    }

    fn proba_from_margins(&self, margins: &[T; N_STAGES]) -> [T; N_STAGES] {
        self.inner().proba_from_margins(margins)
    }
}
