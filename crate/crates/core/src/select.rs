//! Univariate feature ranking by one-way ANOVA F against the stage labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::psg_io::{SleepStage, N_STAGES};
use crate::scalar::Real;

/// One-way ANOVA F statistic of `column` grouped by `labels`.
///
/// Zero within-group spread with separated group means returns
/// `T::max_value()` so such columns rank first; a constant column scores 0.
pub fn anova_f<T: Real>(column: &[T], labels: &[SleepStage]) -> Result<T> {
    if column.len() != labels.len() {
        return Err(Error::Selection(format!(
            "{} values for {} labels",
            column.len(),
            labels.len()
        )));
    }
    let mut counts = [0usize; N_STAGES];
    let mut sums = [T::zero(); N_STAGES];
    for (&x, s) in column.iter().zip(labels) {
        counts[s.index()] += 1;
        sums[s.index()] += x;
    }
    let k = counts.iter().filter(|&&c| c > 0).count();
    let n = column.len();
    if k < 2 {
        return Err(Error::Selection(format!(
            "ANOVA needs at least 2 label groups, found {k}"
        )));
    }
    if n <= k {
        return Err(Error::Selection(format!(
            "ANOVA needs more rows ({n}) than groups ({k})"
        )));
    }
    let mut means = [T::zero(); N_STAGES];
    for g in 0..N_STAGES {
        if counts[g] > 0 {
            means[g] = sums[g] / T::from_usize_lossy(counts[g]);
        }
    }
    let grand = column.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let between: T = (0..N_STAGES)
        .filter(|&g| counts[g] > 0)
        .map(|g| T::from_usize_lossy(counts[g]) * (means[g] - grand).powi(2))
        .sum();
    let within: T = column
        .iter()
        .zip(labels)
        .map(|(&x, s)| (x - means[s.index()]).powi(2))
        .sum();
    if within <= T::zero() {
        return Ok(if between > T::zero() { T::max_value() } else { T::zero() });
    }
    let df_between = T::from_usize_lossy(k - 1);
    let df_within = T::from_usize_lossy(n - k);
    Ok((between / df_between) / (within / df_within))
}

/// `max(1, round(fraction * p))` with halves rounded away from zero, capped at `p`.
pub fn kept_count(p: usize, fraction: f64) -> usize {
    ((fraction * p as f64).round() as usize).max(1).min(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub fraction: f64,
    /// Strictly increasing column indices into the fitted catalog.
    pub kept_indices: Vec<usize>,
    pub f_scores: Vec<f64>,
    /// Names of every column of the catalog the mask was fitted on.
    pub descriptor_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SelectionMask {
    pub fn kept_names(&self) -> Vec<&str> {
        self.kept_indices
            .iter()
            .map(|&i| self.descriptor_names[i].as_str())
            .collect()
    }

    /// Applies the mask to a matrix built from the same catalog.
    pub fn apply<T: Real>(&self, fm: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
        if fm.names() != self.descriptor_names {
            return Err(Error::Selection(format!(
                "mask fitted on {} columns does not match this {}-column catalog",
                self.descriptor_names.len(),
                fm.n_features()
            )));
        }
        fm.select_columns(&self.kept_indices)
    }
}

/// Ranks columns by F (descending, ties by lower index) and keeps the top
/// `round(fraction * p)` in their original order. Columns whose F cannot be
/// computed score 0 and are recorded in the mask's warnings.
pub fn select_top_fraction<T: Real>(fm: &FeatureMatrix<T>, fraction: f64) -> Result<(SelectionMask, FeatureMatrix<T>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Selection(format!("fraction {fraction} outside (0, 1]")));
    }
    let labels = fm
        .labels()
        .ok_or_else(|| Error::Selection("feature matrix has no labels".into()))?;
    let p = fm.n_features();
    if p == 0 {
        return Err(Error::Selection("no feature columns".into()));
    }
    let mut warnings = Vec::new();
    let scores: Vec<T> = (0..p)
        .map(|j| {
            let col: Vec<T> = fm.values().column(j).to_vec();
            anova_f(&col, labels).unwrap_or_else(|e| {
                warnings.push(format!("{}: {e}", fm.descriptors()[j].name));
                T::zero()
            })
        })
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite F").then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[..kept_count(p, fraction)].to_vec();
    kept.sort_unstable();
    let mask = SelectionMask {
        fraction,
        kept_indices: kept,
        f_scores: scores.iter().map(|s| s.as_f64()).collect(),
        descriptor_names: fm.names(),
        warnings,
    };
    let selected = fm.select_columns(&mask.kept_indices)?;
    Ok((mask, selected))
}
