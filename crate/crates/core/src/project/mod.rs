//! Ridge projection of embeddings onto the feature space and the
//! normalized interpretable representation.
//!
//! `T = (EᵀE + λI)⁻¹ EᵀF` is obtained from a Cholesky factorization of the
//! regularized Gram matrix. The representation `R = E·T` is z-normalized per
//! column with its mean and population (1/N) standard deviation on the
//! fitting rows, giving `R' = (R - μ) / σ`. There is no intercept.

mod io;
pub mod linalg;

use ndarray::{Array1, Array2, Axis};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::Real;

pub use io::{read_projection, write_projection};

pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionModel<T> {
    /// `d x p` map from embedding space to feature space.
    pub transform: Array2<T>,
    pub lambda: f64,
    pub mean: Array1<T>,
    /// Population standard deviations; frozen columns hold 1.
    pub scale: Array1<T>,
    /// Columns whose spread was zero on the fitting rows.
    pub frozen: Vec<bool>,
    pub descriptor_names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationMatrix<T> {
    pub values: Array2<T>,
    pub normalized: bool,
}

/// Strategy hook for choosing the ridge strength.
pub trait LambdaSearch<T: Real> {
    fn choose(&self, embeddings: &EmbeddingMatrix<T>, features: &FeatureMatrix<T>) -> Result<f64>;
}

/// Always returns the configured value.
#[derive(Clone, Copy, Debug)]
pub struct FixedLambda(pub f64);

impl<T: Real> LambdaSearch<T> for FixedLambda {
    fn choose(&self, _: &EmbeddingMatrix<T>, _: &FeatureMatrix<T>) -> Result<f64> {
        Ok(self.0)
    }
}

/// Solves the regularized normal equations for `T`.
pub fn ridge_solve<T: Real>(e: &Array2<T>, f: &Array2<T>, lambda: f64) -> Result<Array2<T>> {
    if e.nrows() != f.nrows() {
        return Err(Error::Dimension(format!(
            "{} embedding rows vs {} feature rows",
            e.nrows(),
            f.nrows()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Dimension(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    let mut gram = e.t().dot(e);
    let lam = T::lit(lambda);
    gram.diag_mut().mapv_inplace(|v| v + lam);
    let rhs = e.t().dot(f);
    let l = linalg::cholesky(&gram).map_err(|err| match err {
        Error::Singular(msg) if lambda == 0.0 => {
            Error::Singular(format!("{msg}; EᵀE is rank deficient, use lambda > 0"))
        }
        other => other,
    })?;
    Ok(linalg::cholesky_solve(&l, &rhs))
}

/// Gradient of `‖E·T − F‖² + λ‖T‖²` with respect to `T`.
pub fn ridge_gradient<T: Real>(e: &Array2<T>, f: &Array2<T>, t: &Array2<T>, lambda: f64) -> Array2<T> {
    let two = T::lit(2.0);
    let resid = e.dot(t) - f;
    (e.t().dot(&resid) + t * T::lit(lambda)) * two
}

fn column_stats<T: Real>(r: &Array2<T>) -> (Array1<T>, Array1<T>, Vec<bool>) {
    let n = T::from_usize_lossy(r.nrows());
    let mean = r.sum_axis(Axis(0)) / n;
    let mut scale = Array1::zeros(r.ncols());
    let mut frozen = vec![false; r.ncols()];
    for (j, col) in r.columns().into_iter().enumerate() {
        let m = mean[j];
        let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / n;
        let sd = var.sqrt();
        let magnitude = col.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        if sd <= T::epsilon() * T::lit(16.0) * magnitude || sd <= T::zero() {
            scale[j] = T::one();
            frozen[j] = true;
        } else {
            scale[j] = sd;
        }
    }
    (mean, scale, frozen)
}

/// Fits the transform on `(E, F)` and the normalization statistics on `R = E·T`.
pub fn fit_projection<T: Real>(
    embeddings: &EmbeddingMatrix<T>,
    features: &FeatureMatrix<T>,
    lambda: f64,
) -> Result<ProjectionModel<T>> {
    if embeddings.n_rows() != features.n_rows() {
        return Err(Error::Dimension(format!(
            "{} embedding rows vs {} feature rows",
            embeddings.n_rows(),
            features.n_rows()
        )));
    }
    if embeddings.n_rows() < 2 {
        return Err(Error::Dimension("projection needs at least 2 rows".into()));
    }
    let transform = ridge_solve(embeddings.values(), features.values(), lambda)?;
    if transform.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("transform has non-finite entries".into()));
    }
    let r = embeddings.values().dot(&transform);
    let (mean, scale, frozen) = column_stats(&r);
    Ok(ProjectionModel {
        transform,
        lambda,
        mean,
        scale,
        frozen,
        descriptor_names: features.names(),
    })
}

impl<T: Real> ProjectionModel<T> {
    pub fn embedding_dim(&self) -> usize {
        self.transform.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.transform.ncols()
    }

    fn check(&self, e: &EmbeddingMatrix<T>) -> Result<()> {
        if e.dim() != self.embedding_dim() {
            return Err(Error::Dimension(format!(
                "embedding width {} does not match model width {}",
                e.dim(),
                self.embedding_dim()
            )));
        }
        Ok(())
    }

    /// Unnormalized representation `R = E·T`.
    pub fn project(&self, e: &EmbeddingMatrix<T>) -> Result<RepresentationMatrix<T>> {
        self.check(e)?;
        Ok(RepresentationMatrix {
            values: e.values().dot(&self.transform),
            normalized: false,
        })
    }

    /// Normalized representation `R' = (E·T − μ) / σ`.
    pub fn transform(&self, e: &EmbeddingMatrix<T>) -> Result<RepresentationMatrix<T>> {
        let mut r = self.project(e)?.values;
        for mut row in r.rows_mut() {
            row -= &self.mean;
            row /= &self.scale;
        }
        Ok(RepresentationMatrix {
            values: r,
            normalized: true,
        })
    }
}

pub fn transform<T: Real>(e: &EmbeddingMatrix<T>, model: &ProjectionModel<T>) -> Result<RepresentationMatrix<T>> {
    model.transform(e)
}

/// Fits on the training rows only and normalizes both splits with the
/// training statistics.
pub fn fit_transform_pipeline<T: Real>(
    train_e: &EmbeddingMatrix<T>,
    train_f: &FeatureMatrix<T>,
    test_e: &EmbeddingMatrix<T>,
    lambda: f64,
) -> Result<(ProjectionModel<T>, RepresentationMatrix<T>, RepresentationMatrix<T>)> {
    let model = fit_projection(train_e, train_f, lambda)?;
    let train = model.transform(train_e)?;
    let test = model.transform(test_e)?;
    Ok((model, train, test))
}
