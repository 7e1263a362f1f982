//! Multinomial logistic regression by deterministic full-batch accelerated
//! gradient descent with a backtracking line search.
//!
//! Objective: `(1/n) Σ w_i CE_i + (l2/2)‖W‖²`, bias unpenalized. Steps are
//! scaled by a fixed diagonal curvature bound (`mean(x_j²)/2 + l2` for the
//! weights of column `j`, `mean(w)/2` for the biases) so one step length suits
//! both tiny and huge `l2`. Nesterov momentum is reset whenever a step would
//! raise the objective, so the accepted objective never increases. Classes
//! absent from the labels keep zero weights and a fixed bias of
//! [`ABSENT_LOG_PRIOR`], since their unpenalized bias has no finite optimum.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::{check_training, cross_entropy, softmax, to_f64, ClassWeighting, Classifier, ABSENT_LOG_PRIOR};
use crate::error::{Error, Result};
use crate::psg_io::{SleepStage, N_STAGES};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub class_weighting: ClassWeighting,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            max_iter: 500,
            tol: 1e-6,
            class_weighting: ClassWeighting::Uniform,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub objective: f64,
    pub gradient_max_abs: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel<T> {
    /// `5 x p` weights.
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub l2: f64,
    pub meta: TrainingMeta,
}

/// Regularized mean cross-entropy at `(w, b)`.
pub fn logistic_objective(
    w: &Array2<f64>,
    b: &Array1<f64>,
    x: &Array2<f64>,
    y: &[usize],
    row_weights: &[f64],
    l2: f64,
) -> f64 {
    let f = x.dot(&w.t()) + b;
    cross_entropy(&f, y, row_weights) + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Analytic gradient of [`logistic_objective`] with respect to `(w, b)`.
pub fn logistic_gradient(
    w: &Array2<f64>,
    b: &Array1<f64>,
    x: &Array2<f64>,
    y: &[usize],
    row_weights: &[f64],
    l2: f64,
) -> (Array2<f64>, Array1<f64>) {
    let n = y.len() as f64;
    let mut r = x.dot(&w.t()) + b;
    for (i, mut row) in r.rows_mut().into_iter().enumerate() {
        let m = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
        row[y[i]] -= 1.0;
        row *= row_weights[i] / n;
    }
    let gw = r.t().dot(x) + w * l2;
    let gb = r.sum_axis(Axis(0));
    (gw, gb)
}

pub fn train_logistic<T: Real>(x: &Array2<T>, y: &[SleepStage], config: &LogisticConfig) -> Result<LogisticModel<T>> {
    let p = x.ncols();
    train_logistic_from(x, y, config, Array2::zeros((N_STAGES, p)), Array1::zeros(N_STAGES))
}

/// Like [`train_logistic`] but starting from the given parameters.
pub fn train_logistic_from<T: Real>(
    x: &Array2<T>,
    y: &[SleepStage],
    config: &LogisticConfig,
    mut w: Array2<f64>,
    mut b: Array1<f64>,
) -> Result<LogisticModel<T>> {
    let yi = check_training(x, y, 2)?;
    if !(config.l2 >= 0.0) || !config.l2.is_finite() {
        return Err(Error::Training(format!(
            "l2 must be finite and non-negative, got {}",
            config.l2
        )));
    }
    if config.max_iter == 0 || !(config.tol > 0.0) {
        return Err(Error::Training("max_iter and tol must be positive".into()));
    }
    let p = x.ncols();
    if w.dim() != (N_STAGES, p) || b.len() != N_STAGES {
        return Err(Error::Dimension("initial parameters have the wrong shape".into()));
    }
    let mut present = [false; N_STAGES];
    for &c in &yi {
        present[c] = true;
    }
    for c in (0..N_STAGES).filter(|&c| !present[c]) {
        w.row_mut(c).fill(0.0);
        b[c] = ABSENT_LOG_PRIOR;
    }
    let xf = to_f64(x);
    let rw = config.class_weighting.row_weights(&yi);
    let n = yi.len() as f64;
    let l2 = config.l2;

    let mean_w = rw.iter().sum::<f64>() / n;
    let dw: Array1<f64> = xf
        .columns()
        .into_iter()
        .map(|c| (0.5 * c.iter().zip(&rw).map(|(v, wi)| wi * v * v).sum::<f64>() / n + l2).max(1e-12))
        .collect();
    let db = (0.5 * mean_w).max(1e-12);

    let objective = |w: &Array2<f64>, b: &Array1<f64>| logistic_objective(w, b, &xf, &yi, &rw, l2);
    let gradient = |w: &Array2<f64>, b: &Array1<f64>| {
        let (mut gw, mut gb) = logistic_gradient(w, b, &xf, &yi, &rw, l2);
        for c in (0..N_STAGES).filter(|&c| !present[c]) {
            gw.row_mut(c).fill(0.0);
            gb[c] = 0.0;
        }
        (gw, gb)
    };
    let max_abs = |gw: &Array2<f64>, gb: &Array1<f64>| gw.iter().chain(gb.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
    let scaled_step = |w: &Array2<f64>, b: &Array1<f64>, gw: &Array2<f64>, gb: &Array1<f64>, step: f64| {
        let mut w_new = w.clone();
        for (mut row, grow) in w_new.rows_mut().into_iter().zip(gw.rows()) {
            for ((v, g), d) in row.iter_mut().zip(grow).zip(&dw) {
                *v -= step * g / d;
            }
        }
        let b_new = b - &(gb * (step / db));
        let decrease = (gw * gw)
            .rows()
            .into_iter()
            .map(|r| r.iter().zip(&dw).map(|(g2, d)| g2 / d).sum::<f64>())
            .sum::<f64>()
            + gb.iter().map(|g| g * g / db).sum::<f64>();
        (w_new, b_new, decrease)
    };

    let mut f = objective(&w, &b);
    if !f.is_finite() {
        return Err(Error::Divergence("initial objective is not finite".into()));
    }
    let (mut w_prev, mut b_prev) = (w.clone(), b.clone());
    let mut momentum = 1.0f64;
    let mut step = 1.0f64;
    let mut meta = TrainingMeta {
        iterations: 0,
        objective: f,
        gradient_max_abs: f64::INFINITY,
        converged: false,
    };
    for it in 0..=config.max_iter {
        let (gw, gb) = gradient(&w, &b);
        let gmax = max_abs(&gw, &gb);
        if !gmax.is_finite() {
            return Err(Error::Divergence(format!("non-finite gradient at iteration {it}")));
        }
        meta = TrainingMeta {
            iterations: it,
            objective: f,
            gradient_max_abs: gmax,
            converged: gmax <= config.tol,
        };
        if meta.converged || it == config.max_iter {
            break;
        }
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        let wy = &w + &((&w - &w_prev) * beta);
        let by = &b + &((&b - &b_prev) * beta);
        let fy = objective(&wy, &by);
        let (gwy, gby) = if beta > 0.0 { gradient(&wy, &by) } else { (gw, gb) };
        step = (step * 2.0).min(1e6);
        let mut accepted = None;
        while step > 1e-20 {
            let (w_new, b_new, decrease) = scaled_step(&wy, &by, &gwy, &gby, step);
            let f_new = objective(&w_new, &b_new);
            if f_new.is_finite() && f_new <= fy - 0.5 * step * decrease {
                accepted = Some((w_new, b_new, f_new));
                break;
            }
            step *= 0.5;
        }
        let Some((w_new, b_new, f_new)) = accepted else {
            break;
        };
        if f_new > f {
            // Momentum overshoot: restart from the current iterate.
            momentum = 1.0;
            w_prev = w.clone();
            b_prev = b.clone();
            continue;
        }
        w_prev = std::mem::replace(&mut w, w_new);
        b_prev = std::mem::replace(&mut b, b_new);
        f = f_new;
        momentum = next_momentum;
    }
    if !f.is_finite() {
        return Err(Error::Divergence("objective became non-finite".into()));
    }
    Ok(LogisticModel {
        weights: w.mapv(T::lit),
        bias: b.mapv(T::lit),
        l2,
        meta,
    })
}

impl<T: Real> Classifier<T> for LogisticModel<T> {
    fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    fn margin_row(&self, x: ArrayView1<T>) -> [T; N_STAGES] {
        let mut out = [T::zero(); N_STAGES];
        for c in 0..N_STAGES {
            out[c] = self.weights.row(c).dot(&x) + self.bias[c];
        }
        out
    }

    fn proba_from_margins(&self, margins: &[T; N_STAGES]) -> [T; N_STAGES] {
        softmax(margins)
    }
}
