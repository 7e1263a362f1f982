//! Gradient-boosted regression trees on the softmax cross-entropy.
//!
//! Each round fits one tree per class to the gradient `p_c - y_c` with Newton
//! leaf values `-G / (H + lambda)`. The round's shrinkage starts at the
//! configured learning rate and is halved until the training loss does not
//! increase; the rate actually applied is stored with each tree.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::tree::{grow, Newton, Presorted};
use super::{
    check_training, cross_entropy, softmax, to_f64, ClassWeighting, Classifier, RegressionTree, ABSENT_LOG_PRIOR,
};
use crate::error::{Error, Result};
use crate::psg_io::{SleepStage, N_STAGES};
use crate::scalar::Real;

const MAX_HALVINGS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Leaf damping added to the Hessian sum.
    pub lambda: f64,
    pub class_weighting: ClassWeighting,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 4,
            min_leaf: 1,
            lambda: 1.0,
            class_weighting: ClassWeighting::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostedTree<T> {
    pub class_index: usize,
    pub tree: RegressionTree<T>,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostedEnsemble<T> {
    /// Round-major, class order within a round.
    pub trees: Vec<BoostedTree<T>>,
    pub n_rounds: usize,
    pub base_score: Array1<T>,
    pub n_features: usize,
}

pub fn train_gbt<T: Real>(x: &Array2<T>, y: &[SleepStage], config: &GbtConfig) -> Result<BoostedEnsemble<T>> {
    let yi = check_training(x, y, 2)?;
    if !(config.learning_rate > 0.0) || config.max_depth == 0 || config.min_leaf == 0 || !(config.lambda >= 0.0) {
        return Err(Error::Training(
            "learning_rate, max_depth and min_leaf must be positive, lambda non-negative".into(),
        ));
    }
    let n = yi.len();
    let w = config.class_weighting.row_weights(&yi);
    let total_w: f64 = w.iter().sum();
    let mut prior = [0.0f64; N_STAGES];
    for (i, &c) in yi.iter().enumerate() {
        prior[c] += w[i] / total_w;
    }
    let base_f64: [f64; N_STAGES] = std::array::from_fn(|c| {
        if prior[c] > 0.0 {
            prior[c].ln()
        } else {
            ABSENT_LOG_PRIOR
        }
    });
    let base_score: Array1<T> = base_f64.iter().map(|&v| T::lit(v)).collect();

    let xf = to_f64(x);
    let data = Presorted::new(&xf);
    let mut ensemble = BoostedEnsemble {
        trees: Vec::new(),
        n_rounds: config.n_rounds,
        base_score,
        n_features: x.ncols(),
    };
    let mut f = Array2::from_shape_fn((n, N_STAGES), |(_, c)| ensemble.base_score[c].as_f64());
    let mut loss = cross_entropy(&f, &yi, &w);

    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for round in 0..config.n_rounds {
        let proba: Vec<[f64; N_STAGES]> = f
            .rows()
            .into_iter()
            .map(|r| softmax(&std::array::from_fn(|c| r[c])))
            .collect();
        let mut round_trees = Vec::with_capacity(N_STAGES);
        let mut updates = Array2::<f64>::zeros((n, N_STAGES));
        for c in 0..N_STAGES {
            for i in 0..n {
                let p = proba[i][c];
                let target = if yi[i] == c { 1.0 } else { 0.0 };
                g[i] = w[i] * (p - target);
                h[i] = w[i] * (p * (1.0 - p)).max(1e-16);
            }
            let tree64 = grow(
                &data,
                &Newton {
                    g: &g,
                    h: &h,
                    lambda: config.lambda,
                },
                None,
                config.max_depth,
                config.min_leaf,
            );
            for (i, row) in xf.rows().into_iter().enumerate() {
                updates[[i, c]] = *tree64.leaf_for(row);
            }
            round_trees.push(tree64);
        }
        let mut rate = config.learning_rate;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &f + &(&updates * rate);
            let l = cross_entropy(&candidate, &yi, &w);
            if !l.is_finite() {
                return Err(Error::Divergence(format!("non-finite training loss in round {round}")));
            }
            if l <= loss {
                accepted = Some((candidate, l));
                break;
            }
            rate *= 0.5;
        }
        let rate = match accepted {
            Some((candidate, l)) => {
                f = candidate;
                loss = l;
                rate
            }
            None => 0.0,
        };
        for (c, t) in round_trees.into_iter().enumerate() {
            ensemble.trees.push(BoostedTree {
                class_index: c,
                tree: convert_tree(t),
                learning_rate: rate,
            });
        }
    }
    Ok(ensemble)
}

fn convert_tree<T: Real>(t: RegressionTree<f64>) -> RegressionTree<T> {
    use super::Node;
    let nodes = t
        .nodes
        .into_iter()
        .map(|n| match n {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => Node::Split {
                feature,
                threshold: T::lit(threshold),
                left,
                right,
            },
            Node::Leaf(v) => Node::Leaf(T::lit(v)),
        })
        .collect();
    RegressionTree {
        nodes,
        max_depth: t.max_depth,
        n_features: t.n_features,
    }
}

impl<T: Real> BoostedEnsemble<T> {
    /// Mean training-style log loss after each number of rounds `0..=n_rounds`.
    pub fn staged_log_loss(&self, x: &Array2<T>, y: &[SleepStage]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let yi: Vec<usize> = y.iter().map(|s| s.index()).collect();
        let w = vec![1.0; yi.len()];
        let mut f = Array2::from_shape_fn((x.nrows(), N_STAGES), |(_, c)| self.base_score[c].as_f64());
        let mut out = vec![cross_entropy(&f, &yi, &w)];
        for round in self.trees.chunks(N_STAGES) {
            let mut upd = Array2::<f64>::zeros(f.dim());
            for bt in round {
                for (i, row) in x.rows().into_iter().enumerate() {
                    upd[[i, bt.class_index]] = bt.tree.leaf_for(row).as_f64();
                }
            }
            let rate = round.first().map_or(0.0, |t| t.learning_rate);
            f = &f + &(&upd * rate);
            out.push(cross_entropy(&f, &yi, &w));
        }
        Ok(out)
    }
}

impl<T: Real> Classifier<T> for BoostedEnsemble<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn margin_row(&self, x: ArrayView1<T>) -> [T; N_STAGES] {
        let mut m: [T; N_STAGES] = std::array::from_fn(|c| self.base_score[c]);
        for bt in &self.trees {
            m[bt.class_index] += T::lit(bt.learning_rate) * *bt.tree.leaf_for(x);
        }
        m
    }

    fn proba_from_margins(&self, margins: &[T; N_STAGES]) -> [T; N_STAGES] {
        softmax(margins)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::class_priors;
    use SleepStage::*;

    fn xor(n_per: usize) -> (Array2<f64>, Vec<SleepStage>) {
        let mut x = Array2::zeros((4 * n_per, 2));
        let mut y = Vec::new();
        for q in 0..4 {
            for k in 0..n_per {
                let (a, b) = ((q & 1) as f64, (q >> 1) as f64);
                let jitter = k as f64 * 0.01;
                x[[q * n_per + k, 0]] = a + jitter;
                x[[q * n_per + k, 1]] = b - jitter;
                y.push(if (q & 1) ^ (q >> 1) == 1 { N2 } else { W });
            }
        }
        (x, y)
    }

    #[test]
    fn zero_rounds_predict_priors() {
        let (x, mut y) = xor(5);
        y[0] = Rem;
        let m = train_gbt(
            &x,
            &y,
            &GbtConfig {
                n_rounds: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let priors = class_priors(&y);
        for row in m.predict_proba(&x).unwrap().rows() {
            for c in 0..N_STAGES {
                assert!((row[c] - priors[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn xor_is_learned_at_depth_two() {
        let (x, y) = xor(10);
        let m = train_gbt(
            &x,
            &y,
            &GbtConfig {
                n_rounds: 50,
                max_depth: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
    }

    #[test]
    fn staged_loss_never_increases() {
        let x = Array2::from_shape_fn((60, 3), |(i, j)| ((i * 31 + j * 17) % 23) as f64 / 7.0);
        let y: Vec<_> = (0..60)
            .map(|i| SleepStage::from_index((i * 7 / 3) % 5).unwrap())
            .collect();
        let m = train_gbt(
            &x,
            &y,
            &GbtConfig {
                n_rounds: 40,
                learning_rate: 0.8,
                max_depth: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let losses = m.staged_log_loss(&x, &y).unwrap();
        assert_eq!(losses.len(), 41);
        assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
        assert!(losses[40] < losses[0]);
    }

    #[test]
    fn deterministic() {
        let (x, y) = xor(4);
        let cfg = GbtConfig {
            n_rounds: 10,
            ..Default::default()
        };
        assert_eq!(train_gbt(&x, &y, &cfg).unwrap(), train_gbt(&x, &y, &cfg).unwrap());
    }
}
