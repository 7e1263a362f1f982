//! Greedy binary trees: a Gini classification tree and the regression tree
//! used by the boosted ensemble share one presorted split search.
//!
//! Candidate thresholds are midpoints between consecutive distinct values;
//! rows with `x <= threshold` go left. Among equal gains the lower feature
//! index wins, then the lower threshold.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{check_training, ClassWeighting, Classifier};
use crate::error::{Error, Result};
use crate::psg_io::{SleepStage, N_STAGES};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Node<T, L> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf(L),
}

/// Nodes in preorder; index 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree<T, L> {
    pub nodes: Vec<Node<T, L>>,
    pub max_depth: usize,
    pub n_features: usize,
}

/// Leaves hold class distributions.
pub type TreeModel<T> = Tree<T, [f64; N_STAGES]>;
/// Leaves hold scalar outputs.
pub type RegressionTree<T> = Tree<T, T>;

impl<T: Real, L> Tree<T, L> {
    pub fn leaf_for(&self, x: ArrayView1<T>) -> &L {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf(l) => return l,
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go<T, L>(t: &[Node<T, L>], i: usize) -> usize {
            match &t[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf(_) => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub class_weighting: ClassWeighting,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_leaf: 1,
            class_weighting: ClassWeighting::Uniform,
        }
    }
}

/// Accumulated node statistics for a split criterion.
pub(crate) trait Criterion {
    type Stats: Clone;
    type Leaf;

    fn empty(&self) -> Self::Stats;
    fn add(&self, s: &mut Self::Stats, row: usize);
    fn sub(&self, a: &Self::Stats, b: &Self::Stats) -> Self::Stats;
    /// Larger is better; split gain is `score(l) + score(r) - score(parent)`.
    fn score(&self, s: &Self::Stats) -> f64;
    fn is_pure(&self, s: &Self::Stats) -> bool;
    fn leaf(&self, s: &Self::Stats) -> Self::Leaf;
}

pub(crate) struct Gini<'a> {
    pub y: &'a [usize],
    pub w: &'a [f64],
}

impl Criterion for Gini<'_> {
    type Stats = [f64; N_STAGES];
    type Leaf = [f64; N_STAGES];

    fn empty(&self) -> Self::Stats {
        [0.0; N_STAGES]
    }

    fn add(&self, s: &mut Self::Stats, row: usize) {
        s[self.y[row]] += self.w[row];
    }

    fn sub(&self, a: &Self::Stats, b: &Self::Stats) -> Self::Stats {
        std::array::from_fn(|c| a[c] - b[c])
    }

    fn score(&self, s: &Self::Stats) -> f64 {
        let total: f64 = s.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        s.iter().map(|v| v * v).sum::<f64>() / total - total
    }

    fn is_pure(&self, s: &Self::Stats) -> bool {
        s.iter().filter(|&&v| v > 0.0).count() <= 1
    }

    fn leaf(&self, s: &Self::Stats) -> Self::Leaf {
        let total: f64 = s.iter().sum();
        std::array::from_fn(|c| s[c] / total)
    }
}

/// Second-order regression criterion with leaf value `-G / (H + lambda)`.
pub(crate) struct Newton<'a> {
    pub g: &'a [f64],
    pub h: &'a [f64],
    pub lambda: f64,
}

impl Criterion for Newton<'_> {
    type Stats = (f64, f64);
    type Leaf = f64;

    fn empty(&self) -> Self::Stats {
        (0.0, 0.0)
    }

    fn add(&self, s: &mut Self::Stats, row: usize) {
        s.0 += self.g[row];
        s.1 += self.h[row];
    }

    fn sub(&self, a: &Self::Stats, b: &Self::Stats) -> Self::Stats {
        (a.0 - b.0, a.1 - b.1)
    }

    fn score(&self, s: &Self::Stats) -> f64 {
        s.0 * s.0 / (s.1 + self.lambda)
    }

    fn is_pure(&self, _: &Self::Stats) -> bool {
        false
    }

    fn leaf(&self, s: &Self::Stats) -> f64 {
        -s.0 / (s.1 + self.lambda)
    }
}

/// Column-major training matrix with each column's row order presorted.
pub(crate) struct Presorted<T> {
    pub columns: Vec<Vec<T>>,
    pub order: Vec<Vec<u32>>,
}

impl<T: Real> Presorted<T> {
    pub fn new(x: &Array2<T>) -> Self {
        let columns: Vec<Vec<T>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| {
                    col[a as usize]
                        .partial_cmp(&col[b as usize])
                        .expect("finite")
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { columns, order }
    }

    pub fn n_rows(&self) -> usize {
        self.order.first().map_or(0, Vec::len)
    }
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    gain: f64,
}

fn midpoint<T: Real>(a: T, b: T) -> T {
    let m = a + (b - a) / T::lit(2.0);
    if m >= b || m < a {
        a
    } else {
        m
    }
}

fn best_split<T: Real, C: Criterion>(
    data: &Presorted<T>,
    crit: &C,
    lists: &[Vec<u32>],
    parent: &C::Stats,
    min_leaf: usize,
) -> Option<BestSplit<T>> {
    let n = lists[0].len();
    let parent_score = crit.score(parent);
    let mut best: Option<BestSplit<T>> = None;
    for (j, list) in lists.iter().enumerate() {
        let col = &data.columns[j];
        let mut left = crit.empty();
        for k in 0..n - 1 {
            crit.add(&mut left, list[k] as usize);
            let (a, b) = (col[list[k] as usize], col[list[k + 1] as usize]);
            if k + 1 < min_leaf || n - k - 1 < min_leaf || !(a < b) {
                continue;
            }
            let right = crit.sub(parent, &left);
            let gain = crit.score(&left) + crit.score(&right) - parent_score;
            if best.as_ref().is_none_or(|s| gain > s.gain) {
                best = Some(BestSplit {
                    feature: j,
                    threshold: midpoint(a, b),
                    gain,
                });
            }
        }
    }
    best
}

pub(crate) fn grow<T: Real, C: Criterion>(
    data: &Presorted<T>,
    crit: &C,
    rows: Option<&[bool]>,
    max_depth: usize,
    min_leaf: usize,
) -> Tree<T, C::Leaf> {
    let lists: Vec<Vec<u32>> = match rows {
        None => data.order.clone(),
        Some(mask) => data
            .order
            .iter()
            .map(|o| o.iter().copied().filter(|&r| mask[r as usize]).collect())
            .collect(),
    };
    let mut nodes = Vec::new();
    let mut goes_left = vec![false; data.n_rows()];
    grow_node(
        data,
        crit,
        lists,
        0,
        max_depth,
        min_leaf.max(1),
        &mut nodes,
        &mut goes_left,
    );
    Tree {
        nodes,
        max_depth,
        n_features: data.columns.len(),
    }
}

#[allow(clippy::too_many_arguments)]
fn grow_node<T: Real, C: Criterion>(
    data: &Presorted<T>,
    crit: &C,
    lists: Vec<Vec<u32>>,
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
    nodes: &mut Vec<Node<T, C::Leaf>>,
    goes_left: &mut [bool],
) -> usize {
    let mut stats = crit.empty();
    for &r in &lists[0] {
        crit.add(&mut stats, r as usize);
    }
    let id = nodes.len();
    let n = lists[0].len();
    let split = if depth >= max_depth || n < 2 * min_leaf || crit.is_pure(&stats) {
        None
    } else {
        best_split(data, crit, &lists, &stats, min_leaf)
    };
    let Some(split) = split else {
        nodes.push(Node::Leaf(crit.leaf(&stats)));
        return id;
    };
    let col = &data.columns[split.feature];
    for &r in &lists[0] {
        goes_left[r as usize] = col[r as usize] <= split.threshold;
    }
    let (mut left_lists, mut right_lists) = (Vec::with_capacity(lists.len()), Vec::with_capacity(lists.len()));
    for list in lists {
        let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&r| goes_left[r as usize]);
        left_lists.push(l);
        right_lists.push(r);
    }
    nodes.push(Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = grow_node(data, crit, left_lists, depth + 1, max_depth, min_leaf, nodes, goes_left);
    let right = grow_node(
        data,
        crit,
        right_lists,
        depth + 1,
        max_depth,
        min_leaf,
        nodes,
        goes_left,
    );
    nodes[id] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    id
}

/// CART classification tree on Gini impurity. Single-class input yields a
/// single leaf.
pub fn train_tree<T: Real>(x: &Array2<T>, y: &[SleepStage], config: &TreeConfig) -> Result<TreeModel<T>> {
    let yi = check_training(x, y, 1)?;
    if config.max_depth == 0 || config.min_leaf == 0 {
        return Err(Error::Training("max_depth and min_leaf must be positive".into()));
    }
    let w = config.class_weighting.row_weights(&yi);
    let data = Presorted::new(x);
    Ok(grow(
        &data,
        &Gini { y: &yi, w: &w },
        None,
        config.max_depth,
        config.min_leaf,
    ))
}

impl<T: Real> Classifier<T> for TreeModel<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn margin_row(&self, x: ArrayView1<T>) -> [T; N_STAGES] {
        self.leaf_for(x).map(T::lit)
    }

    fn proba_from_margins(&self, margins: &[T; N_STAGES]) -> [T; N_STAGES] {
        *margins
    }
}
