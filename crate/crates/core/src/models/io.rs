//! Versioned little-endian model files: `NIML` (logistic), `NITR` (tree) and
//! `NIGB` (boosted ensemble). Each starts with the magic and a `u16` version.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{BoostedEnsemble, BoostedTree, LogisticModel, Node, TrainedModel, TrainingMeta, Tree};
use crate::error::{Error, Result};
use crate::psg_io::{SleepStage, N_STAGES};
use crate::scalar::Real;

const VERSION: u16 = 1;
type Le = LittleEndian;

fn write_tree<T: Real, L, W: Write>(
    t: &Tree<T, L>,
    w: &mut W,
    leaf: impl Fn(&L, &mut W) -> std::io::Result<()>,
) -> std::io::Result<()> {
    w.write_u64::<Le>(t.n_features as u64)?;
    w.write_u64::<Le>(t.max_depth as u64)?;
    w.write_u64::<Le>(t.nodes.len() as u64)?;
    for node in &t.nodes {
        match node {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                w.write_u8(0)?;
                w.write_u64::<Le>(*feature as u64)?;
                w.write_f64::<Le>(threshold.as_f64())?;
                w.write_u64::<Le>(*left as u64)?;
                w.write_u64::<Le>(*right as u64)?;
            }
            Node::Leaf(l) => {
                w.write_u8(1)?;
                leaf(l, w)?;
            }
        }
    }
    Ok(())
}

fn read_tree<T: Real, L, R: Read>(r: &mut R, leaf: impl Fn(&mut R) -> Result<L>) -> Result<Tree<T, L>> {
    let n_features = r.read_u64::<Le>()? as usize;
    let max_depth = r.read_u64::<Le>()? as usize;
    let n_nodes = r.read_u64::<Le>()? as usize;
    if n_nodes == 0 {
        return Err(Error::Format("tree has no nodes".into()));
    }
    let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
    for i in 0..n_nodes {
        match r.read_u8()? {
            0 => {
                let feature = r.read_u64::<Le>()? as usize;
                let threshold = T::lit(r.read_f64::<Le>()?);
                let left = r.read_u64::<Le>()? as usize;
                let right = r.read_u64::<Le>()? as usize;
                if feature >= n_features || left <= i || right <= i || left >= n_nodes || right >= n_nodes {
                    return Err(Error::Format(format!("malformed split node {i}")));
                }
                nodes.push(Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                });
            }
            1 => nodes.push(Node::Leaf(leaf(r)?)),
            tag => return Err(Error::Format(format!("unknown node tag {tag}"))),
        }
    }
    Ok(Tree {
        nodes,
        max_depth,
        n_features,
    })
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; n];
    r.read_f64_into::<Le>(&mut v)?;
    Ok(v)
}

pub fn write_model<T: Real, W: Write>(model: &TrainedModel<T>, mut w: W) -> Result<()> {
    match model {
        TrainedModel::Logistic(m) => {
            w.write_all(b"NIML")?;
            w.write_u16::<Le>(VERSION)?;
            w.write_u64::<Le>(m.weights.ncols() as u64)?;
            w.write_f64::<Le>(m.l2)?;
            w.write_u64::<Le>(m.meta.iterations as u64)?;
            w.write_f64::<Le>(m.meta.objective)?;
            w.write_f64::<Le>(m.meta.gradient_max_abs)?;
            w.write_u8(m.meta.converged as u8)?;
            for v in m.weights.iter().chain(m.bias.iter()) {
                w.write_f64::<Le>(v.as_f64())?;
            }
        }
        TrainedModel::Tree(t) => {
            w.write_all(b"NITR")?;
            w.write_u16::<Le>(VERSION)?;
            write_tree(t, &mut w, |d, w| d.iter().try_for_each(|&p| w.write_f64::<Le>(p)))?;
        }
        TrainedModel::Gbt(g) => {
            w.write_all(b"NIGB")?;
            w.write_u16::<Le>(VERSION)?;
            w.write_u64::<Le>(g.n_features as u64)?;
            w.write_u64::<Le>(g.n_rounds as u64)?;
            for v in &g.base_score {
                w.write_f64::<Le>(v.as_f64())?;
            }
            w.write_u64::<Le>(g.trees.len() as u64)?;
            for bt in &g.trees {
                w.write_u64::<Le>(bt.class_index as u64)?;
                w.write_f64::<Le>(bt.learning_rate)?;
                write_tree(&bt.tree, &mut w, |v, w| w.write_f64::<Le>(v.as_f64()))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<T: Real, R: Read>(mut r: R) -> Result<TrainedModel<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    let version = r.read_u16::<Le>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported model file version {version}")));
    }
    let model = match &magic {
        b"NIML" => {
            let p = r.read_u64::<Le>()? as usize;
            let l2 = r.read_f64::<Le>()?;
            let meta = TrainingMeta {
                iterations: r.read_u64::<Le>()? as usize,
                objective: r.read_f64::<Le>()?,
                gradient_max_abs: r.read_f64::<Le>()?,
                converged: r.read_u8()? != 0,
            };
            let weights = Array2::from_shape_vec((N_STAGES, p), read_f64s(&mut r, N_STAGES * p)?)
                .map_err(|e| Error::Format(e.to_string()))?
                .mapv(T::lit);
            let bias = Array1::from(read_f64s(&mut r, N_STAGES)?).mapv(T::lit);
            TrainedModel::Logistic(LogisticModel {
                weights,
                bias,
                l2,
                meta,
            })
        }
        b"NITR" => TrainedModel::Tree(read_tree(&mut r, |r| {
            let v = read_f64s(r, N_STAGES)?;
            Ok(std::array::from_fn(|c| v[c]))
        })?),
        b"NIGB" => {
            let n_features = r.read_u64::<Le>()? as usize;
            let n_rounds = r.read_u64::<Le>()? as usize;
            let base_score = Array1::from(read_f64s(&mut r, N_STAGES)?).mapv(T::lit);
            let n_trees = r.read_u64::<Le>()? as usize;
            let mut trees = Vec::with_capacity(n_trees.min(1 << 20));
            for _ in 0..n_trees {
                let class_index = r.read_u64::<Le>()? as usize;
                let learning_rate = r.read_f64::<Le>()?;
                let tree = read_tree(&mut r, |r| Ok(T::lit(r.read_f64::<Le>()?)))?;
                if class_index >= N_STAGES || tree.n_features != n_features {
                    return Err(Error::Format("boosted tree does not match the ensemble".into()));
                }
                trees.push(BoostedTree {
                    class_index,
                    tree,
                    learning_rate,
                });
            }
            TrainedModel::Gbt(BoostedEnsemble {
                trees,
                n_rounds,
                base_score,
                n_features,
            })
        }
        _ => return Err(Error::Format("not a model file (bad magic)".into())),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after model".into()));
    }
    Ok(model)
}

/// Inspection view of a logistic model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticExport {
    pub classes: Vec<SleepStage>,
    pub feature_names: Vec<String>,
    /// One row per class.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub l2: f64,
    pub meta: TrainingMeta,
}

impl LogisticExport {
    pub fn new<T: Real>(m: &LogisticModel<T>, feature_names: &[String]) -> Result<Self> {
        if feature_names.len() != m.weights.ncols() {
            return Err(Error::Dimension("feature name count does not match the model".into()));
        }
        Ok(Self {
            classes: SleepStage::ALL.to_vec(),
            feature_names: feature_names.to_vec(),
            weights: m
                .weights
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v.as_f64()).collect())
                .collect(),
            bias: m.bias.iter().map(|v| v.as_f64()).collect(),
            l2: m.l2,
            meta: m.meta,
        })
    }
}
