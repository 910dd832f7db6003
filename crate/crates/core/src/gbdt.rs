//! Second-order gradient-boosted regression trees with logistic loss.
//!
//! Exact greedy split search over sorted feature values, L2-regularized leaf
//! weights and a minimum split gain. Small-sample by design: every candidate
//! threshold is evaluated.

use std::path::Path;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbmConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub min_split_gain: f64,
    pub min_child_hessian: f64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 3,
            learning_rate: 0.1,
            l2_reg: 1.0,
            min_split_gain: 0.0,
            min_child_hessian: 1e-3,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_trees >= 1
            && self.max_depth >= 1
            && self.learning_rate > 0.0
            && self.learning_rate <= 1.0
            && self.l2_reg >= 0.0
            && self.min_split_gain >= 0.0
            && self.min_child_hessian >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid boosting configuration {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// `x[feature] < threshold` (or NaN) goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        weight: f64,
    },
}

impl Node {
    pub fn eval(&self, x: ArrayView1<f64>) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = x[*feature];
                    node = if v < *threshold || v.is_nan() {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: Node,
}

impl RegressionTree {
    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        self.root.eval(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedGbm {
    pub config: GbmConfig,
    pub n_features: usize,
    pub base_margin: f64,
    pub trees: Vec<RegressionTree>,
    /// Mean training logistic loss after each tree (index 0: base margin only).
    pub train_losses: Vec<f64>,
}

pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln p + (1-y) ln(1-p)]` with `p = sigmoid(margin)`, computed stably.
pub fn logistic_loss(margin: f64, y: f64) -> f64 {
    let softplus = margin.max(0.0) + (-margin.abs()).exp().ln_1p();
    softplus - y * margin
}

/// First and second derivative of [`logistic_loss`] with respect to the margin.
pub fn logistic_grad_hess(margin: f64, y: f64) -> (f64, f64) {
    let p = sigmoid(margin);
    (p - y, p * (1.0 - p))
}

/// `-G / (H + λ)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Gain of splitting a node with totals `(g, h)` into `(gl, hl)` and the rest.
pub fn split_gain(gl: f64, hl: f64, g: f64, h: f64, config: &GbmConfig) -> f64 {
    let lambda = config.l2_reg;
    0.5 * (score(gl, hl, lambda) + score(g - gl, h - hl, lambda) - score(g, h, lambda))
        - config.min_split_gain
}

const GAIN_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Exact greedy search over all features and midpoints between consecutive
/// distinct values of the instances in `node`.
///
/// Only positive-gain splits whose children both reach `min_child_hessian`
/// are eligible; ties keep the lower feature index, then the lower threshold.
pub fn best_split(
    x: ArrayView2<f64>,
    grad: &[f64],
    hess: &[f64],
    node: &[usize],
    config: &GbmConfig,
) -> Option<Split> {
    if node.len() < 2 {
        return None;
    }
    let g: f64 = node.iter().map(|&i| grad[i]).sum();
    let h: f64 = node.iter().map(|&i| hess[i]).sum();
    let mut best: Option<Split> = None;
    let mut order = node.to_vec();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
        let (mut gl, mut hl) = (0.0, 0.0);
        for w in 0..order.len() - 1 {
            let i = order[w];
            gl += grad[i];
            hl += hess[i];
            let (lo, hi) = (x[[i, f]], x[[order[w + 1], f]]);
            if lo == hi {
                continue;
            }
            if hl < config.min_child_hessian || h - hl < config.min_child_hessian {
                continue;
            }
            let gain = split_gain(gl, hl, g, h, config);
            // Gains within rounding noise count as ties.
            if gain > 0.0
                && best
                    .as_ref()
                    .is_none_or(|b| gain > b.gain + GAIN_TIE_TOL * b.gain.abs().max(1.0))
            {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
    }
    best
}

/// A threshold strictly above `lo` and at most `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) * 0.5;
    if t > lo && t <= hi {
        t
    } else {
        hi
    }
}

fn build(
    x: ArrayView2<f64>,
    grad: &[f64],
    hess: &[f64],
    node: Vec<usize>,
    depth: usize,
    config: &GbmConfig,
) -> Node {
    let split = if depth < config.max_depth {
        best_split(x, grad, hess, &node, config)
    } else {
        None
    };
    match split {
        Some(s) => {
            let (left, right): (Vec<usize>, Vec<usize>) = node
                .into_iter()
                .partition(|&i| x[[i, s.feature]] < s.threshold);
            Node::Split {
                feature: s.feature,
                threshold: s.threshold,
                left: Box::new(build(x, grad, hess, left, depth + 1, config)),
                right: Box::new(build(x, grad, hess, right, depth + 1, config)),
            }
        }
        None => {
            let g: f64 = node.iter().map(|&i| grad[i]).sum();
            let h: f64 = node.iter().map(|&i| hess[i]).sum();
            Node::Leaf {
                weight: leaf_weight(g, h, config.l2_reg),
            }
        }
    }
}

fn mean_loss(margins: &[f64], y: &[f64]) -> f64 {
    margins
        .iter()
        .zip(y)
        .map(|(&m, &t)| logistic_loss(m, t))
        .sum::<f64>()
        / margins.len() as f64
}

/// Fit trees sequentially on the gradients of the current margins.
///
/// `labels[i]` is true for the positive (fake) class.
pub fn train_gbm(x: ArrayView2<f64>, labels: &[bool], config: &GbmConfig) -> Result<TrainedGbm> {
    config.validate()?;
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("boosting features"));
    }
    if x.nrows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows, {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite feature value".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 {
        return Err(Error::SingleClass("bonafide"));
    }
    if neg == 0 {
        return Err(Error::SingleClass("fake"));
    }
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l))).collect();
    let base_margin = (pos as f64 / neg as f64).ln();
    let mut margins = vec![base_margin; labels.len()];
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut train_losses = vec![mean_loss(&margins, &y)];
    let all: Vec<usize> = (0..labels.len()).collect();
    for _ in 0..config.n_trees {
        let (grad, hess): (Vec<f64>, Vec<f64>) = margins
            .iter()
            .zip(&y)
            .map(|(&m, &t)| logistic_grad_hess(m, t))
            .unzip();
        let tree = RegressionTree {
            root: build(x, &grad, &hess, all.clone(), 0, config),
        };
        for (i, m) in margins.iter_mut().enumerate() {
            *m += config.learning_rate * tree.predict(x.row(i));
        }
        train_losses.push(mean_loss(&margins, &y));
        trees.push(tree);
    }
    Ok(TrainedGbm {
        config: config.clone(),
        n_features: x.ncols(),
        base_margin,
        trees,
        train_losses,
    })
}

impl TrainedGbm {
    pub fn predict_margin(&self, x: ArrayView1<f64>) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(self.base_margin + self.config.learning_rate * sum)
    }

    /// Probability of the positive (fake) class.
    pub fn predict_proba(&self, x: ArrayView1<f64>) -> Result<f64> {
        Ok(sigmoid(self.predict_margin(x)?))
    }

    pub fn predict_proba_rows(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        x.rows()
            .into_iter()
            .map(|r| self.predict_proba(r))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| Error::Unwritable {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
