//! CART regression tree with variance-reduction splits.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Rows with `x[feature] < threshold`.
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Sum of a node's targets in a canonical (sorted) order, so the result does
/// not depend on the order rows arrived in.
fn canonical_mean(y: &[f64], rows: &[usize]) -> f64 {
    let mut v: Vec<f64> = rows.iter().map(|&k| y[k]).collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

fn best_split(x: &Matrix, y: &[f64], rows: &[usize]) -> Option<Best> {
    let n = rows.len() as f64;
    let mut sorted_y: Vec<f64> = rows.iter().map(|&k| y[k]).collect();
    sorted_y.sort_by(f64::total_cmp);
    let total: f64 = sorted_y.iter().sum();
    let base = total * total / n;
    let mut best: Option<Best> = None;
    let mut order = rows.to_vec();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(y[a].total_cmp(&y[b])));
        let mut left_sum = 0.0;
        for (pos, w) in order.windows(2).enumerate() {
            left_sum += y[w[0]];
            let (lo, hi) = (x.get(w[0], f), x.get(w[1], f));
            if lo == hi {
                continue;
            }
            let nl = (pos + 1) as f64;
            let nr = n - nl;
            let right_sum = total - left_sum;
            // SSE reduction = Σ_l²/n_l + Σ_r²/n_r − Σ²/n.
            let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - base;
            if best.as_ref().map_or(true, |b| gain > b.gain) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold <= lo {
                    threshold = hi;
                }
                best = Some(Best {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > 1e-12 * (1.0 + base.abs()))
}

fn grow(x: &Matrix, y: &[f64], rows: Vec<usize>, depth: usize, params: &TreeParams) -> TreeNode {
    let leaf = |rows: &[usize]| TreeNode::Leaf {
        value: canonical_mean(y, rows),
        samples: rows.len(),
    };
    if rows.len() < params.min_samples_split || params.max_depth.is_some_and(|d| depth >= d) {
        return leaf(&rows);
    }
    let Some(split) = best_split(x, y, &rows) else {
        return leaf(&rows);
    };
    let (left, right): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&k| x.get(k, split.feature) < split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(x, y, left, depth + 1, params)),
        right: Box::new(grow(x, y, right, depth + 1, params)),
    }
}

pub fn fit_tree(params: &TreeParams, x: &Matrix, y: &[f64]) -> TreeNode {
    grow(x, y, (0..x.nrows()).collect(), 0, params)
}
