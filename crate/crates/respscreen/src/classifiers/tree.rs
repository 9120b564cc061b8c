//! Gini-criterion decision tree over binary symptom features.

use crate::error::{Error, Result};

/// One tree node. Internal nodes test a symptom bit; leaves carry the
/// class-weighted COVID posterior with the raw and weighted sample
/// counts that produced it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        on_zero: Box<TreeNode>,
        on_one: Box<TreeNode>,
    },
    Leaf {
        probability: f64,
        samples: usize,
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TreeModel {
    pub root: TreeNode,
    pub min_samples_leaf: usize,
    pub n_features: usize,
}

/// Impurity decrease below this does not justify a split.
const MIN_IMPURITY_DECREASE: f64 = 1e-12;

struct Builder<'a> {
    bits: Vec<Vec<bool>>,
    labels: &'a [u8],
    weights: Vec<f64>,
    min_samples_leaf: usize,
    n_features: usize,
}

impl Builder<'_> {
    /// Weighted (positive, total) mass of a node.
    fn mass(&self, idx: &[usize]) -> (f64, f64) {
        let mut pos = 0.0;
        let mut total = 0.0;
        for &i in idx {
            total += self.weights[i];
            if self.labels[i] == 1 {
                pos += self.weights[i];
            }
        }
        (pos, total)
    }

    fn gini(pos: f64, total: f64) -> f64 {
        if total <= 0.0 {
            return 0.0;
        }
        let p = pos / total;
        1.0 - p * p - (1.0 - p) * (1.0 - p)
    }

    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let (pos, total) = self.mass(idx);
        TreeNode::Leaf {
            probability: pos / total,
            samples: idx.len(),
            weight: total,
        }
    }

    /// Greedy recursive split minimizing the weighted child Gini
    /// impurity. `tested` masks features already used on this path:
    /// a binary feature can separate a path only once.
    fn build(&self, idx: &[usize], tested: u32) -> TreeNode {
        let (pos, total) = self.mass(idx);
        if pos == 0.0 || pos == total {
            return self.leaf(idx);
        }
        let parent = Self::gini(pos, total);

        let mut best: Option<(f64, usize, Vec<usize>, Vec<usize>)> = None;
        for feature in 0..self.n_features {
            if tested & (1 << feature) != 0 {
                continue;
            }
            let (zeros, ones): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| !self.bits[i][feature]);
            if zeros.len() < self.min_samples_leaf || ones.len() < self.min_samples_leaf {
                continue;
            }
            let (pos0, tot0) = self.mass(&zeros);
            let (pos1, tot1) = self.mass(&ones);
            let after =
                (tot0 * Self::gini(pos0, tot0) + tot1 * Self::gini(pos1, tot1)) / total;
            if parent - after <= MIN_IMPURITY_DECREASE {
                continue;
            }
            // Strict comparison keeps the lowest feature index on ties.
            if best.as_ref().map_or(true, |(b, ..)| after < *b) {
                best = Some((after, feature, zeros, ones));
            }
        }

        match best {
            None => self.leaf(idx),
            Some((_, feature, zeros, ones)) => {
                let tested = tested | (1 << feature);
                TreeNode::Split {
                    feature,
                    on_zero: Box::new(self.build(&zeros, tested)),
                    on_one: Box::new(self.build(&ones, tested)),
                }
            }
        }
    }
}

/// Trains the tree. Inputs are binary features (anything above 0.5
/// counts as set). With `balanced`, each positive sample carries the
/// negative/positive count ratio as weight, which shifts every leaf
/// posterior toward the rarer class; `min_samples_leaf` constrains raw
/// sample counts, not weights.
pub fn train_tree(
    x: &[Vec<f64>],
    labels: &[u8],
    min_samples_leaf: usize,
    balanced: bool,
) -> Result<TreeModel> {
    if x.is_empty() {
        return Err(Error::Dataset("cannot train a tree on no samples".into()));
    }
    if x.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} rows for {} labels",
            x.len(),
            labels.len()
        )));
    }
    if min_samples_leaf == 0 {
        return Err(Error::Config("min_samples_leaf must be at least 1".into()));
    }
    let n_features = x[0].len();
    if n_features > 32 {
        return Err(Error::Config(format!(
            "tree supports at most 32 binary features, got {n_features}"
        )));
    }
    if let Some(bad) = x.iter().find(|r| r.len() != n_features) {
        return Err(Error::Config(format!(
            "rows disagree on dimension: {} vs {n_features}",
            bad.len()
        )));
    }

    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    let pos_weight = if balanced && n_pos > 0 && n_neg > 0 {
        n_neg as f64 / n_pos as f64
    } else {
        1.0
    };
    let builder = Builder {
        bits: x
            .iter()
            .map(|row| row.iter().map(|&v| v > 0.5).collect())
            .collect(),
        labels,
        weights: labels
            .iter()
            .map(|&y| if y == 1 { pos_weight } else { 1.0 })
            .collect(),
        min_samples_leaf,
        n_features,
    };
    let idx: Vec<usize> = (0..x.len()).collect();
    let root = builder.build(&idx, 0);
    Ok(TreeModel {
        root,
        min_samples_leaf,
        n_features,
    })
}

impl TreeModel {
    /// COVID posterior of the leaf the feature bits route to.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Config(format!(
                "input dimension {} does not match model dimension {}",
                x.len(),
                self.n_features
            )));
        }
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { probability, .. } => return Ok(*probability),
                TreeNode::Split {
                    feature,
                    on_zero,
                    on_one,
                } => {
                    node = if x[*feature] > 0.5 { on_one } else { on_zero };
                }
            }
        }
    }

    /// Depth-first leaf list: (path bits as (feature, value) pairs, leaf).
    pub fn leaves(&self) -> Vec<(Vec<(usize, bool)>, &TreeNode)> {
        let mut out = Vec::new();
        fn walk<'a>(
            node: &'a TreeNode,
            path: &mut Vec<(usize, bool)>,
            out: &mut Vec<(Vec<(usize, bool)>, &'a TreeNode)>,
        ) {
            match node {
                TreeNode::Leaf { .. } => out.push((path.clone(), node)),
                TreeNode::Split {
                    feature,
                    on_zero,
                    on_one,
                } => {
                    path.push((*feature, false));
                    walk(on_zero, path, out);
                    path.pop();
                    path.push((*feature, true));
                    walk(on_one, path, out);
                    path.pop();
                }
            }
        }
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }
}
