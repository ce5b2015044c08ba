use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gbdt::params::Hyperparams;
use crate::gbdt::split::{best_over_features, sort_rows_by_feature, SplitParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node<F> {
    /// `x[feature] < threshold` routes to `left`, otherwise `right`.
    Split {
        feature: usize,
        threshold: F,
        left: u32,
        right: u32,
        gain: F,
        cover: F,
    },
    Leaf {
        value: F,
    },
}

/// Inference layout. A leaf points at itself and keeps its value in
/// `threshold`, so every path can be walked for a fixed number of steps
/// without branching on the node kind.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FlatNode<F> {
    threshold: F,
    feature: u32,
    left: u32,
    right: u32,
}

const LANES: usize = 8;

/// Regression tree stored as a flat node array, root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree<F> {
    nodes: Vec<Node<F>>,
    flat: Vec<FlatNode<F>>,
    depth: usize,
}

impl<F: Scalar> Tree<F> {
    fn with_nodes(nodes: Vec<Node<F>>) -> Self {
        let flat = nodes
            .iter()
            .enumerate()
            .map(|(i, node)| match *node {
                Node::Leaf { value } => FlatNode {
                    threshold: value,
                    feature: 0,
                    left: i as u32,
                    right: i as u32,
                },
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => FlatNode {
                    threshold,
                    feature: feature as u32,
                    left,
                    right,
                },
            })
            .collect();
        let mut tree = Tree { nodes, flat, depth: 0 };
        tree.depth = tree.compute_depth();
        tree
    }

    pub fn leaf(value: F) -> Self {
        Tree::with_nodes(vec![Node::Leaf { value }])
    }

    pub fn stump(feature: usize, threshold: F, left: F, right: F) -> Self {
        Tree::with_nodes(vec![
            Node::Split {
                feature,
                threshold,
                left: 1,
                right: 2,
                gain: F::zero(),
                cover: F::zero(),
            },
            Node::Leaf { value: left },
            Node::Leaf { value: right },
        ])
    }

    /// Builds a tree from raw nodes. Children must sit after their parent and
    /// every non-root node must have exactly one parent.
    pub fn from_nodes(nodes: Vec<Node<F>>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::ModelFormat("tree without nodes".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = *node {
                for child in [left as usize, right as usize] {
                    if child <= i || child >= nodes.len() {
                        return Err(Error::ModelFormat(format!("node {i} has invalid child {child}")));
                    }
                    parents[child] += 1;
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::ModelFormat("tree nodes do not form a single tree".into()));
        }
        Ok(Tree::with_nodes(nodes))
    }

    pub fn nodes(&self) -> &[Node<F>] {
        &self.nodes
    }

    #[inline]
    pub fn predict(&self, row: &[F]) -> F {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if row[feature] < threshold { left } else { right } as usize;
                }
            }
        }
    }

    /// Adds `scale * tree(row)` to `out[r * stride + slot]` for every row of
    /// the row-major block `rows`. Rows are walked several at a time so
    /// their dependent loads overlap.
    pub(crate) fn accumulate(
        &self,
        rows: &[F],
        n_features: usize,
        scale: F,
        out: &mut [F],
        stride: usize,
        slot: usize,
    ) {
        let n = rows.len() / n_features;
        let mut r = 0;
        while r + LANES <= n {
            let block = &rows[r * n_features..(r + LANES) * n_features];
            let mut at = [0u32; LANES];
            for _ in 0..self.depth {
                for (lane, i) in at.iter_mut().enumerate() {
                    let node = &self.flat[*i as usize];
                    let x = block[lane * n_features + node.feature as usize];
                    *i = if x < node.threshold { node.left } else { node.right };
                }
            }
            for (lane, &i) in at.iter().enumerate() {
                let o = &mut out[(r + lane) * stride + slot];
                *o = *o + scale * self.flat[i as usize].threshold;
            }
            r += LANES;
        }
        for r in r..n {
            let o = &mut out[r * stride + slot];
            *o = *o + scale * self.predict(&rows[r * n_features..(r + 1) * n_features]);
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.depth
    }

    fn compute_depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = *node {
                depth[left as usize] = depth[i] + 1;
                depth[right as usize] = depth[i] + 1;
                max = max.max(depth[i] + 1);
            }
        }
        max
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = F> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            Node::Split { .. } => None,
        })
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, F)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, gain, .. } => Some((*feature, *gain)),
            Node::Leaf { .. } => None,
        })
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.splits().map(|(f, _)| f).max()
    }
}

/// Grows one tree from per-feature presorted row lists.
pub(crate) struct TreeBuilder<'a, F> {
    x: &'a FeatureMatrix<F>,
    grad: &'a [F],
    hess: &'a [F],
    params: SplitParams<F>,
    max_depth: usize,
    max_delta_step: F,
    goes_left: Vec<bool>,
    nodes: Vec<Node<F>>,
}

impl<'a, F: Scalar> TreeBuilder<'a, F> {
    pub fn new(x: &'a FeatureMatrix<F>, grad: &'a [F], hess: &'a [F], hp: &Hyperparams) -> Self {
        TreeBuilder {
            x,
            grad,
            hess,
            params: SplitParams::from_hyperparams(hp),
            max_depth: hp.max_depth,
            max_delta_step: F::of(hp.max_delta_step),
            goes_left: vec![false; x.n_rows()],
            nodes: Vec::new(),
        }
    }

    /// `sorted[f]` lists the node's rows ordered by feature `f`.
    pub fn build(mut self, sorted: &[Vec<u32>]) -> Tree<F> {
        self.grow(sorted, 0);
        Tree::with_nodes(self.nodes)
    }

    fn leaf_value(&self, g: F, h: F) -> F {
        let raw = -g / (h + self.params.lambda);
        if self.max_delta_step > F::zero() {
            raw.max(-self.max_delta_step).min(self.max_delta_step)
        } else {
            raw
        }
    }

    fn grow(&mut self, sorted: &[Vec<u32>], depth: usize) -> u32 {
        let rows = &sorted[0];
        let g: F = rows.iter().map(|&r| self.grad[r as usize]).sum();
        let h: F = rows.iter().map(|&r| self.hess[r as usize]).sum();
        let index = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(g, h),
        });
        if depth >= self.max_depth || rows.len() < 2 {
            return index;
        }
        let Some(split) = best_over_features(sorted, self.x, self.grad, self.hess, g, h, &self.params) else {
            return index;
        };

        for &r in rows {
            self.goes_left[r as usize] = self.x.get(r as usize, split.feature) < split.threshold;
        }
        let (left_lists, right_lists): (Vec<Vec<u32>>, Vec<Vec<u32>>) = sorted
            .iter()
            .map(|list| list.iter().partition(|&&r| self.goes_left[r as usize]))
            .unzip();

        let left = self.grow(&left_lists, depth + 1);
        drop(left_lists);
        let right = self.grow(&right_lists, depth + 1);
        self.nodes[index as usize] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            gain: split.gain,
            cover: h,
        };
        index
    }
}

/// Per-feature row orderings, computed once and reused by every tree.
pub(crate) fn presort<F: Scalar>(rows: &[u32], x: &FeatureMatrix<F>) -> Vec<Vec<u32>> {
    (0..x.n_cols()).map(|f| sort_rows_by_feature(rows, x, f)).collect()
}

/// Fits one regression tree to `grad`/`hess` over `rows`.
///
/// Splits recursively until `max_depth`, no admissible split, or fewer than
/// two rows. Leaves hold `-G / (H + lambda)`, clamped to
/// `[-max_delta_step, max_delta_step]` when the step cap is positive.
pub fn build_tree<F: Scalar>(
    rows: &[usize],
    x: &FeatureMatrix<F>,
    grad: &[F],
    hess: &[F],
    hp: &Hyperparams,
) -> Tree<F> {
    assert!(!rows.is_empty(), "build_tree needs at least one row");
    let rows: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    TreeBuilder::new(x, grad, hess, hp).build(&presort(&rows, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(depth: usize, mds: f64) -> Hyperparams {
        Hyperparams {
            max_depth: depth,
            max_delta_step: mds,
            min_child_weight: 0.0,
            lambda_reg: 1.0,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn leaf_at_depth_limit() {
        let x = FeatureMatrix::new(1, vec![1.0, 2.0]);
        // max_depth 1 allows one split, whose children are leaves.
        let t = build_tree(&[0, 1], &x, &[-1.0, 2.0], &[1.0, 1.0], &hp(1, 0.0));
        assert_eq!(t.depth(), 1);
        let values: Vec<f64> = t.leaf_values().collect();
        assert_eq!(values, vec![0.5, -1.0]);
    }

    #[test]
    fn leaf_value_is_clamped() {
        let x = FeatureMatrix::new(1, vec![1.0]);
        let t = build_tree(&[0], &x, &[-100.0], &[1.0], &hp(3, 4.0));
        assert_eq!(t.nodes(), &[Node::Leaf { value: 4.0 }]);
        let t = build_tree(&[0], &x, &[-100.0], &[1.0], &hp(3, 0.0));
        assert_eq!(t.nodes(), &[Node::Leaf { value: 50.0 }]);
    }

    #[test]
    fn zero_gradient_is_zero_leaf() {
        let x = FeatureMatrix::new(1, vec![1.0, 2.0, 3.0]);
        let t = build_tree(&[0, 1, 2], &x, &[0.0; 3], &[1.0; 3], &hp(4, 4.0));
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.leaf_values().next().unwrap(), 0.0);
    }

    #[test]
    fn stump_routing() {
        let t = Tree::stump(0, 3.0f64, -1.0, 1.0);
        assert_eq!(t.predict(&[5.0]), 1.0);
        assert_eq!(t.predict(&[3.0]), 1.0);
        assert_eq!(t.predict(&[2.9]), -1.0);
    }

    #[test]
    fn from_nodes_rejects_malformed() {
        let leaf = Node::Leaf { value: 0.0f64 };
        let split = |l, r| Node::Split {
            feature: 0,
            threshold: 0.0,
            left: l,
            right: r,
            gain: 0.0,
            cover: 0.0,
        };
        assert!(Tree::from_nodes(vec![split(1, 2), leaf, leaf]).is_ok());
        assert!(Tree::from_nodes(vec![split(1, 1), leaf, leaf]).is_err());
        assert!(Tree::from_nodes(vec![split(0, 2), leaf, leaf]).is_err());
        assert!(Tree::from_nodes(vec![split(1, 5), leaf]).is_err());
        assert!(Tree::from_nodes(vec![leaf, leaf]).is_err());
        assert!(Tree::<f64>::from_nodes(vec![]).is_err());
    }

    #[test]
    fn deep_tree_separates_points() {
        let x = FeatureMatrix::new(1, (0..8).map(f64::from).collect());
        let g: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let t = build_tree(&(0..8).collect::<Vec<_>>(), &x, &g, &[1.0; 8], &hp(8, 0.0));
        assert!(t.depth() <= 8);
        for (i, gi) in g.iter().enumerate() {
            let v = t.predict(&[i as f64]);
            assert_eq!(v.signum(), -gi.signum(), "row {i}");
        }
    }
}
