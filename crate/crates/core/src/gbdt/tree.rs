use crate::error::{Error, Result};

/// Arena node. Rows with `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Binary regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Tree {
        Tree {
            nodes: vec![TreeNode::Leaf { weight }],
        }
    }

    /// Validates that the arena forms a single tree rooted at node 0.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Tree> {
        if nodes.is_empty() {
            return Err(Error::param("a tree needs at least one node"));
        }
        let mut parents = vec![0usize; nodes.len()];
        for node in &nodes {
            if let TreeNode::Split {
                threshold,
                left,
                right,
                ..
            } = *node
            {
                if !threshold.is_finite() {
                    return Err(Error::param("split thresholds must be finite"));
                }
                for child in [left, right] {
                    if child == 0 || child >= nodes.len() {
                        return Err(Error::param(format!("invalid child index {child}")));
                    }
                    parents[child] += 1;
                }
            }
        }
        if parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::param("every non-root node needs exactly one parent"));
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    #[inline]
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                TreeNode::Leaf { weight } => return weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, id: usize) -> usize {
            match *t.node(id) {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Largest feature index referenced by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }

    pub fn uses_feature(&self, feature: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n, TreeNode::Split { feature: f, .. } if *f == feature))
    }

    /// Node ids in pre-order (node, left subtree, right subtree).
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            out.push(id);
            if let TreeNode::Split { left, right, .. } = self.nodes[id] {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    /// Same tree with features renumbered through `map`.
    pub fn remap_features(&self, map: &[usize]) -> Tree {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match *n {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => TreeNode::Split {
                    feature: map[feature],
                    threshold,
                    left,
                    right,
                },
                TreeNode::Leaf { weight } => TreeNode::Leaf { weight },
            })
            .collect();
        Tree { nodes }
    }

    /// Canonical form with nodes renumbered in pre-order.
    pub fn canonical(&self) -> Tree {
        let order = self.preorder();
        let mut new_id = vec![0; self.nodes.len()];
        for (i, &id) in order.iter().enumerate() {
            new_id[id] = i;
        }
        let nodes = order
            .iter()
            .map(|&id| match self.nodes[id] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => TreeNode::Split {
                    feature,
                    threshold,
                    left: new_id[left],
                    right: new_id[right],
                },
                TreeNode::Leaf { weight } => TreeNode::Leaf { weight },
            })
            .collect();
        Tree { nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Tree {
        Tree::from_nodes(vec![
            TreeNode::Split {
                feature: 1,
                threshold: 2.5,
                left: 1,
                right: 2,
            },
            TreeNode::Leaf { weight: -1.0 },
            TreeNode::Leaf { weight: 3.0 },
        ])
        .unwrap()
    }

    #[test]
    fn routing_is_less_or_equal_left() {
        let t = stump();
        assert_eq!(t.predict(&[0.0, 2.5]), -1.0);
        assert_eq!(t.predict(&[0.0, 2.6]), 3.0);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.n_leaves(), 2);
        assert!(t.uses_feature(1) && !t.uses_feature(0));
    }

    #[test]
    fn rejects_malformed_arenas() {
        assert!(Tree::from_nodes(vec![]).is_err());
        let dangling = vec![TreeNode::Split {
            feature: 0,
            threshold: 0.0,
            left: 1,
            right: 2,
        }];
        assert!(Tree::from_nodes(dangling).is_err());
        let shared = vec![
            TreeNode::Split {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 1,
            },
            TreeNode::Leaf { weight: 0.0 },
        ];
        assert!(Tree::from_nodes(shared).is_err());
        let nan = vec![
            TreeNode::Split {
                feature: 0,
                threshold: f64::NAN,
                left: 1,
                right: 2,
            },
            TreeNode::Leaf { weight: 0.0 },
            TreeNode::Leaf { weight: 0.0 },
        ];
        assert!(Tree::from_nodes(nan).is_err());
    }

    #[test]
    fn canonical_is_preorder() {
        // root's right child stored before its left child
        let t = Tree::from_nodes(vec![
            TreeNode::Split {
                feature: 0,
                threshold: 1.0,
                left: 2,
                right: 1,
            },
            TreeNode::Leaf { weight: 5.0 },
            TreeNode::Leaf { weight: 4.0 },
        ])
        .unwrap();
        let c = t.canonical();
        assert_eq!(c.node(1), &TreeNode::Leaf { weight: 4.0 });
        for x in [0.0, 1.0, 2.0] {
            assert_eq!(c.predict(&[x]), t.predict(&[x]));
        }
    }
}
