//! Plain-text model format.
//!
//! ```text
//! procxai-model 1
//! variant exact-greedy
//! base_score -0.0123
//! learning_rate 0.1
//! features 2
//! feature Max_Injection_Pressure
//! feature Average_Back_Pressure
//! trees 1
//! tree 3
//! split 0 141.55
//! leaf -0.2
//! leaf 0.4
//! ```
//!
//! Each `tree <n>` block lists its `n` nodes in pre-order. Floats are written
//! in shortest round-trip form, so predictions survive a save/load unchanged.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gbdt::ensemble::{BoostedEnsemble, Variant};
use crate::gbdt::tree::{Tree, TreeNode};

const MAGIC: &str = "procxai-model 1";

pub fn to_text(ens: &BoostedEnsemble) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "variant {}", ens.variant());
    let _ = writeln!(s, "base_score {}", ens.base_score());
    let _ = writeln!(s, "learning_rate {}", ens.learning_rate());
    let _ = writeln!(s, "features {}", ens.n_features());
    for name in ens.feature_names() {
        let _ = writeln!(s, "feature {name}");
    }
    let _ = writeln!(s, "trees {}", ens.trees().len());
    for tree in ens.trees() {
        let order = tree.preorder();
        let _ = writeln!(s, "tree {}", order.len());
        for id in order {
            match *tree.node(id) {
                TreeNode::Split {
                    feature, threshold, ..
                } => {
                    let _ = writeln!(s, "split {feature} {threshold}");
                }
                TreeNode::Leaf { weight } => {
                    let _ = writeln!(s, "leaf {weight}");
                }
            }
        }
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::ModelFormat {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    /// Next line, which must be `<key> <rest>`; returns `rest`.
    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected `{key}`")))
    }

    fn keyed_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let rest = self.keyed(key)?;
        self.parse(rest)
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.trim()
            .parse()
            .map_err(|_| self.err(format!("cannot parse `{s}`")))
    }
}

enum RawNode {
    Split(usize, f64),
    Leaf(f64),
}

fn read_tree(lines: &mut Lines<'_>, n_nodes: usize) -> Result<Tree> {
    let mut raw = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let l = lines.next()?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        match parts.as_slice() {
            ["split", f, t] => raw.push(RawNode::Split(lines.parse(f)?, lines.parse(t)?)),
            ["leaf", w] => raw.push(RawNode::Leaf(lines.parse(w)?)),
            _ => return Err(lines.err(format!("bad node line `{l}`"))),
        }
    }
    // rebuild the arena from pre-order; returns the id of the subtree at `pos`
    fn build(raw: &[RawNode], pos: &mut usize, nodes: &mut Vec<TreeNode>) -> Option<usize> {
        let node = raw.get(*pos)?;
        *pos += 1;
        let id = nodes.len();
        match *node {
            RawNode::Leaf(weight) => nodes.push(TreeNode::Leaf { weight }),
            RawNode::Split(feature, threshold) => {
                nodes.push(TreeNode::Leaf { weight: 0.0 });
                let left = build(raw, pos, nodes)?;
                let right = build(raw, pos, nodes)?;
                nodes[id] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        Some(id)
    }
    let mut pos = 0;
    let mut nodes = Vec::with_capacity(n_nodes);
    if build(&raw, &mut pos, &mut nodes).is_none() {
        return Err(lines.err("tree block ends before the tree is complete"));
    }
    if pos != raw.len() {
        return Err(lines.err("tree block has trailing nodes"));
    }
    Tree::from_nodes(nodes).map_err(|e| lines.err(e.to_string()))
}

pub fn from_text(text: &str) -> Result<BoostedEnsemble> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.next()?.trim() != MAGIC {
        return Err(lines.err(format!("missing `{MAGIC}` header")));
    }
    let variant: Variant = lines.keyed("variant")?.trim().parse()?;
    let base: f64 = lines.keyed_parse("base_score")?;
    let lr: f64 = lines.keyed_parse("learning_rate")?;
    let n_features: usize = lines.keyed_parse("features")?;
    let mut names = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        names.push(lines.keyed("feature")?.to_string());
    }
    let n_trees: usize = lines.keyed_parse("trees")?;
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes: usize = lines.keyed_parse("tree")?;
        trees.push(read_tree(&mut lines, n_nodes)?);
    }
    BoostedEnsemble::new(variant, base, lr, names, trees)
}

pub fn save_model(ens: &BoostedEnsemble, path: &Path) -> Result<()> {
    fs::write(path, to_text(ens)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<BoostedEnsemble> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BoostedEnsemble {
        let t1 = Tree::from_nodes(vec![
            TreeNode::Split {
                feature: 1,
                threshold: 0.1 + 0.2,
                left: 1,
                right: 2,
            },
            TreeNode::Leaf {
                weight: -1.0 / 3.0,
            },
            TreeNode::Split {
                feature: 0,
                threshold: -7.25,
                left: 3,
                right: 4,
            },
            TreeNode::Leaf { weight: 1e-300 },
            TreeNode::Leaf { weight: 2.0 / 7.0 },
        ])
        .unwrap();
        BoostedEnsemble::new(
            Variant::GossLeafwise,
            -0.123456789,
            0.1,
            vec!["Max_Injection_Pressure".into(), "Barrel Temperature 5".into()],
            vec![t1, Tree::leaf(0.5)],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let e = sample();
        let back = from_text(&to_text(&e)).unwrap();
        assert_eq!(back.feature_names(), e.feature_names());
        for (a, b) in e.trees().iter().zip(back.trees()) {
            assert_eq!(a.canonical(), b.canonical());
        }
        for row in [[0.0, 0.3], [-8.0, 1.0], [-7.25, 0.31]] {
            assert_eq!(
                e.raw_score(&row).to_bits(),
                back.raw_score(&row).to_bits()
            );
        }
        assert_eq!(to_text(&back), to_text(&e));
    }

    #[test]
    fn malformed_files() {
        assert!(from_text("").is_err());
        assert!(from_text("something else\n").is_err());
        let mut t = to_text(&sample());
        t = t.replace("tree 5", "tree 4");
        assert!(matches!(from_text(&t), Err(Error::ModelFormat { .. })));
        let bad_leaf = to_text(&sample()).replace("leaf 0.5", "leaf x");
        assert!(from_text(&bad_leaf).is_err());
    }
}
