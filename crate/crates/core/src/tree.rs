//! Class graphs weighted by normalized pairwise Bayes error estimates, and
//! the binary hierarchy obtained by cutting them recursively.
//!
//! A minimum cut separates the groups of classes that are easiest to tell
//! apart, so the root of the hierarchy handles the easiest split. Weights
//! are fixed once; subgraphs reuse them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ber::PairwiseBerMatrix;
use crate::{Error, Result};

/// Complete undirected graph over class ids with non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGraph {
    classes: Vec<usize>,
    weights: Vec<f64>,
}

impl ClassGraph {
    /// `weights` is a row-major `k × k` matrix indexed by position in
    /// `classes`; the diagonal is ignored.
    pub fn new(classes: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let k = classes.len();
        if k < 2 {
            return Err(Error::InvalidArgument("a class graph needs at least 2 vertices".into()));
        }
        if weights.len() != k * k {
            return Err(Error::LengthMismatch {
                left: weights.len(),
                right: k * k,
            });
        }
        let mut sorted = classes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != k {
            return Err(Error::InvalidArgument("duplicate class ids".into()));
        }
        for a in 0..k {
            for b in a + 1..k {
                let (w, w_t) = (weights[a * k + b], weights[b * k + a]);
                if !(w >= 0.0) || !w.is_finite() || w != w_t {
                    return Err(Error::InvalidArgument(format!(
                        "weight between {} and {} must be finite, non-negative and symmetric",
                        classes[a], classes[b]
                    )));
                }
            }
        }
        Ok(Self { classes, weights })
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn n_vertices(&self) -> usize {
        self.classes.len()
    }

    /// Weight between the vertices at positions `a` and `b`.
    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.n_vertices() + b]
    }

    /// Induced complete subgraph on the given class ids.
    pub fn subgraph(&self, classes: &[usize]) -> Result<Self> {
        let pos: Vec<usize> = classes
            .iter()
            .map(|c| {
                self.classes
                    .iter()
                    .position(|x| x == c)
                    .ok_or_else(|| Error::UnknownClass(c.to_string()))
            })
            .collect::<Result<_>>()?;
        let weights = pos
            .iter()
            .flat_map(|&a| pos.iter().map(move |&b| (a, b)))
            .map(|(a, b)| self.weight(a, b))
            .collect();
        Self::new(classes.to_vec(), weights)
    }
}

/// Weights every class pair by its normalized, bias-corrected estimate.
pub fn build_class_graph(estimates: &PairwiseBerMatrix) -> Result<ClassGraph> {
    let k = estimates.n_classes();
    let mut weights = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let e = estimates.get(a, b).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "missing estimate for classes {} and {}",
                    estimates.classes()[a],
                    estimates.classes()[b]
                ))
            })?;
            weights[a * k + b] = e.p_hat_normalized;
        }
    }
    // a missing mirror entry shows up as asymmetry
    ClassGraph::new((0..k).collect(), weights)
}

/// A bipartition of the graph's classes and the total weight across it.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub v0: Vec<usize>,
    pub v1: Vec<usize>,
    pub weight: f64,
}

/// Global minimum cut by Stoer-Wagner.
///
/// Vertices are scanned in ascending class id; the most tightly connected
/// vertex is added next with ties to the earlier one, and the first phase
/// reaching the minimum wins. `v0` is the side merged into the last vertex
/// of that phase.
pub fn min_cut(graph: &ClassGraph) -> Result<Cut> {
    let k = graph.n_vertices();
    if k < 2 {
        return Err(Error::InvalidArgument("min cut needs at least 2 vertices".into()));
    }
    let mut active: Vec<usize> = (0..k).collect();
    active.sort_by_key(|&p| graph.classes[p]);
    let mut w = graph.weights.clone();
    let mut groups: Vec<Vec<usize>> = (0..k).map(|p| vec![p]).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;

    while active.len() > 1 {
        let mut added = vec![false; k];
        let mut conn = vec![0.0; k];
        let mut prev = active[0];
        let mut last = active[0];
        added[last] = true;
        for &u in &active {
            conn[u] += w[last * k + u];
        }
        let mut cut_of_phase = 0.0;
        for _ in 1..active.len() {
            let mut pick = None;
            for &v in &active {
                if !added[v] && pick.is_none_or(|p: usize| conn[v] > conn[p]) {
                    pick = Some(v);
                }
            }
            let v = pick.expect("an unadded vertex remains");
            prev = last;
            last = v;
            cut_of_phase = conn[v];
            added[v] = true;
            for &u in &active {
                conn[u] += w[v * k + u];
            }
        }
        if best.as_ref().is_none_or(|(b, _)| cut_of_phase < *b) {
            best = Some((cut_of_phase, groups[last].clone()));
        }
        let moved = std::mem::take(&mut groups[last]);
        groups[prev].extend(moved);
        for &u in &active {
            if u != prev && u != last {
                let merged = w[prev * k + u] + w[last * k + u];
                w[prev * k + u] = merged;
                w[u * k + prev] = merged;
            }
        }
        active.retain(|&u| u != last);
    }

    let (_, side) = best.expect("at least one phase ran");
    let mut in_v0 = vec![false; k];
    for &p in &side {
        in_v0[p] = true;
    }
    let mut weight = 0.0;
    for a in 0..k {
        for b in 0..k {
            if in_v0[a] && !in_v0[b] {
                weight += graph.weight(a, b);
            }
        }
    }
    let mut v0: Vec<usize> = side.iter().map(|&p| graph.classes[p]).collect();
    let mut v1: Vec<usize> = (0..k).filter(|&p| !in_v0[p]).map(|p| graph.classes[p]).collect();
    v0.sort_unstable();
    v1.sort_unstable();
    Ok(Cut { v0, v1, weight })
}

/// Node of a [`ClassificationTree`].
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        class: usize,
    },
    Split {
        left: Vec<usize>,
        right: Vec<usize>,
        weight: f64,
        /// Node indices of the `left` and `right` subtrees.
        children: [usize; 2],
    },
}

/// Binary tree over class subsets with one split per internal node.
/// Nodes are stored in preorder, so the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationTree {
    nodes: Vec<TreeNode>,
}

impl ClassificationTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Indices of internal nodes, in preorder.
    pub fn internal_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i], TreeNode::Split { .. }))
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.len() - self.internal_nodes().len()
    }

    /// Leaf classes from left to right.
    pub fn leaf_classes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Leaf { class } => Some(*class),
                TreeNode::Split { .. } => None,
            })
            .collect()
    }

    /// Walks from the root, asking `go_left` at every internal node, and
    /// returns the leaf class reached.
    pub fn route(&self, mut go_left: impl FnMut(usize) -> bool) -> usize {
        let mut at = self.root();
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { class } => return *class,
                TreeNode::Split { children, .. } => {
                    at = if go_left(at) { children[0] } else { children[1] };
                }
            }
        }
    }

    /// Nested JSON form with class ids replaced by `names`.
    pub fn to_json(&self, names: &[String]) -> TreeJson {
        self.node_json(self.root(), names)
    }

    fn node_json(&self, at: usize, names: &[String]) -> TreeJson {
        match &self.nodes[at] {
            TreeNode::Leaf { class } => TreeJson::Leaf(names[*class].clone()),
            TreeNode::Split {
                left,
                right,
                weight,
                children,
            } => TreeJson::Split {
                left: left.iter().map(|&c| names[c].clone()).collect(),
                right: right.iter().map(|&c| names[c].clone()).collect(),
                weight: *weight,
                children: children.iter().map(|&c| self.node_json(c, names)).collect(),
            },
        }
    }

    /// Rebuilds a tree from its JSON form, checking every split against
    /// the leaves below it.
    pub fn from_json(json: &TreeJson, names: &[String]) -> Result<Self> {
        let mut nodes = Vec::new();
        Self::push_json(json, names, &mut nodes)?;
        let tree = Self { nodes };
        let mut leaves = tree.leaf_classes();
        leaves.sort_unstable();
        if leaves != (0..names.len()).collect::<Vec<_>>() {
            return Err(Error::Model("tree leaves do not cover every class exactly once".into()));
        }
        Ok(tree)
    }

    fn push_json(json: &TreeJson, names: &[String], nodes: &mut Vec<TreeNode>) -> Result<Vec<usize>> {
        let lookup = |name: &String| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Model(format!("unknown class {name:?} in tree")))
        };
        match json {
            TreeJson::Leaf(name) => {
                let class = lookup(name)?;
                nodes.push(TreeNode::Leaf { class });
                Ok(vec![class])
            }
            TreeJson::Split {
                left,
                right,
                weight,
                children,
            } => {
                if children.len() != 2 {
                    return Err(Error::Model("a split needs exactly 2 children".into()));
                }
                let left: Vec<usize> = left.iter().map(lookup).collect::<Result<_>>()?;
                let right: Vec<usize> = right.iter().map(lookup).collect::<Result<_>>()?;
                let at = nodes.len();
                nodes.push(TreeNode::Leaf { class: usize::MAX });
                let first = nodes.len();
                let mut below_left = Self::push_json(&children[0], names, nodes)?;
                let second = nodes.len();
                let mut below_right = Self::push_json(&children[1], names, nodes)?;
                below_left.sort_unstable();
                below_right.sort_unstable();
                let (mut l, mut r) = (left.clone(), right.clone());
                l.sort_unstable();
                r.sort_unstable();
                if l != below_left || r != below_right {
                    return Err(Error::Model("split class sets disagree with their subtrees".into()));
                }
                nodes[at] = TreeNode::Split {
                    left,
                    right,
                    weight: *weight,
                    children: [first, second],
                };
                Ok(l.into_iter().chain(r).collect())
            }
        }
    }

    /// Indented text rendering, one line per node.
    pub fn render_text(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.render_node(self.root(), 0, names, &mut out);
        out
    }

    fn render_node(&self, at: usize, depth: usize, names: &[String], out: &mut String) {
        let indent = "  ".repeat(depth);
        match &self.nodes[at] {
            TreeNode::Leaf { class } => {
                let _ = writeln!(out, "{indent}{}", names[*class]);
            }
            TreeNode::Split {
                left,
                right,
                weight,
                children,
            } => {
                let join = |s: &[usize]| s.iter().map(|&c| names[c].as_str()).collect::<Vec<_>>().join(", ");
                let _ = writeln!(out, "{indent}{{{}}} | {{{}}}  (cut weight {weight:.6})", join(left), join(right));
                self.render_node(children[0], depth + 1, names, out);
                self.render_node(children[1], depth + 1, names, out);
            }
        }
    }
}

/// Serialized tree node: a leaf label or a split with two children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeJson {
    Leaf(String),
    Split {
        left: Vec<String>,
        right: Vec<String>,
        weight: f64,
        children: Vec<TreeJson>,
    },
}

/// Recursively min-cuts the graph until every part is a single class.
pub fn build_hierarchy(graph: &ClassGraph) -> Result<ClassificationTree> {
    let mut nodes = Vec::with_capacity(2 * graph.n_vertices() - 1);
    grow(graph, graph.classes(), &mut nodes)?;
    Ok(ClassificationTree { nodes })
}

fn grow(graph: &ClassGraph, classes: &[usize], nodes: &mut Vec<TreeNode>) -> Result<usize> {
    let at = nodes.len();
    if let [class] = classes {
        nodes.push(TreeNode::Leaf { class: *class });
        return Ok(at);
    }
    let cut = min_cut(&graph.subgraph(classes)?)?;
    nodes.push(TreeNode::Leaf { class: usize::MAX });
    let first = grow(graph, &cut.v0, nodes)?;
    let second = grow(graph, &cut.v1, nodes)?;
    nodes[at] = TreeNode::Split {
        left: cut.v0,
        right: cut.v1,
        weight: cut.weight,
        children: [first, second],
    };
    Ok(at)
}
