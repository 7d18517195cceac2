//! Exact Euclidean minimal spanning trees and Friedman-Rafsky cross counts.
//!
//! Trees are built with Prim's algorithm on the complete graph, O(n²) time
//! and O(n) extra space. Candidate edges are ordered by `(weight, min index,
//! max index)`, a strict total order, so the tree is unique and independent
//! of scan order. Zero-length edges from duplicate points are legal.

use log::warn;
use rayon::prelude::*;

use crate::{Error, Result};

/// Symmetric edge weights of a complete graph on `len()` vertices.
pub trait EdgeWeights: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn weight(&self, i: usize, j: usize) -> f64;
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn check_points(features: &[f64], n_features: usize) -> Result<usize> {
    if n_features == 0 || !features.len().is_multiple_of(n_features) {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: n_features,
        });
    }
    let n = features.len() / n_features;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 points, got {n}")));
    }
    if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / n_features,
            column: pos % n_features,
        });
    }
    Ok(n)
}

/// Dense matrix of pairwise Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Computes all pairwise distances between the rows of a row-major
    /// matrix. Rows are filled in parallel; every entry is computed by the
    /// same expression, so the result does not depend on scheduling.
    pub fn from_features(features: &[f64], n_features: usize) -> Result<Self> {
        let n = check_points(features, n_features)?;
        let mut entries = vec![0.0; n * n];
        entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let xi = &features[i * n_features..(i + 1) * n_features];
            for (j, slot) in row.iter_mut().enumerate() {
                if j != i {
                    *slot = euclidean(xi, &features[j * n_features..(j + 1) * n_features]);
                }
            }
        });
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

impl EdgeWeights for DistanceMatrix {
    fn len(&self) -> usize {
        self.n
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// Euclidean distances computed on demand; O(n·d) memory instead of O(n²).
#[derive(Debug, Clone, Copy)]
pub struct PointCloud<'a> {
    features: &'a [f64],
    n_features: usize,
    n: usize,
}

impl<'a> PointCloud<'a> {
    pub fn new(features: &'a [f64], n_features: usize) -> Result<Self> {
        let n = check_points(features, n_features)?;
        Ok(Self {
            features,
            n_features,
            n,
        })
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }
}

impl EdgeWeights for PointCloud<'_> {
    fn len(&self) -> usize {
        self.n
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }
}

/// Undirected edges that a spanning tree may not use.
#[derive(Debug, Clone, Default)]
pub struct EdgeSet {
    neighbors: Vec<Vec<usize>>,
    len: usize,
}

impl EdgeSet {
    pub fn new(n: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); n],
            len: 0,
        }
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        if !self.contains(i, j) {
            self.neighbors[i].push(j);
            self.neighbors[j].push(i);
            self.len += 1;
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors.get(i).is_some_and(|nb| nb.contains(&j))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn neighbors(&self, i: usize) -> &[usize] {
        self.neighbors.get(i).map_or(&[], Vec::as_slice)
    }
}

/// A spanning tree given by its `n - 1` edges `(i, j)` with `i < j`, in the
/// order Prim's algorithm added them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl SpanningTree {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[inline]
fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

#[inline]
fn precedes(w: f64, pair: (usize, usize), best_w: f64, best_pair: (usize, usize)) -> bool {
    w < best_w || (w == best_w && pair < best_pair)
}

/// Minimal spanning tree of the complete graph minus `excluded`.
pub fn mst<W: EdgeWeights + ?Sized>(weights: &W, excluded: &EdgeSet) -> Result<SpanningTree> {
    let n = weights.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 points, got {n}")));
    }
    const NONE: (usize, usize) = (usize::MAX, usize::MAX);
    let mut best_w = vec![f64::INFINITY; n];
    let mut best_pair = vec![NONE; n];
    let mut blocked = vec![false; n];
    let mut remaining: Vec<usize> = (1..n).collect();
    let mut edges = Vec::with_capacity(n - 1);
    let mut tree_weights = Vec::with_capacity(n - 1);

    let mut u = 0;
    while !remaining.is_empty() {
        for &v in excluded.neighbors(u) {
            blocked[v] = true;
        }
        let mut pick = usize::MAX;
        for (slot, &v) in remaining.iter().enumerate() {
            if !blocked[v] {
                let w = weights.weight(u, v);
                let pair = ordered(u, v);
                if precedes(w, pair, best_w[v], best_pair[v]) {
                    best_w[v] = w;
                    best_pair[v] = pair;
                }
            }
            if best_pair[v] != NONE
                && (pick == usize::MAX || {
                    let p = remaining[pick];
                    precedes(best_w[v], best_pair[v], best_w[p], best_pair[p])
                })
            {
                pick = slot;
            }
        }
        for &v in excluded.neighbors(u) {
            blocked[v] = false;
        }
        if pick == usize::MAX {
            return Err(Error::Disconnected { n });
        }
        let v = remaining.swap_remove(pick);
        edges.push(best_pair[v]);
        tree_weights.push(best_w[v]);
        u = v;
    }
    Ok(SpanningTree {
        n,
        edges,
        weights: tree_weights,
    })
}

/// A sequence of pairwise edge-disjoint minimal spanning trees.
#[derive(Debug, Clone)]
pub struct OrthogonalMsts {
    pub trees: Vec<SpanningTree>,
    pub requested: usize,
}

impl OrthogonalMsts {
    /// False when the graph ran out of edges before `requested` trees.
    pub fn is_complete(&self) -> bool {
        self.trees.len() == self.requested
    }
}

/// Builds up to `count` trees, each an MST after removing every edge used by
/// the trees before it. Stops early, with a warning, when the remaining graph
/// is disconnected; the first tree always exists.
pub fn orthogonal_msts<W: EdgeWeights + ?Sized>(weights: &W, count: usize) -> Result<OrthogonalMsts> {
    if count == 0 {
        return Err(Error::InvalidArgument("tree count must be at least 1".into()));
    }
    let mut excluded = EdgeSet::new(weights.len());
    let mut trees = Vec::with_capacity(count);
    for t in 0..count {
        match mst(weights, &excluded) {
            Ok(tree) => {
                for &(i, j) in tree.edges() {
                    excluded.insert(i, j);
                }
                trees.push(tree);
            }
            Err(Error::Disconnected { .. }) if t > 0 => {
                warn!("only {t} of {count} orthogonal spanning trees exist on {} points", weights.len());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(OrthogonalMsts {
        trees,
        requested: count,
    })
}

/// Friedman-Rafsky statistic: edges joining the two membership groups.
pub fn cross_count(tree: &SpanningTree, membership: &[bool]) -> Result<usize> {
    if membership.len() != tree.n() {
        return Err(Error::LengthMismatch {
            left: membership.len(),
            right: tree.n(),
        });
    }
    if membership.iter().all(|&m| m) || membership.iter().all(|&m| !m) {
        return Err(Error::SingleGroup);
    }
    Ok(tree
        .edges()
        .iter()
        .filter(|&&(i, j)| membership[i] != membership[j])
        .count())
}

/// One-vs-rest cross counts for every class from a single pass over the
/// tree: entry `k` counts edges with exactly one endpoint in class `k`.
pub fn ovr_cross_counts(tree: &SpanningTree, labels: &[usize], n_classes: usize) -> Result<Vec<usize>> {
    if labels.len() != tree.n() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: tree.n(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range")));
    }
    let mut counts = vec![0; n_classes];
    for &(i, j) in tree.edges() {
        let (a, b) = (labels[i], labels[j]);
        if a != b {
            counts[a] += 1;
            counts[b] += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimum spanning weight by enumerating all n^(n-2) labeled trees via
    /// Prüfer sequences.
    fn brute_force_min_weight(d: &DistanceMatrix) -> f64 {
        let n = d.n();
        if n == 2 {
            return d.get(0, 1);
        }
        let len = n - 2;
        let mut seq = vec![0usize; len];
        let mut best = f64::INFINITY;
        loop {
            let mut degree = vec![1usize; n];
            for &s in &seq {
                degree[s] += 1;
            }
            let mut total = 0.0;
            for &s in &seq {
                let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
                total += d.get(leaf, s);
                degree[leaf] -= 1;
                degree[s] -= 1;
            }
            let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
            total += d.get(rest[0], rest[1]);
            best = best.min(total);

            let mut pos = 0;
            loop {
                if pos == len {
                    return best;
                }
                seq[pos] += 1;
                if seq[pos] < n {
                    break;
                }
                seq[pos] = 0;
                pos += 1;
            }
        }
    }

    fn line(points: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_features(points, 1).unwrap()
    }

    fn is_spanning_tree(tree: &SpanningTree) -> bool {
        let n = tree.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        if tree.edges().len() != n - 1 {
            return false;
        }
        for &(i, j) in tree.edges() {
            if i >= j {
                return false;
            }
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }

    #[test]
    fn distances() {
        assert_eq!(line(&[0.0, 3.0]).get(0, 1), 3.0);
        let d = DistanceMatrix::from_features(&[0.0, 0.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(1, 1), 0.0);
        let dup = DistanceMatrix::from_features(&[1.0, 2.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(dup.get(0, 1), 0.0);
        assert!(DistanceMatrix::from_features(&[0.0, f64::NAN], 1).is_err());
    }

    #[test]
    fn collinear_mst() {
        let tree = mst(&line(&[0.0, 1.0, 3.0, 7.0]), &EdgeSet::default()).unwrap();
        let mut edges = tree.edges().to_vec();
        edges.sort_unstable();
        assert_eq!(edges, vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(tree.total_weight(), 7.0);
    }

    #[test]
    fn two_points() {
        let tree = mst(&line(&[5.0, -1.0]), &EdgeSet::default()).unwrap();
        assert_eq!(tree.edges(), &[(0, 1)]);
    }

    #[test]
    fn duplicate_points_tie_break_by_index() {
        let tree = mst(&line(&[0.0, 0.0, 0.0]), &EdgeSet::default()).unwrap();
        assert_eq!(tree.edges(), &[(0, 1), (0, 2)]);
        assert_eq!(tree.total_weight(), 0.0);
    }

    #[test]
    fn disconnected_admissible_graph() {
        let d = line(&[0.0, 1.0, 2.0]);
        let mut excluded = EdgeSet::new(3);
        excluded.insert(0, 1);
        excluded.insert(0, 2);
        assert!(matches!(mst(&d, &excluded), Err(Error::Disconnected { n: 3 })));
    }

    #[test]
    fn point_cloud_matches_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<f64> = (0..60).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let dense = orthogonal_msts(&DistanceMatrix::from_features(&pts, 3).unwrap(), 3).unwrap();
        let lazy = orthogonal_msts(&PointCloud::new(&pts, 3).unwrap(), 3).unwrap();
        assert_eq!(dense.trees, lazy.trees);
    }

    #[test]
    fn orthogonal_single_tree_is_mst() {
        let d = line(&[0.0, 1.0, 3.0, 7.0, 8.0]);
        let one = orthogonal_msts(&d, 1).unwrap();
        assert_eq!(one.trees, vec![mst(&d, &EdgeSet::default()).unwrap()]);
    }

    #[test]
    fn orthogonal_exhaustion_is_partial() {
        // K4 has 6 edges: at most 2 edge-disjoint spanning trees.
        let d = DistanceMatrix::from_features(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.5], 2).unwrap();
        let res = orthogonal_msts(&d, 3).unwrap();
        assert_eq!(res.trees.len(), 2);
        assert!(!res.is_complete());
        assert!(orthogonal_msts(&d, 0).is_err());
    }

    #[test]
    fn orthogonal_trees_are_disjoint_and_heavier() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<f64> = (0..80).map(|_| rng.gen_range(0.0..1.0)).collect();
        let d = DistanceMatrix::from_features(&pts, 2).unwrap();
        let res = orthogonal_msts(&d, 3).unwrap();
        assert!(res.is_complete());
        for (a, ta) in res.trees.iter().enumerate() {
            assert!(is_spanning_tree(ta));
            for tb in &res.trees[a + 1..] {
                assert!(ta.edges().iter().all(|e| !tb.edges().contains(e)));
                assert!(ta.total_weight() <= tb.total_weight());
            }
        }
    }

    #[test]
    fn cross_count_examples() {
        let tree = mst(&line(&[0.0, 1.0, 3.0, 7.0]), &EdgeSet::default()).unwrap();
        assert_eq!(cross_count(&tree, &[true, true, false, false]).unwrap(), 1);
        assert!(matches!(cross_count(&tree, &[true; 4]), Err(Error::SingleGroup)));

        let interleaved: Vec<f64> = (0..10).map(f64::from).collect();
        let tree = mst(&line(&interleaved), &EdgeSet::default()).unwrap();
        let membership: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        assert_eq!(cross_count(&tree, &membership).unwrap(), 9);

        let clusters = [0.0, 0.1, 0.2, 100.0, 100.1, 100.3];
        let tree = mst(&line(&clusters), &EdgeSet::default()).unwrap();
        assert_eq!(cross_count(&tree, &[true, true, true, false, false, false]).unwrap(), 1);
    }

    #[test]
    fn ovr_counts_example() {
        let tree = mst(&line(&[0.0, 1.0, 3.0, 7.0, 8.0]), &EdgeSet::default()).unwrap();
        let mut edges = tree.edges().to_vec();
        edges.sort_unstable();
        assert_eq!(edges, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert_eq!(ovr_cross_counts(&tree, &[0, 0, 1, 1, 2], 3).unwrap(), vec![1, 2, 1]);
    }

    #[test]
    fn brute_force_agreement_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let n = rng.gen_range(2..=7);
            let pts: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let d = DistanceMatrix::from_features(&pts, 2).unwrap();
            let tree = mst(&d, &EdgeSet::default()).unwrap();
            assert!(is_spanning_tree(&tree));
            assert!((tree.total_weight() - brute_force_min_weight(&d)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn permutation_relabels_tree(
            pts in proptest::collection::vec(-100.0f64..100.0, 4..24),
            seed: u64,
        ) {
            let n = pts.len() / 2;
            let pts = &pts[..2 * n];
            let mut perm: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
            let permuted: Vec<f64> = perm.iter().flat_map(|&p| pts[2 * p..2 * p + 2].to_vec()).collect();
            let d = DistanceMatrix::from_features(pts, 2).unwrap();
            // Distinct distances make the tree unique.
            let mut all: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| d.get(i, j)).collect();
            all.sort_by(f64::total_cmp);
            prop_assume!(all.windows(2).all(|w| w[0] < w[1]));
            let a = mst(&d, &EdgeSet::default()).unwrap();
            let b = mst(&DistanceMatrix::from_features(&permuted, 2).unwrap(), &EdgeSet::default()).unwrap();
            let mut ea: Vec<_> = a.edges().to_vec();
            let mut eb: Vec<_> = b.edges().iter().map(|&(i, j)| ordered(perm[i], perm[j])).collect();
            ea.sort_unstable();
            eb.sort_unstable();
            prop_assert_eq!(ea, eb);
        }

        #[test]
        fn cross_count_complement_symmetric(mask in proptest::collection::vec(any::<bool>(), 3..30)) {
            prop_assume!(mask.iter().any(|&m| m) && mask.iter().any(|&m| !m));
            let pts: Vec<f64> = (0..mask.len()).map(|i| ((i * 37) % 11) as f64 + i as f64 * 0.01).collect();
            let tree = mst(&line(&pts), &EdgeSet::default()).unwrap();
            let flipped: Vec<bool> = mask.iter().map(|m| !m).collect();
            let r = cross_count(&tree, &mask).unwrap();
            prop_assert_eq!(r, cross_count(&tree, &flipped).unwrap());
            prop_assert!(r >= 1 && r < mask.len());
        }
    }
}
