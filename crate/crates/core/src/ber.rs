//! Henze-Penrose estimates of the Bayes error rate from MST cross counts.
//!
//! A cross count `R` over `n = n1 + n2` samples gives `u = 1 - 2R/n`, from
//! which the Bayes error is bracketed by `1/2 - sqrt(u)/2` and `1/2 - u/2`;
//! the point estimate is the midpoint of the two. Capping `R` at the
//! threshold `gamma` keeps the estimate at or below the smallest empirical
//! prior, and dividing by that prior normalizes it to `[0, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::mst::{self, DistanceMatrix, OrthogonalMsts, PointCloud};
use crate::{Error, Result};

/// Default number of orthogonal spanning trees averaged per estimate.
pub const DEFAULT_TREES: usize = 3;

/// Above this many points distances are recomputed on demand instead of
/// being stored in an n×n matrix.
const DENSE_LIMIT: usize = 4096;

/// Finite-sample Henze-Penrose divergence `1 - n R / (2 n1 n2)`, clamped
/// below at zero.
pub fn hp_divergence(r: f64, n1: usize, n2: usize) -> f64 {
    assert!(n1 > 0 && n2 > 0, "both classes need samples");
    let n = (n1 + n2) as f64;
    (1.0 - n * r / (2.0 * n1 as f64 * n2 as f64)).max(0.0)
}

/// Cross count at which the point estimate equals the smallest empirical
/// prior `m`: `2nm - 3n/4 + (n/4) sqrt(9 - 16m)`.
pub fn gamma_threshold(n1: usize, n2: usize) -> f64 {
    assert!(n1 > 0 && n2 > 0, "both classes need samples");
    let n = (n1 + n2) as f64;
    let m = n1.min(n2) as f64 / n;
    2.0 * n * m - 0.75 * n + 0.25 * n * (9.0 - 16.0 * m).sqrt()
}

/// `min(gamma, r)`.
pub fn bias_corrected_r(r: f64, n1: usize, n2: usize) -> f64 {
    r.min(gamma_threshold(n1, n2))
}

/// Bounds and midpoint estimate for a given `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpBounds {
    pub u: f64,
    pub lower: f64,
    pub upper: f64,
    pub estimate: f64,
}

impl HpBounds {
    /// `u` is clamped to `[0, 1]` first.
    pub fn from_u(u: f64) -> Self {
        let u = u.clamp(0.0, 1.0);
        let root = u.sqrt();
        Self {
            u,
            lower: 0.5 - 0.5 * root,
            upper: 0.5 - 0.5 * u,
            estimate: 0.5 - 0.25 * root - 0.25 * u,
        }
    }

    /// From a cross count over `n` samples, using `u = 1 - 2R/n`.
    pub fn from_cross_count(r: f64, n: usize) -> Self {
        Self::from_u(1.0 - 2.0 * r / n as f64)
    }
}

/// Estimate of the Bayes error between two sample groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerEstimate {
    /// Cross count, averaged over the spanning trees used.
    pub r_raw: f64,
    pub r_corrected: f64,
    pub u_hp: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    pub p_hat: f64,
    pub p_hat_normalized: f64,
    pub n1: usize,
    pub n2: usize,
}

impl BerEstimate {
    /// Applies the bias correction to a raw (possibly tree-averaged) cross
    /// count and derives every field.
    pub fn from_cross_count(r_raw: f64, n1: usize, n2: usize) -> Self {
        let mut est = estimate_from_r(bias_corrected_r(r_raw, n1, n2), n1, n2);
        est.r_raw = r_raw;
        est
    }

    /// The smaller empirical prior `min(n1, n2) / n`.
    pub fn min_prior(&self) -> f64 {
        self.n1.min(self.n2) as f64 / (self.n1 + self.n2) as f64
    }

    /// Point estimate without the bias correction.
    pub fn uncorrected_p_hat(&self) -> f64 {
        HpBounds::from_cross_count(self.r_raw, self.n1 + self.n2).estimate
    }
}

/// Estimate from an already corrected cross count; `r_raw` is set equal to
/// it.
pub fn estimate_from_r(r_corrected: f64, n1: usize, n2: usize) -> BerEstimate {
    assert!(n1 > 0 && n2 > 0, "both classes need samples");
    let n = n1 + n2;
    let bounds = HpBounds::from_cross_count(r_corrected, n);
    let min_prior = n1.min(n2) as f64 / n as f64;
    BerEstimate {
        r_raw: r_corrected,
        r_corrected,
        u_hp: bounds.u,
        p_lower: bounds.lower,
        p_upper: bounds.upper,
        p_hat: bounds.estimate,
        p_hat_normalized: (bounds.estimate / min_prior).clamp(0.0, 1.0),
        n1,
        n2,
    }
}

/// Orthogonal spanning trees over row-major points, stored densely when
/// small enough.
pub fn spanning_trees(features: &[f64], n_features: usize, n_trees: usize) -> Result<OrthogonalMsts> {
    let n = features.len() / n_features.max(1);
    if n <= DENSE_LIMIT {
        mst::orthogonal_msts(&DistanceMatrix::from_features(features, n_features)?, n_trees)
    } else {
        mst::orthogonal_msts(&PointCloud::new(features, n_features)?, n_trees)
    }
}

fn require_samples(ds: &LabeledDataset, class: usize, required: usize) -> Result<usize> {
    if class >= ds.n_classes() {
        return Err(Error::UnknownClass(class.to_string()));
    }
    let count = ds.labels().iter().filter(|&&y| y == class).count();
    if count < required {
        return Err(Error::ClassTooSmall {
            class: ds.class_name(class).to_string(),
            count,
            required,
        });
    }
    Ok(count)
}

/// Bias-corrected estimate of the Bayes error between two classes, from
/// the cross count averaged over `n_trees` orthogonal spanning trees of
/// their pooled samples.
pub fn pairwise_ber(ds: &LabeledDataset, class_a: usize, class_b: usize, n_trees: usize) -> Result<BerEstimate> {
    if class_a == class_b {
        return Err(Error::InvalidArgument("classes of a pair must differ".into()));
    }
    let n1 = require_samples(ds, class_a, 2)?;
    let n2 = require_samples(ds, class_b, 2)?;
    let pair = ds.restrict_to_classes(&[class_a, class_b])?;
    let membership: Vec<bool> = pair.labels().iter().map(|&y| y == 0).collect();
    let trees = spanning_trees(pair.features(), pair.n_features(), n_trees)?;
    let mut total = 0usize;
    for tree in &trees.trees {
        total += mst::cross_count(tree, &membership)?;
    }
    let r_raw = total as f64 / trees.trees.len() as f64;
    Ok(BerEstimate::from_cross_count(r_raw, n1, n2))
}

/// Symmetric matrix of pairwise estimates; the diagonal is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseBerMatrix {
    classes: Vec<String>,
    n_trees: usize,
    entries: Vec<Option<BerEstimate>>,
}

impl PairwiseBerMatrix {
    /// Assembles a matrix from upper-triangle estimates `(a, b, estimate)`.
    pub fn from_pairs(
        classes: Vec<String>,
        n_trees: usize,
        pairs: impl IntoIterator<Item = (usize, usize, BerEstimate)>,
    ) -> Self {
        let k = classes.len();
        let mut entries = vec![None; k * k];
        for (a, b, est) in pairs {
            entries[a * k + b] = Some(est);
            let mut mirrored = est;
            std::mem::swap(&mut mirrored.n1, &mut mirrored.n2);
            entries[b * k + a] = Some(mirrored);
        }
        Self {
            classes,
            n_trees,
            entries,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    pub fn get(&self, a: usize, b: usize) -> Option<&BerEstimate> {
        self.entries[a * self.n_classes() + b].as_ref()
    }

    /// Normalized estimates as nested rows, `None` on the diagonal.
    pub fn normalized_grid(&self) -> Vec<Vec<Option<f64>>> {
        let k = self.n_classes();
        (0..k)
            .map(|a| (0..k).map(|b| self.get(a, b).map(|e| e.p_hat_normalized)).collect())
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<Option<BerEstimate>>> {
        self.entries.chunks(self.n_classes()).map(<[_]>::to_vec).collect()
    }

    /// Mean of the normalized estimates over unordered pairs.
    pub fn mean_normalized(&self) -> f64 {
        let k = self.n_classes();
        let (sum, count) = (0..k)
            .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
            .filter_map(|(a, b)| self.get(a, b))
            .fold((0.0, 0usize), |(s, c), e| (s + e.p_hat_normalized, c + 1));
        sum / count as f64
    }

    /// Largest normalized estimate over unordered pairs.
    pub fn max_normalized(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .map(|e| e.p_hat_normalized)
            .fold(0.0, f64::max)
    }
}

/// Pairwise estimates for every class pair, computed in parallel. The
/// assembly is by pair index, so the result does not depend on scheduling.
pub fn pairwise_ber_matrix(ds: &LabeledDataset, n_trees: usize) -> Result<PairwiseBerMatrix> {
    let k = ds.n_classes();
    for class in 0..k {
        require_samples(ds, class, 2)?;
    }
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let estimates = pairs
        .par_iter()
        .map(|&(a, b)| pairwise_ber(ds, a, b, n_trees).map(|e| (a, b, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PairwiseBerMatrix::from_pairs(ds.class_names().to_vec(), n_trees, estimates))
}

/// One-vs-rest estimates for every class from a single set of orthogonal
/// spanning trees over the whole dataset.
pub fn ovr_ber_estimates(ds: &LabeledDataset, n_trees: usize) -> Result<Vec<BerEstimate>> {
    let k = ds.n_classes();
    let trees = spanning_trees(ds.features(), ds.n_features(), n_trees)?;
    let mut totals = vec![0usize; k];
    for tree in &trees.trees {
        for (t, c) in totals.iter_mut().zip(mst::ovr_cross_counts(tree, ds.labels(), k)?) {
            *t += c;
        }
    }
    let n = ds.n_samples();
    let counts = ds.class_counts();
    Ok(totals
        .into_iter()
        .zip(counts)
        .map(|(total, n_k)| BerEstimate::from_cross_count(total as f64 / trees.trees.len() as f64, n_k, n - n_k))
        .collect())
}

/// JSON document for pairwise and one-vs-rest results, keyed by original
/// class labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BerReport {
    pub classes: Vec<String>,
    pub pairwise: Option<Vec<Vec<Option<BerEstimate>>>>,
    pub ovr: Option<Vec<BerEstimate>>,
    pub n_trees: usize,
}

impl BerReport {
    pub fn new(
        classes: Vec<String>,
        n_trees: usize,
        pairwise: Option<&PairwiseBerMatrix>,
        ovr: Option<Vec<BerEstimate>>,
    ) -> Self {
        Self {
            classes,
            pairwise: pairwise.map(PairwiseBerMatrix::rows),
            ovr,
            n_trees,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{sample_gaussian_mixture, GaussianSpec};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Solves `estimate(r) = min prior` for `r` by bisection on the
    /// uncorrected point estimate, which is increasing in `r`.
    fn gamma_by_bisection(n1: usize, n2: usize) -> f64 {
        let n = n1 + n2;
        let target = n1.min(n2) as f64 / n as f64;
        let (mut lo, mut hi) = (0.0, n as f64 / 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if HpBounds::from_cross_count(mid, n).estimate < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn divergence_examples() {
        assert_eq!(hp_divergence(1.0, 2, 2), 0.5);
        let r_null = 2.0 * 30.0 * 70.0 / 100.0;
        assert!(close(hp_divergence(r_null, 30, 70), 0.0, 1e-15));
        assert!(close(hp_divergence(1.0, 500, 500), 0.998, 1e-15));
        assert_eq!(hp_divergence(90.0, 10, 10), 0.0);
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_threshold(2, 2), 2.0);
        assert!(close(gamma_threshold(15, 85), 19.226_162_893_3, 1e-6));
        assert!(close(gamma_threshold(85, 15), gamma_threshold(15, 85), 0.0));
    }

    #[test]
    fn gamma_matches_root_finding() {
        for &(n1, n2) in &[(1, 1), (2, 7), (15, 85), (150, 850), (333, 667), (40, 41), (999, 1)] {
            let g = gamma_threshold(n1, n2);
            assert!(close(g, gamma_by_bisection(n1, n2), 1e-9 * (n1 + n2) as f64), "{n1} {n2}");
        }
    }

    #[test]
    fn correction_examples() {
        assert!(close(bias_corrected_r(25.0, 15, 85), 19.226_162_893_3, 1e-6));
        assert_eq!(bias_corrected_r(1.0, 2, 2), 1.0);
        let g = gamma_threshold(15, 85);
        assert_eq!(bias_corrected_r(g, 15, 85), g);
    }

    #[test]
    fn estimate_examples() {
        let e = estimate_from_r(1.0, 2, 2);
        assert_eq!(e.u_hp, 0.5);
        assert!(close(e.p_hat, 0.5 - 0.25 * 0.5f64.sqrt() - 0.125, 1e-15));
        assert!(close(e.p_hat, 0.198_223, 1e-6));

        let capped = BerEstimate::from_cross_count(25.0, 15, 85);
        assert!(close(capped.p_hat, 0.15, 1e-12));
        assert!(close(capped.p_hat_normalized, 1.0, 1e-12));
        assert_eq!(capped.r_raw, 25.0);
        assert!(capped.uncorrected_p_hat() > 0.15);

        let perfect = HpBounds::from_u(1.0);
        assert_eq!((perfect.lower, perfect.upper, perfect.estimate), (0.0, 0.0, 0.0));
        let clamped = estimate_from_r(-1.0, 3, 3);
        assert_eq!(clamped.u_hp, 1.0);
        assert_eq!(clamped.p_hat, 0.0);
    }

    #[test]
    fn monotone_in_cross_count() {
        for &(n1, n2) in &[(10usize, 10usize), (15, 85), (3, 200)] {
            let n = n1 + n2;
            let mut prev = estimate_from_r(0.0, n1, n2);
            for step in 1..=400 {
                let r = step as f64 * (n - 1) as f64 / 400.0;
                let cur = BerEstimate::from_cross_count(r, n1, n2);
                assert!(cur.p_lower >= prev.p_lower);
                assert!(cur.p_hat >= prev.p_hat);
                assert!(cur.p_upper >= prev.p_upper);
                prev = cur;
            }
        }
    }

    proptest! {
        #[test]
        fn cap_and_ordering(n1 in 1usize..2000, n2 in 1usize..2000, frac in 0.0f64..1.0) {
            let n = n1 + n2;
            let r = frac * (n - 1) as f64;
            let e = BerEstimate::from_cross_count(r, n1, n2);
            let min_prior = e.min_prior();
            prop_assert!(e.r_corrected <= e.r_raw);
            prop_assert!(e.r_corrected <= gamma_threshold(n1, n2));
            prop_assert!(e.p_lower <= e.p_hat && e.p_hat <= e.p_upper);
            prop_assert!(e.p_hat <= min_prior + 1e-12);
            prop_assert!((0.0..=1.0).contains(&e.p_hat_normalized));
            if r >= gamma_threshold(n1, n2) {
                prop_assert!((e.p_hat - min_prior).abs() <= 1e-12);
            } else {
                prop_assert!(e.p_hat < min_prior);
            }
        }

        #[test]
        fn equal_prior_identity(half in 1usize..1000, frac in 0.0f64..1.0) {
            let n = 2 * half;
            let r = frac * half as f64; // keeps the divergence non-negative
            let from_divergence = hp_divergence(r, half, half);
            let u = HpBounds::from_cross_count(r, n).u;
            prop_assert!((u - from_divergence).abs() <= 1e-12);
        }
    }

    fn blobs(specs: &[GaussianSpec], n: usize, seed: u64) -> LabeledDataset {
        sample_gaussian_mixture(specs, n, seed).unwrap()
    }

    #[test]
    fn separated_classes_have_tiny_error() {
        let specs = [
            GaussianSpec::new(vec![0.0, 0.0], 1.0, 0.5),
            GaussianSpec::new(vec![1e6, 0.0], 1.0, 0.5),
        ];
        let ds = blobs(&specs, 200, 1);
        let e = pairwise_ber(&ds, 0, 1, 3).unwrap();
        assert!(e.p_hat < 0.01);
        assert_eq!(pairwise_ber(&ds, 0, 1, 1).unwrap().r_raw, 1.0);
    }

    #[test]
    fn pairwise_errors() {
        let ds = LabeledDataset::new(vec![0.0, 1.0, 2.0], 1, vec![0, 0, 1], vec!["a".into(), "b".into()]).unwrap();
        assert!(matches!(pairwise_ber(&ds, 0, 1, 1), Err(Error::ClassTooSmall { .. })));
        assert!(matches!(pairwise_ber(&ds, 0, 5, 1), Err(Error::UnknownClass(_))));
    }

    #[test]
    fn two_class_consistency() {
        let specs = [
            GaussianSpec::new(vec![0.0, 0.0], 1.0, 0.3),
            GaussianSpec::new(vec![1.5, 0.0], 1.0, 0.7),
        ];
        let ds = blobs(&specs, 300, 5);
        let pair = pairwise_ber(&ds, 0, 1, 3).unwrap();
        let matrix = pairwise_ber_matrix(&ds, 3).unwrap();
        assert_eq!(matrix.get(0, 1), Some(&pair));
        assert!(matrix.get(0, 0).is_none());
        assert_eq!(matrix.get(1, 0).unwrap().p_hat, pair.p_hat);
        let ovr = ovr_ber_estimates(&ds, 3).unwrap();
        assert_eq!(ovr[0], pair);
        assert_eq!(ovr[1].p_hat, pair.p_hat);
        assert_eq!(ovr[1].n1, pair.n2);
    }

    #[test]
    fn matrix_on_three_blobs() {
        let far = [
            GaussianSpec::new(vec![0.0, 0.0], 1.0, 1.0 / 3.0),
            GaussianSpec::new(vec![40.0, 0.0], 1.0, 1.0 / 3.0),
            GaussianSpec::new(vec![0.0, 40.0], 1.0, 1.0 / 3.0),
        ];
        let m = pairwise_ber_matrix(&blobs(&far, 450, 2), 3).unwrap();
        assert!(m.max_normalized() < 0.05);

        let coincident = [
            GaussianSpec::new(vec![0.0, 0.0], 1.0, 1.0 / 3.0),
            GaussianSpec::new(vec![0.0, 0.0], 1.0, 1.0 / 3.0),
            GaussianSpec::new(vec![40.0, 0.0], 1.0, 1.0 / 3.0),
        ];
        let m = pairwise_ber_matrix(&blobs(&coincident, 3000, 3), 3).unwrap();
        assert!(m.get(0, 1).unwrap().p_hat_normalized > 0.9, "{:?}", m.get(0, 1));
        assert!(m.get(0, 2).unwrap().p_hat_normalized < 0.05);
        assert!(m.get(1, 2).unwrap().p_hat_normalized < 0.05);
    }

    #[test]
    fn isolated_class_ovr() {
        let specs = [
            GaussianSpec::new(vec![0.0, 0.0], 1.0, 0.4),
            GaussianSpec::new(vec![0.5, 0.0], 1.0, 0.4),
            GaussianSpec::new(vec![1e5, 1e5], 1.0, 0.2),
        ];
        let ovr = ovr_ber_estimates(&blobs(&specs, 500, 8), 3).unwrap();
        assert!(ovr[2].p_hat < 0.01);
        assert!(ovr[0].p_hat > ovr[2].p_hat);
    }

    #[test]
    fn report_json_shape() {
        let e = estimate_from_r(1.0, 2, 2);
        let m = PairwiseBerMatrix::from_pairs(vec!["x".into(), "y".into()], 3, [(0, 1, e)]);
        let report = BerReport::new(m.classes().to_vec(), 3, Some(&m), None);
        let json: serde_json::Value = serde_json::to_value(&report).unwrap();
        assert_eq!(json["classes"], serde_json::json!(["x", "y"]));
        assert!(json["pairwise"][0][0].is_null());
        assert_eq!(json["pairwise"][0][1]["r_raw"], 1.0);
        assert!(json["ovr"].is_null());
        assert_eq!(json["n_trees"], 3);
    }
}
