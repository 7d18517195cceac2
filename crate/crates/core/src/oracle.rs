//! Exact reference values: Bayes error, Henze-Penrose divergence and the
//! Jensen-Shannon and Bhattacharyya bounds on finite supports, closed forms
//! for equal-covariance spherical Gaussians, and a seeded Gaussian mixture
//! sampler.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::ber::HpBounds;
use crate::dataset::LabeledDataset;
use crate::{Error, Result};

pub mod sweeps;

/// Probability masses on the shared support `{0..m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    masses: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidArgument("empty support".into()));
        }
        if masses.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidArgument("masses must be finite and non-negative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { masses })
    }

    /// Draw from a symmetric Dirichlet(1) on `m` points.
    pub fn random_dirichlet<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let raw: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = raw.iter().sum();
        Self {
            masses: raw.into_iter().map(|v| v / total).collect(),
        }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn support_size(&self) -> usize {
        self.masses.len()
    }
}

fn check_pair(f1: &DiscreteDistribution, f2: &DiscreteDistribution, p1: f64) -> Result<()> {
    if f1.support_size() != f2.support_size() {
        return Err(Error::LengthMismatch {
            left: f1.support_size(),
            right: f2.support_size(),
        });
    }
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::InvalidArgument(format!("prior must lie in (0, 1), got {p1}")));
    }
    Ok(())
}

fn weighted_overlap(f1: &DiscreteDistribution, w1: f64, f2: &DiscreteDistribution, w2: f64) -> f64 {
    f1.masses
        .iter()
        .zip(&f2.masses)
        .map(|(a, b)| (w1 * a).min(w2 * b))
        .sum()
}

/// Bayes error `sum_x min(p1 f1(x), p2 f2(x))`.
pub fn discrete_ber(f1: &DiscreteDistribution, f2: &DiscreteDistribution, p1: f64) -> Result<f64> {
    check_pair(f1, f2, p1)?;
    Ok(weighted_overlap(f1, p1, f2, 1.0 - p1))
}

/// Henze-Penrose divergence
/// `[sum (p1 f1 - p2 f2)^2 / (p1 f1 + p2 f2) - (p1 - p2)^2] / (4 p1 p2)`.
/// Support points where both masses vanish contribute nothing.
pub fn discrete_hp(f1: &DiscreteDistribution, f2: &DiscreteDistribution, p1: f64) -> Result<f64> {
    check_pair(f1, f2, p1)?;
    let p2 = 1.0 - p1;
    let sum: f64 = f1
        .masses
        .iter()
        .zip(&f2.masses)
        .filter_map(|(a, b)| {
            let (x, y) = (p1 * a, p2 * b);
            (x + y > 0.0).then(|| (x - y) * (x - y) / (x + y))
        })
        .sum();
    Ok((sum - (p1 - p2) * (p1 - p2)) / (4.0 * p1 * p2))
}

/// Bounds from the exact divergence, `u = 4 p1 p2 D + (p1 - p2)^2`.
pub fn hp_bounds_exact(f1: &DiscreteDistribution, f2: &DiscreteDistribution, p1: f64) -> Result<HpBounds> {
    let d = discrete_hp(f1, f2, p1)?;
    let p2 = 1.0 - p1;
    Ok(HpBounds::from_u(4.0 * p1 * p2 * d + (p1 - p2) * (p1 - p2)))
}

fn xlog2(x: f64, ratio: f64) -> f64 {
    if x > 0.0 {
        x * ratio.log2()
    } else {
        0.0
    }
}

fn binary_entropy(p: f64) -> f64 {
    -xlog2(p, p) - xlog2(1.0 - p, 1.0 - p)
}

/// Prior-weighted Jensen-Shannon divergence in bits.
pub fn discrete_js(f1: &DiscreteDistribution, f2: &DiscreteDistribution, p1: f64) -> Result<f64> {
    check_pair(f1, f2, p1)?;
    let p2 = 1.0 - p1;
    Ok(f1
        .masses
        .iter()
        .zip(&f2.masses)
        .map(|(&a, &b)| {
            let m = p1 * a + p2 * b;
            if m > 0.0 {
                p1 * xlog2(a, a / m) + p2 * xlog2(b, b / m)
            } else {
                0.0
            }
        })
        .sum())
}

/// Jensen-Shannon upper bound on the Bayes error, `(H(p1) - JS) / 2`.
pub fn discrete_js_bound(f1: &DiscreteDistribution, f2: &DiscreteDistribution, p1: f64) -> Result<f64> {
    let js = discrete_js(f1, f2, p1)?;
    Ok(0.5 * (binary_entropy(p1) - js))
}

/// Both sides of `x ln(1 + y/x) + y ln(1 + x/y) >= 4 ln(2) x y / (x + y)`.
pub fn lemma_sides(x: f64, y: f64) -> (f64, f64) {
    let lhs = x * (y / x).ln_1p() + y * (x / y).ln_1p();
    let rhs = 4.0 * std::f64::consts::LN_2 * x * y / (x + y);
    (lhs, rhs)
}

/// Whether the inequality above holds, with a slack of `1e-12` relative to
/// the right-hand side (absolute below 1).
pub fn lemma_b1_check(x: f64, y: f64) -> bool {
    assert!(x > 0.0 && y > 0.0, "lemma requires positive arguments");
    let (lhs, rhs) = lemma_sides(x, y);
    lhs - rhs >= -1e-12 * rhs.max(1.0)
}

/// Bhattacharyya bound `sqrt(p1 p2) sum_x sqrt(f1(x) f2(x))`.
pub fn discrete_bhattacharyya_bound(f1: &DiscreteDistribution, f2: &DiscreteDistribution, p1: f64) -> Result<f64> {
    check_pair(f1, f2, p1)?;
    let coefficient: f64 = f1.masses.iter().zip(&f2.masses).map(|(a, b)| (a * b).sqrt()).sum();
    Ok((p1 * (1.0 - p1)).sqrt() * coefficient)
}

fn check_mixture(fs: &[DiscreteDistribution], ps: &[f64], k: usize) -> Result<()> {
    if fs.len() < 2 {
        return Err(Error::FewerThanTwoClasses);
    }
    if fs.len() != ps.len() {
        return Err(Error::LengthMismatch {
            left: fs.len(),
            right: ps.len(),
        });
    }
    if k >= fs.len() {
        return Err(Error::UnknownClass(k.to_string()));
    }
    let m = fs[0].support_size();
    if let Some(f) = fs.iter().find(|f| f.support_size() != m) {
        return Err(Error::LengthMismatch {
            left: f.support_size(),
            right: m,
        });
    }
    let total: f64 = ps.iter().sum();
    if (total - 1.0).abs() > 1e-9 || ps.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidArgument("priors must be positive and sum to 1".into()));
    }
    Ok(())
}

/// One-vs-rest Bayes error for class `k`: mass of `k` where some other
/// class is at least as likely, plus mass of the others where `k` wins.
pub fn discrete_ovr_ber(fs: &[DiscreteDistribution], ps: &[f64], k: usize) -> Result<f64> {
    check_mixture(fs, ps, k)?;
    let mut total = 0.0;
    for x in 0..fs[0].support_size() {
        let own = ps[k] * fs[k].masses[x];
        let best_other = (0..fs.len())
            .filter(|&l| l != k)
            .map(|l| ps[l] * fs[l].masses[x])
            .fold(f64::NEG_INFINITY, f64::max);
        if best_other >= own {
            total += own;
        } else {
            total += (0..fs.len()).filter(|&c| c != k).map(|c| ps[c] * fs[c].masses[x]).sum::<f64>();
        }
    }
    Ok(total)
}

/// Mixture of every class except `k`, with its total prior.
pub fn discrete_mixture_rest(fs: &[DiscreteDistribution], ps: &[f64], k: usize) -> Result<(DiscreteDistribution, f64)> {
    check_mixture(fs, ps, k)?;
    let p_rest: f64 = (0..fs.len()).filter(|&l| l != k).map(|l| ps[l]).sum();
    let masses = (0..fs[0].support_size())
        .map(|x| (0..fs.len()).filter(|&l| l != k).map(|l| ps[l] * fs[l].masses[x]).sum::<f64>() / p_rest)
        .collect();
    Ok((DiscreteDistribution { masses }, p_rest))
}

/// Bayes error between class `k` and the mixture of the rest; a lower bound
/// on the one-vs-rest error.
pub fn discrete_mixture_ber(fs: &[DiscreteDistribution], ps: &[f64], k: usize) -> Result<f64> {
    let (rest, p_rest) = discrete_mixture_rest(fs, ps, k)?;
    Ok(weighted_overlap(&fs[k], ps[k], &rest, p_rest))
}

/// Sum over `c != k` of `sum_x min(p_k f_k(x), p_c f_c(x))`; an upper bound
/// on the one-vs-rest error.
pub fn discrete_pairwise_ber_sum(fs: &[DiscreteDistribution], ps: &[f64], k: usize) -> Result<f64> {
    check_mixture(fs, ps, k)?;
    Ok((0..fs.len())
        .filter(|&c| c != k)
        .map(|c| weighted_overlap(&fs[k], ps[k], &fs[c], ps[c]))
        .sum())
}

/// Spherical Gaussian class-conditional density with its prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub prior: f64,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, sigma: f64, prior: f64) -> Self {
        Self { mean, sigma, prior }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Mean separation in units of the common sigma, and the two priors.
fn standardized_pair(a: &GaussianSpec, b: &GaussianSpec) -> Result<(f64, f64, f64)> {
    if a.mean.len() != b.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: a.mean.len(),
            actual: b.mean.len(),
        });
    }
    if !(a.sigma > 0.0) || (a.sigma - b.sigma).abs() > 1e-12 * a.sigma {
        return Err(Error::InvalidArgument(format!(
            "closed form needs equal positive sigmas, got {} and {}",
            a.sigma, b.sigma
        )));
    }
    if !(a.prior > 0.0 && b.prior > 0.0) || (a.prior + b.prior - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("pair priors must be positive and sum to 1".into()));
    }
    let delta = crate::mst::euclidean(&a.mean, &b.mean) / a.sigma;
    Ok((delta, a.prior, b.prior))
}

/// Bayes error of two equal-covariance spherical Gaussians:
/// `p1 Phi(-D/2 + ln(p2/p1)/D) + p2 Phi(-D/2 - ln(p2/p1)/D)` with `D` the
/// standardized mean distance, and `min(p1, p2)` when `D = 0`.
pub fn gaussian_ber(a: &GaussianSpec, b: &GaussianSpec) -> Result<f64> {
    let (delta, p1, p2) = standardized_pair(a, b)?;
    if delta == 0.0 {
        return Ok(p1.min(p2));
    }
    let shift = (p2 / p1).ln() / delta;
    Ok(p1 * normal_cdf(-delta / 2.0 + shift) + p2 * normal_cdf(-delta / 2.0 - shift))
}

/// Bhattacharyya bound `sqrt(p1 p2) exp(-D^2 / 8)` for the same setting.
pub fn gaussian_bhattacharyya(a: &GaussianSpec, b: &GaussianSpec) -> Result<f64> {
    let (delta, p1, p2) = standardized_pair(a, b)?;
    Ok((p1 * p2).sqrt() * (-delta * delta / 8.0).exp())
}

/// Class sizes `round(p_k n)`, fixed up by largest remainder so they sum
/// to `n`. Ties go to the lower class index.
pub fn class_sizes(priors: &[f64], n: usize) -> Vec<usize> {
    let exact: Vec<f64> = priors.iter().map(|p| p * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..priors.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(n.saturating_sub(assigned)) {
        sizes[k] += 1;
    }
    sizes
}

/// Samples a Gaussian mixture with exact class sizes. Class `k` gets label
/// name `k + 1`; rows are grouped by class.
pub fn sample_gaussian_mixture(specs: &[GaussianSpec], n: usize, seed: u64) -> Result<LabeledDataset> {
    if specs.len() < 2 {
        return Err(Error::FewerThanTwoClasses);
    }
    let d = specs[0].mean.len();
    if d == 0 {
        return Err(Error::InvalidArgument("means must have at least one coordinate".into()));
    }
    for s in specs {
        if s.mean.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: s.mean.len(),
            });
        }
        if !(s.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", s.sigma)));
        }
    }
    let priors: Vec<f64> = specs.iter().map(|s| s.prior).collect();
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-9 || priors.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidArgument("priors must be positive and sum to 1".into()));
    }
    if n < specs.len() {
        return Err(Error::InvalidArgument(format!("n = {n} is smaller than the class count")));
    }
    let sizes = class_sizes(&priors, n);
    if let Some(k) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::ClassTooSmall {
            class: (k + 1).to_string(),
            count: 0,
            required: 1,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (k, (spec, &size)) in specs.iter().zip(&sizes).enumerate() {
        for _ in 0..size {
            for &mu in &spec.mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(mu + spec.sigma * z);
            }
            labels.push(k);
        }
    }
    let names = (1..=specs.len()).map(|k| k.to_string()).collect();
    LabeledDataset::new(features, d, labels, names)
}
