//! Randomized property sweeps over the exact discrete quantities.
//!
//! Instance `i` of a sweep draws from its own ChaCha stream `i` under the
//! sweep seed, so sweeps run in parallel and still give the same report.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::*;

/// Slack allowed on every exact inequality.
pub const SLACK: f64 = 1e-12;

/// Outcome of one sweep.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SweepReport {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    /// Largest amount by which an inequality failed, 0 when none did.
    pub worst_violation: f64,
    pub passed: bool,
}

impl SweepReport {
    fn from_margins(name: &str, margins: impl IntoIterator<Item = f64>) -> Self {
        let (mut instances, mut violations, mut worst) = (0, 0, 0.0f64);
        for m in margins {
            instances += 1;
            if m < -SLACK {
                violations += 1;
                worst = worst.max(-m);
            }
        }
        Self {
            name: name.to_string(),
            instances,
            violations,
            worst_violation: worst,
            passed: violations == 0,
        }
    }
}

fn stream(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

fn random_pair(rng: &mut ChaCha8Rng) -> (DiscreteDistribution, DiscreteDistribution) {
    let m = rng.gen_range(2..=20);
    (
        DiscreteDistribution::random_dirichlet(m, rng),
        DiscreteDistribution::random_dirichlet(m, rng),
    )
}

/// `lower <= BER <= upper` from the exact divergence, random priors.
pub fn hp_sandwich(instances: usize, seed: u64) -> SweepReport {
    let margins: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let (f1, f2) = random_pair(&mut rng);
            let p1 = rng.gen_range(0.01..0.99);
            let ber = discrete_ber(&f1, &f2, p1).expect("valid pair");
            let b = hp_bounds_exact(&f1, &f2, p1).expect("valid pair");
            (ber - b.lower).min(b.upper - ber)
        })
        .collect();
    SweepReport::from_margins("hp_sandwich", margins)
}

/// At equal priors the Henze-Penrose upper bound is below the
/// Jensen-Shannon one.
pub fn hp_tighter_than_js(instances: usize, seed: u64) -> SweepReport {
    let margins: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let (f1, f2) = random_pair(&mut rng);
            let hp = hp_bounds_exact(&f1, &f2, 0.5).expect("valid pair").upper;
            discrete_js_bound(&f1, &f2, 0.5).expect("valid pair") - hp
        })
        .collect();
    SweepReport::from_margins("hp_tighter_than_js", margins)
}

/// The logarithmic inequality behind the comparison above, on log-uniform
/// `(x, y)` over `[1e-6, 1e6]`.
pub fn lemma_inequality(instances: usize, seed: u64) -> SweepReport {
    let margins: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let x = 10f64.powf(rng.gen_range(-6.0..6.0));
            let y = 10f64.powf(rng.gen_range(-6.0..6.0));
            let (lhs, rhs) = lemma_sides(x, y);
            // rescale so the shared slack is relative
            (lhs - rhs) / rhs.max(1.0)
        })
        .collect();
    SweepReport::from_margins("lemma_inequality", margins)
}

/// Equality of the two sides at `x = y`.
pub fn lemma_equality(instances: usize, seed: u64) -> SweepReport {
    let margins: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let x = 10f64.powf(rng.gen_range(-6.0..6.0));
            let (lhs, rhs) = lemma_sides(x, x);
            -(lhs - rhs).abs() / rhs.max(1.0)
        })
        .collect();
    SweepReport::from_margins("lemma_equality", margins)
}

/// `BER <= Bhattacharyya` at random priors, and the Henze-Penrose upper
/// bound below Bhattacharyya at equal priors.
pub fn bhattacharyya(instances: usize, seed: u64) -> SweepReport {
    let margins: Vec<f64> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let (f1, f2) = random_pair(&mut rng);
            let p1 = rng.gen_range(0.01..0.99);
            let ber = discrete_ber(&f1, &f2, p1).expect("valid pair");
            let bc = discrete_bhattacharyya_bound(&f1, &f2, p1).expect("valid pair");
            let hp_equal = hp_bounds_exact(&f1, &f2, 0.5).expect("valid pair").upper;
            let bc_equal = discrete_bhattacharyya_bound(&f1, &f2, 0.5).expect("valid pair");
            (bc - ber).min(bc_equal - hp_equal)
        })
        .collect();
    SweepReport::from_margins("bhattacharyya", margins)
}

/// Random `K`-class mixtures with `K` in `{3, 4, 5}`: for every class,
/// mixture error <= one-vs-rest error <= sum of pairwise errors.
pub fn ovr_bounds(instances: usize, seed: u64) -> SweepReport {
    let margins: Vec<f64> = (0..instances)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = stream(seed, i);
            let k = rng.gen_range(3..=5);
            let m = rng.gen_range(2..=20);
            let fs: Vec<_> = (0..k).map(|_| DiscreteDistribution::random_dirichlet(m, &mut rng)).collect();
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let ps: Vec<f64> = raw.iter().map(|p| p / total).collect();
            (0..k)
                .map(|c| {
                    let q = discrete_mixture_ber(&fs, &ps, c).expect("valid mixture");
                    let p = discrete_ovr_ber(&fs, &ps, c).expect("valid mixture");
                    let f = discrete_pairwise_ber_sum(&fs, &ps, c).expect("valid mixture");
                    (p - q).min(f - p)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    SweepReport::from_margins("ovr_bounds", margins)
}

/// Every sweep at its default size.
pub fn run_all(seed: u64) -> Vec<SweepReport> {
    vec![
        hp_sandwich(1000, seed),
        hp_tighter_than_js(1000, seed),
        lemma_inequality(100_000, seed),
        lemma_equality(1000, seed),
        bhattacharyya(1000, seed),
        ovr_bounds(500, seed),
    ]
}
