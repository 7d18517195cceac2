//! Binary linear SVM with hinge loss and L2 regularization, trained by dual
//! coordinate descent, and cross-validated selection of `C`.
//!
//! The primal is `(1/2)|w|^2 + C sum_i max(0, 1 - y_i w.x_i)` over inputs
//! augmented with a constant 1, so the intercept is the last weight and is
//! regularized along with the rest. The dual is
//! `max sum_i a_i - (1/2)|sum_i a_i y_i x_i|^2` subject to `0 <= a_i <= C`.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FoldAssignment;
use crate::{Error, Result};

/// Solver settings for one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once `(primal - dual) / primal` falls to this value.
    pub tol: f64,
    pub max_epochs: usize,
    /// Seeds the per-epoch shuffle of the coordinate order.
    pub seed: u64,
}

impl SvmParams {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            tol: 1e-4,
            max_epochs: 5000,
            seed: 42,
        }
    }

    pub fn with_c(self, c: f64) -> Self {
        Self { c, ..self }
    }
}

impl Default for SvmParams {
    fn default() -> Self {
        Self::new(1.0)
    }
}

/// Trained weights over the augmented input; the last entry is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub c: f64,
    /// Primal objective at the returned weights.
    pub objective: f64,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.weights.len() - 1
    }

    /// `w.x + b`; `x` must have [`n_features`](Self::n_features) entries.
    pub fn margin(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_features());
        let (w, b) = self.weights.split_at(x.len());
        dot(w, x) + b[0]
    }
}

/// Checked [`LinearModel::margin`].
pub fn predict_margin(model: &LinearModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            actual: x.len(),
        });
    }
    Ok(model.margin(x))
}

/// Convergence record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub epochs: usize,
    pub primal: f64,
    pub dual: f64,
    pub converged: bool,
    /// Dual objective after each epoch.
    pub dual_history: Vec<f64>,
}

impl TrainStats {
    pub fn relative_gap(&self) -> f64 {
        (self.primal - self.dual) / self.primal
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn augmented_dot(w: &[f64], x: &[f64]) -> f64 {
    dot(&w[..x.len()], x) + w[x.len()]
}

/// Primal objective of augmented weights `w` on the given data.
pub fn primal_objective(w: &[f64], features: &[f64], n_features: usize, signs: &[f64], c: f64) -> f64 {
    let hinge: f64 = features
        .chunks_exact(n_features)
        .zip(signs)
        .map(|(x, &y)| (1.0 - y * augmented_dot(w, x)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

fn validate(features: &[f64], n_features: usize, signs: &[f64]) -> Result<()> {
    if n_features == 0 {
        return Err(Error::InvalidArgument("at least one feature is required".into()));
    }
    if features.len() != signs.len() * n_features {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: signs.len() * n_features,
        });
    }
    if let Some(i) = signs.iter().position(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidArgument(format!("sign {} at row {i} is not +1 or -1", signs[i])));
    }
    if !(signs.contains(&1.0) && signs.contains(&-1.0)) {
        return Err(Error::SingleGroup);
    }
    if let Some(p) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: p / n_features,
            column: p % n_features,
        });
    }
    Ok(())
}

/// Trains on row-major `features` with labels `signs` in `{+1, -1}`.
pub fn train_binary(features: &[f64], n_features: usize, signs: &[f64], params: &SvmParams) -> Result<LinearModel> {
    train_binary_traced(features, n_features, signs, params).map(|(model, _)| model)
}

/// [`train_binary`] that also returns the convergence record.
pub fn train_binary_traced(
    features: &[f64],
    n_features: usize,
    signs: &[f64],
    params: &SvmParams,
) -> Result<(LinearModel, TrainStats)> {
    validate(features, n_features, signs)?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {}", params.c)));
    }
    let n = signs.len();
    let c = params.c;
    let rows: Vec<&[f64]> = features.chunks_exact(n_features).collect();
    let q_diag: Vec<f64> = rows.iter().map(|x| dot(x, x) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; n_features + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut history = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut converged = false;

    for _ in 0..params.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = (rows[i], signs[i]);
            let g = y * augmented_dot(&w, x) - 1.0;
            let next = (alpha[i] - g / q_diag[i]).clamp(0.0, c);
            let step = (next - alpha[i]) * y;
            if step != 0.0 {
                alpha[i] = next;
                for (wj, xj) in w.iter_mut().zip(x.iter()) {
                    *wj += step * xj;
                }
                w[n_features] += step;
            }
        }
        primal = primal_objective(&w, features, n_features, signs, c);
        dual = alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w);
        history.push(dual);
        if primal - dual <= params.tol * primal {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(
            "solver stopped after {} epochs with relative duality gap {:.3e} (C = {c})",
            params.max_epochs,
            (primal - dual) / primal
        );
    }
    let stats = TrainStats {
        epochs: history.len(),
        primal,
        dual,
        converged,
        dual_history: history,
    };
    Ok((
        LinearModel {
            weights: w,
            c,
            objective: primal,
        },
        stats,
    ))
}

/// Named grids of candidate `C` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridPreset {
    /// `2^-6, 2^-4, ..., 2^6`.
    #[default]
    Desk,
    /// `2^-18, 2^-16, ..., 2^18`.
    Wide,
}

impl GridPreset {
    pub fn values(self) -> Vec<f64> {
        let half = match self {
            GridPreset::Desk => 6,
            GridPreset::Wide => 18,
        };
        (-half..=half).step_by(2).map(|e| 2f64.powi(e)).collect()
    }
}

impl FromStr for GridPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(GridPreset::Desk),
            "wide" => Ok(GridPreset::Wide),
            _ => Err(Error::InvalidArgument(format!("unknown C grid {s:?}, expected desk or wide"))),
        }
    }
}

impl fmt::Display for GridPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridPreset::Desk => "desk",
            GridPreset::Wide => "wide",
        })
    }
}

/// Result of [`select_c`].
#[derive(Debug, Clone, PartialEq)]
pub struct CSelection {
    pub c: f64,
    pub cv_accuracy: f64,
    /// Mean fold accuracy for each grid value, in ascending `C` order.
    pub scores: Vec<(f64, f64)>,
}

fn gather(features: &[f64], n_features: usize, signs: &[f64], idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(idx.len() * n_features);
    let mut y = Vec::with_capacity(idx.len());
    for &i in idx {
        x.extend_from_slice(&features[i * n_features..(i + 1) * n_features]);
        y.push(signs[i]);
    }
    (x, y)
}

fn fold_accuracy(
    features: &[f64],
    n_features: usize,
    signs: &[f64],
    folds: &FoldAssignment,
    fold: usize,
    params: &SvmParams,
) -> Result<Option<f64>> {
    let test = folds.test_indices(fold);
    if test.is_empty() {
        return Ok(None);
    }
    let (x, y) = gather(features, n_features, signs, &folds.train_indices(fold));
    // a training part with one sign can only predict that sign
    type Predictor = Box<dyn Fn(&[f64]) -> f64>;
    let predict: Predictor = if y.iter().all(|&s| s == y[0]) {
        let s = y[0];
        Box::new(move |_| s)
    } else {
        let model = train_binary(&x, n_features, &y, params)?;
        Box::new(move |row| if model.margin(row) >= 0.0 { 1.0 } else { -1.0 })
    };
    let correct = test
        .iter()
        .filter(|&&i| predict(&features[i * n_features..(i + 1) * n_features]) == signs[i])
        .count();
    Ok(Some(correct as f64 / test.len() as f64))
}

/// Picks the grid value with the best mean fold accuracy, preferring the
/// smaller `C` on ties. Every (C, fold) cell is trained independently and
/// in parallel; `params` supplies everything but `C`.
pub fn select_c(
    features: &[f64],
    n_features: usize,
    signs: &[f64],
    grid: &[f64],
    folds: &FoldAssignment,
    params: &SvmParams,
) -> Result<CSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("C grid is empty".into()));
    }
    validate(features, n_features, signs)?;
    if folds.fold_of().len() != signs.len() {
        return Err(Error::LengthMismatch {
            left: folds.fold_of().len(),
            right: signs.len(),
        });
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let cells: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..folds.k()).map(move |f| (g, f))).collect();
    let results = cells
        .par_iter()
        .map(|&(g, f)| fold_accuracy(features, n_features, signs, folds, f, &params.with_c(grid[g])))
        .collect::<Result<Vec<_>>>()?;

    let scores: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(g, &c)| {
            let accs: Vec<f64> = results[g * folds.k()..(g + 1) * folds.k()].iter().flatten().copied().collect();
            (c, accs.iter().sum::<f64>() / accs.len() as f64)
        })
        .collect();
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    Ok(CSelection {
        c: best.0,
        cv_accuracy: best.1,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::stratified_folds;
    use proptest::prelude::*;
    use rand::Rng;

    fn blobs(n: usize, gap: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            x.push(s * gap + rng.gen_range(-1.0..1.0));
            x.push(rng.gen_range(-1.0..1.0));
            y.push(s);
        }
        (x, y)
    }

    fn labels01(signs: &[f64]) -> Vec<usize> {
        signs.iter().map(|&s| usize::from(s > 0.0)).collect()
    }

    #[test]
    fn symmetric_separable_points() {
        let (model, stats) = train_binary_traced(&[-1.0, 1.0], 1, &[-1.0, 1.0], &SvmParams::new(100.0)).unwrap();
        assert!(stats.converged);
        assert!(model.margin(&[1.0]) > 0.0);
        assert!(model.margin(&[-1.0]) < 0.0);
        // the boundary sits at zero by symmetry
        assert!(model.weights[1].abs() < 1e-6);
        assert!(model.margin(&[0.0]).abs() < 1e-6);
    }

    #[test]
    fn zero_features_predict_majority() {
        let x = vec![0.0; 7];
        let y = [1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0];
        let model = train_binary(&x, 1, &y, &SvmParams::new(1.0)).unwrap();
        assert!(model.margin(&[0.0]) > 0.0);
        let flipped: Vec<f64> = y.iter().map(|s| -s).collect();
        let model = train_binary(&x, 1, &flipped, &SvmParams::new(1.0)).unwrap();
        assert!(model.margin(&[0.0]) < 0.0);
    }

    #[test]
    fn gap_and_monotone_dual() {
        for (seed, c) in [(1, 0.01), (2, 1.0), (3, 10.0)] {
            let (x, y) = blobs(200, 0.5, seed);
            let (model, stats) = train_binary_traced(&x, 2, &y, &SvmParams::new(c)).unwrap();
            assert!(stats.converged);
            assert!(stats.relative_gap() <= 1e-4, "gap {}", stats.relative_gap());
            assert!(stats.dual <= stats.primal + 1e-9);
            assert!(stats.dual_history.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            assert_eq!(model.objective, stats.primal);
        }
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let (x, y) = blobs(100, 3.0, 4);
        let model = train_binary(&x, 2, &y, &SvmParams::new(10.0)).unwrap();
        let errors = x
            .chunks(2)
            .zip(&y)
            .filter(|(row, &s)| (model.margin(row) >= 0.0) != (s > 0.0))
            .count();
        assert_eq!(errors, 0);
    }

    #[test]
    fn subgradient_is_consistent_with_finite_differences() {
        let (x, y) = blobs(60, 0.3, 5);
        let c = 1.0;
        let params = SvmParams {
            tol: 1e-10,
            max_epochs: 100_000,
            ..SvmParams::new(c)
        };
        let model = train_binary(&x, 2, &y, &params).unwrap();
        let w = &model.weights;
        let eps = 1e-7;
        for j in 0..w.len() {
            // one-sided derivatives must bracket zero at an approximate optimum
            let mut plus = w.clone();
            plus[j] += eps;
            let mut minus = w.clone();
            minus[j] -= eps;
            let f0 = primal_objective(w, &x, 2, &y, c);
            let right = (primal_objective(&plus, &x, 2, &y, c) - f0) / eps;
            let left = (f0 - primal_objective(&minus, &x, 2, &y, c)) / eps;
            assert!(left <= right + 1e-6);
            let tol = 1e-3;
            assert!(right >= -tol && left <= tol, "coordinate {j}: [{left}, {right}]");

            // the subgradient at a non-kink point matches the difference quotient
            let grad_j: f64 = w[j]
                - c * x
                    .chunks(2)
                    .zip(&y)
                    .filter(|(row, &s)| s * augmented_dot(w, row) < 1.0)
                    .map(|(row, &s)| s * if j < 2 { row[j] } else { 1.0 })
                    .sum::<f64>();
            let no_kink = x.chunks(2).zip(&y).all(|(row, &s)| (1.0 - s * augmented_dot(w, row)).abs() > 1e-3);
            if no_kink {
                assert!((right - grad_j).abs() < 1e-4 && (left - grad_j).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn input_errors() {
        let p = SvmParams::new(1.0);
        assert!(matches!(train_binary(&[1.0, 2.0], 1, &[1.0, 1.0], &p), Err(Error::SingleGroup)));
        assert!(matches!(
            train_binary(&[1.0, f64::NAN], 1, &[1.0, -1.0], &p),
            Err(Error::NonFinite { row: 1, column: 0 })
        ));
        assert!(train_binary(&[1.0, 2.0], 1, &[1.0, 0.0], &p).is_err());
        assert!(train_binary(&[1.0, 2.0], 1, &[1.0, -1.0], &SvmParams::new(0.0)).is_err());
        let model = train_binary(&[1.0, 2.0], 1, &[1.0, -1.0], &p).unwrap();
        assert!(matches!(predict_margin(&model, &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn margin_is_linear_without_intercept() {
        let model = LinearModel {
            weights: vec![2.0, -1.0, 0.0],
            c: 1.0,
            objective: 0.0,
        };
        let x = [0.3, 0.7];
        let scaled = [1.2, 2.8];
        assert!((predict_margin(&model, &scaled).unwrap() - 4.0 * model.margin(&x)).abs() < 1e-12);
        assert_eq!(model.margin(&[0.5, 1.0]), 0.0);
    }

    #[test]
    fn grid_presets() {
        assert_eq!(GridPreset::Desk.values().len(), 7);
        let wide = GridPreset::Wide.values();
        assert_eq!(wide.len(), 19);
        assert_eq!(wide[0], 2f64.powi(-18));
        assert_eq!(wide[18], 2f64.powi(18));
        assert!(wide.windows(2).all(|w| w[1] == 4.0 * w[0]));
        assert_eq!("wide".parse::<GridPreset>().unwrap(), GridPreset::Wide);
        assert!("huge".parse::<GridPreset>().is_err());
    }

    #[test]
    fn selection_with_single_value() {
        let (x, y) = blobs(40, 1.0, 6);
        let folds = stratified_folds(&labels01(&y), 2, 5, 1).unwrap();
        let sel = select_c(&x, 2, &y, &[0.5], &folds, &SvmParams::default()).unwrap();
        assert_eq!(sel.c, 0.5);
        assert!(select_c(&x, 2, &y, &[], &folds, &SvmParams::default()).is_err());
    }

    #[test]
    fn selection_prefers_smallest_perfect_c() {
        let (x, y) = blobs(80, 4.0, 7);
        let folds = stratified_folds(&labels01(&y), 2, 10, 2).unwrap();
        let grid = GridPreset::Desk.values();
        let sel = select_c(&x, 2, &y, &grid, &folds, &SvmParams::default()).unwrap();
        assert_eq!(sel.cv_accuracy, 1.0);
        let first_perfect = sel.scores.iter().find(|s| s.1 == 1.0).unwrap().0;
        assert_eq!(sel.c, first_perfect);
        assert_eq!(sel, select_c(&x, 2, &y, &grid, &folds, &SvmParams::default()).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn row_permutation_keeps_objective(seed: u64, c in 0.05f64..5.0) {
            let (x, y) = blobs(50, 0.4, seed);
            let mut perm: Vec<usize> = (0..y.len()).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
            let (px, py) = gather(&x, 2, &y, &perm);
            let params = SvmParams { tol: 1e-6, ..SvmParams::new(c) };
            let a = train_binary(&x, 2, &y, &params).unwrap();
            let b = train_binary(&px, 2, &py, &params).unwrap();
            prop_assert!((a.objective - b.objective).abs() <= 1e-4 * a.objective.max(b.objective));
        }
    }
}
