//! Evaluation metrics over dense class ids.

use std::collections::HashMap;

use crate::{Error, Result};

fn check_lengths(y: &[usize], y_hat: &[usize]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: y_hat.len(),
        });
    }
    Ok(())
}

/// Fraction of samples wrongly assigned to class `k` or wrongly withheld
/// from it.
pub fn confusion_rate(y: &[usize], y_hat: &[usize], k: usize) -> Result<f64> {
    check_lengths(y, y_hat)?;
    if y.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let wrong = y.iter().zip(y_hat).filter(|&(&t, &p)| (t == k) != (p == k)).count();
    Ok(wrong as f64 / y.len() as f64)
}

/// [`confusion_rate`] for every class in `0..n_classes`.
pub fn confusion_rates(y: &[usize], y_hat: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    (0..n_classes).map(|k| confusion_rate(y, y_hat, k)).collect()
}

fn pairs(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Hubert-Arabie adjusted Rand index of two labelings. Returns 1 when the
/// chance-corrected denominator vanishes, which happens only when both
/// labelings are trivial in the same way.
pub fn adjusted_rand_index(y: &[usize], y_hat: &[usize]) -> Result<f64> {
    check_lengths(y, y_hat)?;
    if y.len() < 2 {
        return Err(Error::InvalidArgument("adjusted Rand index needs at least 2 samples".into()));
    }
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&a, &b) in y.iter().zip(y_hat) {
        *cells.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| pairs(c)).sum();
    let expected = sum_rows * sum_cols / pairs(y.len() as u64);
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_examples() {
        let y = [0, 0, 1, 1, 2, 2];
        let y_hat = [0, 1, 1, 1, 2, 2];
        assert!((confusion_rate(&y, &y_hat, 0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((confusion_rate(&y, &y_hat, 1).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(confusion_rate(&y, &y_hat, 2).unwrap(), 0.0);
        assert_eq!(confusion_rates(&y, &y, 3).unwrap(), vec![0.0; 3]);
        assert!(confusion_rate(&y, &y_hat[..5], 0).is_err());
    }

    #[test]
    fn ari_hand_example() {
        let ari = adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 1, 1]).unwrap();
        assert!((ari - 1.2 / 3.7).abs() < 1e-12);
    }

    #[test]
    fn ari_identity_and_swap() {
        let y = [0, 1, 1, 2, 0, 2, 2];
        assert_eq!(adjusted_rand_index(&y, &y).unwrap(), 1.0);
        let swapped: Vec<usize> = y.iter().map(|&c| [1, 0, 2][c]).collect();
        assert!((adjusted_rand_index(&y, &swapped).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(adjusted_rand_index(&[3, 3], &[5, 5]).unwrap(), 1.0);
        assert!(adjusted_rand_index(&[0], &[0]).is_err());
    }

    proptest! {
        #[test]
        fn ari_is_symmetric_and_at_most_one(
            pair in (2usize..40).prop_flat_map(|n| (prop::collection::vec(0usize..4, n), prop::collection::vec(0usize..4, n)))
        ) {
            let (a, b) = pair;
            let ab = adjusted_rand_index(&a, &b).unwrap();
            let ba = adjusted_rand_index(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab <= 1.0 + 1e-12);
        }

        #[test]
        fn ari_ignores_label_names(y in prop::collection::vec(0usize..5, 2..40), perm in Just([4usize, 2, 0, 3, 1])) {
            let renamed: Vec<usize> = y.iter().map(|&c| perm[c]).collect();
            let other: Vec<usize> = y.iter().map(|&c| (c + 1) % 3).collect();
            let a = adjusted_rand_index(&y, &other).unwrap();
            let b = adjusted_rand_index(&renamed, &other).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
