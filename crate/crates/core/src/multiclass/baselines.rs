//! One-vs-one and one-vs-rest constructions from the same binary SVM.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_header, check_models, fit_binary, prepare, Classifier, Standardizer, TrainConfig, TrainTimings};
use crate::dataset::LabeledDataset;
use crate::svm::LinearModel;
use crate::{Error, Result};

/// Binary model for classes `a` (+1) and `b` (-1), with `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoPair {
    pub a: usize,
    pub b: usize,
    pub model: LinearModel,
}

/// One model per unordered class pair; prediction by majority vote with
/// ties going to the smaller class id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoModel {
    pub classes: Vec<String>,
    pub n_features: usize,
    pub standardizer: Option<Standardizer>,
    pub pairs: Vec<OvoPair>,
}

impl OvoModel {
    pub fn train(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<Self> {
        Self::train_timed(ds, cfg).map(|(m, _)| m)
    }

    pub fn train_timed(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<(Self, TrainTimings)> {
        let prepared = prepare(ds, cfg)?;
        let start = Instant::now();
        let k = ds.n_classes();
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
        let pairs = pairs
            .par_iter()
            .map(|&(a, b)| {
                fit_binary(&prepared.features, ds.n_features(), ds.labels(), &[a], &[b], cfg)
                    .map(|model| OvoPair { a, b, model })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = Self {
            classes: ds.class_names().to_vec(),
            n_features: ds.n_features(),
            standardizer: prepared.standardizer,
            pairs,
        };
        let timings = TrainTimings {
            fitting: start.elapsed(),
            ..TrainTimings::default()
        };
        Ok((model, timings))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        check_header(&self.classes, self.n_features, self.standardizer.as_ref())?;
        let k = self.classes.len();
        if self.pairs.len() != k * (k - 1) / 2 {
            return Err(Error::Model(format!("expected {} pair models, found {}", k * (k - 1) / 2, self.pairs.len())));
        }
        let mut seen = vec![false; k * k];
        for p in &self.pairs {
            if p.a >= p.b || p.b >= k || std::mem::replace(&mut seen[p.a * k + p.b], true) {
                return Err(Error::Model(format!("invalid or repeated class pair ({}, {})", p.a, p.b)));
            }
        }
        check_models(&self.pairs.iter().map(|p| p.model.clone()).collect::<Vec<_>>(), self.n_features)
    }
}

impl Classifier for OvoModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    fn n_models(&self) -> usize {
        self.pairs.len()
    }

    fn predict_row(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.classes.len()];
        for p in &self.pairs {
            votes[if p.model.margin(x) >= 0.0 { p.a } else { p.b }] += 1;
        }
        let mut best = 0;
        for (class, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = class;
            }
        }
        best
    }
}

/// One model per class against all others; prediction by largest margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrModel {
    pub classes: Vec<String>,
    pub n_features: usize,
    pub standardizer: Option<Standardizer>,
    pub models: Vec<LinearModel>,
}

impl OvrModel {
    pub fn train(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<Self> {
        Self::train_timed(ds, cfg).map(|(m, _)| m)
    }

    pub fn train_timed(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<(Self, TrainTimings)> {
        let prepared = prepare(ds, cfg)?;
        let start = Instant::now();
        let k = ds.n_classes();
        let models = (0..k)
            .into_par_iter()
            .map(|c| {
                let rest: Vec<usize> = (0..k).filter(|&o| o != c).collect();
                fit_binary(&prepared.features, ds.n_features(), ds.labels(), &[c], &rest, cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        let model = Self {
            classes: ds.class_names().to_vec(),
            n_features: ds.n_features(),
            standardizer: prepared.standardizer,
            models,
        };
        let timings = TrainTimings {
            fitting: start.elapsed(),
            ..TrainTimings::default()
        };
        Ok((model, timings))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        check_header(&self.classes, self.n_features, self.standardizer.as_ref())?;
        if self.models.len() != self.classes.len() {
            return Err(Error::Model(format!(
                "expected {} class models, found {}",
                self.classes.len(),
                self.models.len()
            )));
        }
        check_models(&self.models, self.n_features)
    }
}

impl Classifier for OvrModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    fn n_models(&self) -> usize {
        self.models.len()
    }

    fn predict_row(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (class, m) in self.models.iter().enumerate() {
            let margin = m.margin(x);
            if margin > best.1 {
                best = (class, margin);
            }
        }
        best.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiclass::metrics::adjusted_rand_index;
    use crate::multiclass::SmartSvmModel;
    use crate::oracle::{sample_gaussian_mixture, GaussianSpec};

    fn ring(k: usize, n: usize) -> LabeledDataset {
        let specs: Vec<GaussianSpec> = (0..k)
            .map(|i| {
                let angle = std::f64::consts::TAU * i as f64 / k as f64;
                GaussianSpec::new(vec![12.0 * angle.cos(), 12.0 * angle.sin()], 0.8, 1.0 / k as f64)
            })
            .collect();
        sample_gaussian_mixture(&specs, n, 9).unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            cv_folds: 2,
            c_grid: vec![16.0],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn model_counts() {
        let ds = ring(10, 400);
        assert_eq!(OvoModel::train(&ds, &cfg()).unwrap().n_models(), 45);
        assert_eq!(OvrModel::train(&ds, &cfg()).unwrap().n_models(), 10);
        assert_eq!(SmartSvmModel::train(&ds, &cfg()).unwrap().n_models(), 9);
    }

    #[test]
    fn separable_data_gives_perfect_training_ari() {
        let ds = ring(4, 200);
        let ovo = OvoModel::train(&ds, &cfg()).unwrap();
        let ovr = OvrModel::train(&ds, &cfg()).unwrap();
        let smart = SmartSvmModel::train(&ds, &cfg()).unwrap();
        for pred in [ovo.predict(ds.features()), ovr.predict(ds.features()), smart.predict(ds.features())] {
            assert_eq!(adjusted_rand_index(ds.labels(), &pred.unwrap()).unwrap(), 1.0);
        }
    }

    #[test]
    fn vote_ties_go_to_the_smaller_class() {
        let constant = |b: f64| LinearModel {
            weights: vec![0.0, b],
            c: 1.0,
            objective: 0.0,
        };
        // 0 beats 1, 1 beats 2, 2 beats 0: one vote each
        let model = OvoModel {
            classes: vec!["x".into(), "y".into(), "z".into()],
            n_features: 1,
            standardizer: None,
            pairs: vec![
                OvoPair { a: 0, b: 1, model: constant(1.0) },
                OvoPair { a: 0, b: 2, model: constant(-1.0) },
                OvoPair { a: 1, b: 2, model: constant(1.0) },
            ],
        };
        model.validate().unwrap();
        assert_eq!(model.predict_row(&[0.0]), 0);
    }

    #[test]
    fn validation_catches_bad_pairs() {
        let m = LinearModel {
            weights: vec![0.0, 0.0],
            c: 1.0,
            objective: 0.0,
        };
        let model = OvoModel {
            classes: vec!["x".into(), "y".into()],
            n_features: 1,
            standardizer: None,
            pairs: vec![OvoPair { a: 1, b: 0, model: m.clone() }],
        };
        assert!(model.validate().is_err());
        let ovr = OvrModel {
            classes: vec!["x".into(), "y".into()],
            n_features: 1,
            standardizer: None,
            models: vec![m],
        };
        assert!(ovr.validate().is_err());
    }
}
