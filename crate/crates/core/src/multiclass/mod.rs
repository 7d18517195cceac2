//! Multiclass classifiers built from binary linear SVMs.
//!
//! [`SmartSvmModel`] fits one SVM per internal node of the min-cut class
//! hierarchy and routes each sample from the root to a leaf. The one-vs-one
//! and one-vs-rest baselines live in [`baselines`].

pub mod baselines;
pub mod metrics;
pub mod selection;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ber::{pairwise_ber_matrix, DEFAULT_TREES};
use crate::dataset::{stratified_folds, LabeledDataset};
use crate::svm::{select_c, train_binary, GridPreset, LinearModel, SvmParams};
use crate::tree::{build_class_graph, build_hierarchy, ClassificationTree, TreeJson, TreeNode};
use crate::{Error, Result};

pub use baselines::{OvoModel, OvoPair, OvrModel};

/// Per-feature centering and scaling fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column; constant columns
    /// get scale 1.
    pub fn fit(features: &[f64], n_features: usize) -> Self {
        let n = (features.len() / n_features) as f64;
        let mut mean = vec![0.0; n_features];
        for row in features.chunks_exact(n_features) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; n_features];
        for row in features.chunks_exact(n_features) {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        let d = self.mean.len();
        features
            .iter()
            .enumerate()
            .map(|(i, x)| (x - self.mean[i % d]) / self.scale[i % d])
            .collect()
    }

    fn check(&self, n_features: usize) -> Result<()> {
        if self.mean.len() != n_features || self.scale.len() != n_features {
            return Err(Error::Model("standardizer length differs from feature count".into()));
        }
        if self.scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Model("standardizer scales must be positive".into()));
        }
        Ok(())
    }
}

/// Settings shared by every multiclass trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub c_grid: Vec<f64>,
    pub cv_folds: usize,
    pub seed: u64,
    pub standardize: bool,
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let solver = SvmParams::default();
        Self {
            n_trees: DEFAULT_TREES,
            c_grid: GridPreset::Desk.values(),
            cv_folds: 10,
            seed: 42,
            standardize: false,
            tol: solver.tol,
            max_epochs: solver.max_epochs,
        }
    }
}

impl TrainConfig {
    fn solver(&self) -> SvmParams {
        SvmParams {
            c: self.c_grid.first().copied().unwrap_or(1.0),
            tol: self.tol,
            max_epochs: self.max_epochs,
            seed: self.seed,
        }
    }
}

/// Wall time of a training run. For SmartSVM the estimation step that
/// builds the hierarchy is reported separately and counted in the total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainTimings {
    pub preprocessing: Duration,
    pub fitting: Duration,
}

impl TrainTimings {
    pub fn total(&self) -> Duration {
        self.preprocessing + self.fitting
    }
}

/// A trained multiclass classifier over dense class ids.
pub trait Classifier: Sync {
    fn classes(&self) -> &[String];
    fn n_features(&self) -> usize;
    fn standardizer(&self) -> Option<&Standardizer>;
    /// Number of binary models.
    fn n_models(&self) -> usize;
    /// Class id for one row, already standardized if the model expects it.
    fn predict_row(&self, x: &[f64]) -> usize;

    /// Predicts every row of a row-major matrix.
    fn predict(&self, features: &[f64]) -> Result<Vec<usize>> {
        let d = self.n_features();
        if !features.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: features.len() % d,
            });
        }
        let scaled;
        let x = match self.standardizer() {
            Some(s) => {
                scaled = s.apply(features);
                &scaled[..]
            }
            None => features,
        };
        Ok(x.par_chunks_exact(d).map(|row| self.predict_row(row)).collect())
    }
}

/// Training features after optional standardization.
struct Prepared {
    features: Vec<f64>,
    standardizer: Option<Standardizer>,
}

fn prepare(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<Prepared> {
    if cfg.c_grid.is_empty() {
        return Err(Error::InvalidArgument("C grid is empty".into()));
    }
    if cfg.cv_folds < 2 {
        return Err(Error::InvalidArgument(format!("cv folds must be at least 2, got {}", cfg.cv_folds)));
    }
    let required = cfg.cv_folds.max(2);
    for (class, &count) in ds.class_counts().iter().enumerate() {
        if count < required {
            return Err(Error::ClassTooSmall {
                class: ds.class_name(class).to_string(),
                count,
                required,
            });
        }
    }
    let standardizer = cfg.standardize.then(|| Standardizer::fit(ds.features(), ds.n_features()));
    let features = match &standardizer {
        Some(s) => s.apply(ds.features()),
        None => ds.features().to_vec(),
    };
    Ok(Prepared { features, standardizer })
}

/// Fits `positive` (+1) against `negative` (-1) on the rows whose label is
/// in either set, choosing `C` by stratified cross-validation.
fn fit_binary(
    features: &[f64],
    n_features: usize,
    labels: &[usize],
    positive: &[usize],
    negative: &[usize],
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    let mut x = Vec::new();
    let mut signs = Vec::new();
    for (i, y) in labels.iter().enumerate() {
        let sign = if positive.contains(y) {
            1.0
        } else if negative.contains(y) {
            -1.0
        } else {
            continue;
        };
        x.extend_from_slice(&features[i * n_features..(i + 1) * n_features]);
        signs.push(sign);
    }
    let params = cfg.solver();
    let c = if cfg.c_grid.len() == 1 {
        cfg.c_grid[0]
    } else {
        let side: Vec<usize> = signs.iter().map(|&s| usize::from(s < 0.0)).collect();
        let folds = stratified_folds(&side, 2, cfg.cv_folds.min(signs.len()), cfg.seed)?;
        select_c(&x, n_features, &signs, &cfg.c_grid, &folds, &params)?.c
    };
    train_binary(&x, n_features, &signs, &params.with_c(c))
}

/// Hierarchical classifier: one binary SVM per internal node of the
/// min-cut class tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SmartSvmJson", into = "SmartSvmJson")]
pub struct SmartSvmModel {
    classes: Vec<String>,
    n_features: usize,
    standardizer: Option<Standardizer>,
    tree: ClassificationTree,
    /// Indexed by tree node; `None` at leaves.
    node_models: Vec<Option<LinearModel>>,
}

impl SmartSvmModel {
    pub fn train(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<Self> {
        Self::train_timed(ds, cfg).map(|(model, _)| model)
    }

    pub fn train_timed(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<(Self, TrainTimings)> {
        let prepared = prepare(ds, cfg)?;
        let start = Instant::now();
        let working = LabeledDataset::new(
            prepared.features.clone(),
            ds.n_features(),
            ds.labels().to_vec(),
            ds.class_names().to_vec(),
        )?;
        let estimates = pairwise_ber_matrix(&working, cfg.n_trees)?;
        let tree = build_hierarchy(&build_class_graph(&estimates)?)?;
        let preprocessing = start.elapsed();

        let start = Instant::now();
        let fitted = tree
            .internal_nodes()
            .par_iter()
            .map(|&node| match &tree.nodes()[node] {
                TreeNode::Split { left, right, .. } => {
                    fit_binary(&prepared.features, ds.n_features(), ds.labels(), left, right, cfg).map(|m| (node, m))
                }
                TreeNode::Leaf { .. } => Err(Error::Invariant("internal node list contains a leaf".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut node_models = vec![None; tree.nodes().len()];
        for (node, model) in fitted {
            node_models[node] = Some(model);
        }
        let model = Self {
            classes: ds.class_names().to_vec(),
            n_features: ds.n_features(),
            standardizer: prepared.standardizer,
            tree,
            node_models,
        };
        Ok((
            model,
            TrainTimings {
                preprocessing,
                fitting: start.elapsed(),
            },
        ))
    }

    pub fn tree(&self) -> &ClassificationTree {
        &self.tree
    }

    /// Model at an internal node, `None` for leaves.
    pub fn node_model(&self, node: usize) -> Option<&LinearModel> {
        self.node_models.get(node).and_then(Option::as_ref)
    }
}

impl Classifier for SmartSvmModel {
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
        self.node_models.iter().flatten().count()
    }

    fn predict_row(&self, x: &[f64]) -> usize {
        self.tree.route(|node| {
            self.node_models[node]
                .as_ref()
                .expect("every internal node has a model")
                .margin(x)
                >= 0.0
        })
    }
}

/// Serialized form of [`SmartSvmModel`]; node models follow the tree's
/// internal nodes in preorder.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SmartSvmJson {
    classes: Vec<String>,
    n_features: usize,
    standardizer: Option<Standardizer>,
    tree: TreeJson,
    node_models: Vec<LinearModel>,
}

impl From<SmartSvmModel> for SmartSvmJson {
    fn from(m: SmartSvmModel) -> Self {
        Self {
            tree: m.tree.to_json(&m.classes),
            node_models: m.node_models.into_iter().flatten().collect(),
            classes: m.classes,
            n_features: m.n_features,
            standardizer: m.standardizer,
        }
    }
}

impl TryFrom<SmartSvmJson> for SmartSvmModel {
    type Error = Error;

    fn try_from(j: SmartSvmJson) -> Result<Self> {
        check_header(&j.classes, j.n_features, j.standardizer.as_ref())?;
        check_models(&j.node_models, j.n_features)?;
        let tree = ClassificationTree::from_json(&j.tree, &j.classes)?;
        let internal = tree.internal_nodes();
        if internal.len() != j.node_models.len() {
            return Err(Error::Model(format!(
                "tree has {} internal nodes but {} node models are given",
                internal.len(),
                j.node_models.len()
            )));
        }
        let mut node_models = vec![None; tree.nodes().len()];
        for (node, model) in internal.into_iter().zip(j.node_models) {
            node_models[node] = Some(model);
        }
        Ok(Self {
            classes: j.classes,
            n_features: j.n_features,
            standardizer: j.standardizer,
            tree,
            node_models,
        })
    }
}

fn check_header(classes: &[String], n_features: usize, standardizer: Option<&Standardizer>) -> Result<()> {
    if classes.len() < 2 {
        return Err(Error::Model("a model needs at least 2 classes".into()));
    }
    if n_features == 0 {
        return Err(Error::Model("a model needs at least 1 feature".into()));
    }
    standardizer.map_or(Ok(()), |s| s.check(n_features))
}

fn check_models(models: &[LinearModel], n_features: usize) -> Result<()> {
    for m in models {
        if m.weights.len() != n_features + 1 || m.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Model(format!("binary model must hold {} finite weights", n_features + 1)));
        }
    }
    Ok(())
}

/// Which multiclass construction to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    SmartSvm,
    Ovo,
    Ovr,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smartsvm" => Ok(Self::SmartSvm),
            "ovo" => Ok(Self::Ovo),
            "ovr" => Ok(Self::Ovr),
            _ => Err(Error::InvalidArgument(format!(
                "unknown strategy {s:?}, expected smartsvm, ovo or ovr"
            ))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SmartSvm => "smartsvm",
            Self::Ovo => "ovo",
            Self::Ovr => "ovr",
        })
    }
}

/// Any trained model, as stored on disk. The `version` field names the
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "version")]
pub enum ModelDocument {
    #[serde(rename = "smartsvm-model/1")]
    SmartSvm(SmartSvmModel),
    #[serde(rename = "ovo-model/1")]
    Ovo(OvoModel),
    #[serde(rename = "ovr-model/1")]
    Ovr(OvrModel),
}

impl ModelDocument {
    pub fn train(ds: &LabeledDataset, strategy: Strategy, cfg: &TrainConfig) -> Result<(Self, TrainTimings)> {
        Ok(match strategy {
            Strategy::SmartSvm => {
                let (m, t) = SmartSvmModel::train_timed(ds, cfg)?;
                (Self::SmartSvm(m), t)
            }
            Strategy::Ovo => {
                let (m, t) = OvoModel::train_timed(ds, cfg)?;
                (Self::Ovo(m), t)
            }
            Strategy::Ovr => {
                let (m, t) = OvrModel::train_timed(ds, cfg)?;
                (Self::Ovr(m), t)
            }
        })
    }

    pub fn strategy(&self) -> Strategy {
        match self {
            Self::SmartSvm(_) => Strategy::SmartSvm,
            Self::Ovo(_) => Strategy::Ovo,
            Self::Ovr(_) => Strategy::Ovr,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        match &doc {
            Self::SmartSvm(_) => {}
            Self::Ovo(m) => m.validate()?,
            Self::Ovr(m) => m.validate()?,
        }
        Ok(doc)
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Self::SmartSvm(m) => m,
            Self::Ovo(m) => m,
            Self::Ovr(m) => m,
        }
    }
}

impl Classifier for ModelDocument {
    fn classes(&self) -> &[String] {
        self.inner().classes()
    }

    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn standardizer(&self) -> Option<&Standardizer> {
        self.inner().standardizer()
    }

    fn n_models(&self) -> usize {
        self.inner().n_models()
    }

    fn predict_row(&self, x: &[f64]) -> usize {
        self.inner().predict_row(x)
    }
}
