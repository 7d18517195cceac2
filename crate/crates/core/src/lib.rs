//! Nonparametric Bayes error rate estimation from Euclidean minimal spanning
//! trees, and a hierarchical multiclass linear SVM built from those estimates.
//!
//! The estimation pipeline counts cross-class edges of (orthogonal) minimal
//! spanning trees, turns the count into Henze-Penrose bounds on the Bayes
//! error, caps it at the smallest empirical prior and normalizes it. Pairwise
//! estimates weight a complete class graph; recursive minimum cuts of that
//! graph give a binary tree with one linear SVM per internal node.
//!
//! Class labels are stored internally as dense `0..K` indices; the original
//! label strings live on [`dataset::LabeledDataset`] and are used for every
//! user-facing output.

pub mod ber;
pub mod cli;
pub mod dataset;
mod error;
pub mod mst;
pub mod multiclass;
pub mod oracle;
pub mod svm;
pub mod tree;

pub use error::{Error, ErrorKind, Result};
