//! Greedy forward feature selection driven by pairwise Bayes error estimates.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::ber::pairwise_ber_matrix;
use crate::dataset::LabeledDataset;
use crate::{Error, Result};

/// How pairwise normalized estimates are combined into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionObjective {
    #[default]
    Mean,
    Worst,
}

impl FromStr for SelectionObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "worst" => Ok(Self::Worst),
            _ => Err(Error::InvalidArgument(format!("unknown objective {s:?}, expected mean or worst"))),
        }
    }
}

impl fmt::Display for SelectionObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::Worst => "worst",
        })
    }
}

/// Feature added at one step and the score of the subset it completed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionStep {
    pub feature: usize,
    pub score: f64,
}

/// Adds, one at a time, the feature whose inclusion gives the lowest
/// estimated error, up to `max_features`. Ties go to the lower index.
pub fn forward_feature_select(
    ds: &LabeledDataset,
    max_features: usize,
    n_trees: usize,
    objective: SelectionObjective,
) -> Result<Vec<SelectionStep>> {
    let d = ds.n_features();
    if max_features == 0 || max_features > d {
        return Err(Error::InvalidArgument(format!("max_features must be in 1..={d}, got {max_features}")));
    }
    let mut chosen: Vec<usize> = Vec::new();
    let mut steps = Vec::with_capacity(max_features);
    while steps.len() < max_features {
        let candidates: Vec<usize> = (0..d).filter(|f| !chosen.contains(f)).collect();
        let scores = candidates
            .par_iter()
            .map(|&f| {
                let mut columns = chosen.clone();
                columns.push(f);
                let m = pairwise_ber_matrix(&ds.project(&columns)?, n_trees)?;
                Ok(match objective {
                    SelectionObjective::Mean => m.mean_normalized(),
                    SelectionObjective::Worst => m.max_normalized(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut best = 0;
        for i in 1..candidates.len() {
            if scores[i] < scores[best] {
                best = i;
            }
        }
        chosen.push(candidates[best]);
        steps.push(SelectionStep {
            feature: candidates[best],
            score: scores[best],
        });
    }
    Ok(steps)
}
