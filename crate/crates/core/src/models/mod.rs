//! Classifiers, train/test splitting, grid search and the smoothing sweep.

pub mod basepred;
pub mod forest;
pub mod gnb;
pub mod grid;
pub mod persist;
pub mod split;
pub mod sweep;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::Label;

pub use basepred::BasePredModel;
pub use forest::{DecisionTree, ForestModel, MaxFeatures, RfParams};
pub use gnb::GnbModel;
pub use grid::{kfold_grid_search, GridSearchResult, SelectionMetric};
pub use split::{train_test_split, SplitPolicy};
pub use sweep::{smoothing_sweep, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    BasePred,
    Gnb,
    Rf,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "basepred" | "base" => Ok(ModelKind::BasePred),
            "gnb" => Ok(ModelKind::Gnb),
            "rf" | "forest" => Ok(ModelKind::Rf),
            other => Err(Error::InvalidParameter(format!("unknown model `{other}`"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::BasePred => "basepred",
            ModelKind::Gnb => "gnb",
            ModelKind::Rf => "rf",
        })
    }
}

/// A model family together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    BasePred,
    Gnb,
    Rf(RfParams),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::BasePred => ModelKind::BasePred,
            ModelSpec::Gnb => ModelKind::Gnb,
            ModelSpec::Rf(_) => ModelKind::Rf,
        }
    }

    /// Builds a spec from `k=v,k=v` parameters; only the forest takes any.
    pub fn parse(kind: ModelKind, params: &str) -> Result<Self> {
        let pairs = parse_pairs(params)?;
        match kind {
            ModelKind::Rf => {
                let mut p = RfParams::default();
                for (k, v) in &pairs {
                    p.set(k, v)?;
                }
                Ok(ModelSpec::Rf(p))
            }
            _ if !pairs.is_empty() => Err(Error::InvalidParameter(format!("{kind} takes no parameters"))),
            ModelKind::BasePred => Ok(ModelSpec::BasePred),
            ModelKind::Gnb => Ok(ModelSpec::Gnb),
        }
    }

    /// Expands `k=a|b,k2=c` into the cartesian product of settings, last key
    /// varying fastest.
    pub fn parse_grid(kind: ModelKind, grid: &str) -> Result<Vec<Self>> {
        let mut combos = vec![String::new()];
        for (k, values) in parse_pairs(grid)? {
            let mut next = Vec::new();
            for base in &combos {
                for v in values.split('|') {
                    let sep = if base.is_empty() { "" } else { "," };
                    next.push(format!("{base}{sep}{k}={v}"));
                }
            }
            combos = next;
        }
        combos.iter().map(|c| ModelSpec::parse(kind, c)).collect()
    }

    pub fn fit(&self, x: ArrayView2<f64>, y: &[Label], seed: u64) -> Result<TrainedModel> {
        Ok(match self {
            ModelSpec::BasePred => TrainedModel::BasePred(BasePredModel::fit(y, seed)?),
            ModelSpec::Gnb => TrainedModel::Gnb(GnbModel::fit(x, y)?),
            ModelSpec::Rf(p) => TrainedModel::Rf(ForestModel::fit(x, y, p, seed)?),
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Rf(p) => write!(f, "rf({p})"),
            other => write!(f, "{}", other.kind()),
        }
    }
}

fn parse_pairs(s: &str) -> Result<Vec<(String, String)>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{p}`")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    BasePred(BasePredModel),
    Gnb(GnbModel),
    Rf(ForestModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::BasePred(_) => ModelKind::BasePred,
            TrainedModel::Gnb(_) => ModelKind::Gnb,
            TrainedModel::Rf(_) => ModelKind::Rf,
        }
    }

    /// BasePred ignores `x` apart from its row count.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<Label>> {
        match self {
            TrainedModel::BasePred(m) => Ok(m.predict(x.nrows())),
            TrainedModel::Gnb(m) => m.predict(x),
            TrainedModel::Rf(m) => m.predict(x),
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_features(expected: usize, x: &ArrayView2<f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::InvalidParameter(format!(
            "model expects {expected} feature columns, got {}",
            x.ncols()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!(ModelSpec::parse(ModelKind::Gnb, "").unwrap(), ModelSpec::Gnb);
        assert!(ModelSpec::parse(ModelKind::Gnb, "a=1").is_err());
        let ModelSpec::Rf(p) = ModelSpec::parse(ModelKind::Rf, "n_estimators=7, max_features=log2").unwrap() else {
            panic!()
        };
        assert_eq!(p.n_estimators, 7);
        assert_eq!(p.max_features, MaxFeatures::Log2);
        assert!(ModelSpec::parse(ModelKind::Rf, "trees=3").is_err());
    }

    #[test]
    fn grid_order_last_key_fastest() {
        let g = ModelSpec::parse_grid(ModelKind::Rf, "n_estimators=10|20,min_samples_leaf=1|5|9").unwrap();
        assert_eq!(g.len(), 6);
        let ModelSpec::Rf(p) = &g[1] else { panic!() };
        assert_eq!((p.n_estimators, p.min_samples_leaf), (10, 5));
        let ModelSpec::Rf(p) = &g[3] else { panic!() };
        assert_eq!((p.n_estimators, p.min_samples_leaf), (20, 1));
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[3, 5, 5]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 1.0]), 0);
    }
}
