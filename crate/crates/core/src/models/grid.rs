//! K-fold grid search over model hyperparameters.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::error::{Error, Result};
use crate::labeling::Label;
use crate::metrics::{evaluate, EvaluationReport};
use crate::resampling::LabeledDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SelectionMetric {
    Accuracy,
    F1Weighted,
    #[default]
    F1UnweightedMean,
}

impl SelectionMetric {
    pub fn score(self, r: &EvaluationReport) -> f64 {
        match self {
            SelectionMetric::Accuracy => r.accuracy,
            SelectionMetric::F1Weighted => r.f1_weighted,
            SelectionMetric::F1UnweightedMean => r.f1_unweighted_mean,
        }
    }
}

impl FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(SelectionMetric::Accuracy),
            "f1w" | "f1_weighted" => Ok(SelectionMetric::F1Weighted),
            "f1mic" | "f1_unweighted_mean" => Ok(SelectionMetric::F1UnweightedMean),
            other => Err(Error::InvalidParameter(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMetric::Accuracy => "accuracy",
            SelectionMetric::F1Weighted => "f1_weighted",
            SelectionMetric::F1UnweightedMean => "f1_unweighted_mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub spec: ModelSpec,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// In grid order.
    pub scores: Vec<GridScore>,
    pub selected: usize,
    pub metric: SelectionMetric,
    pub folds: Vec<Range<usize>>,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridScore {
        &self.scores[self.selected]
    }
}

/// `k` contiguous folds covering `0..n`; sizes differ by at most one, the
/// larger folds first.
pub fn contiguous_folds(n: usize, k: usize) -> Result<Vec<Range<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k_folds must be >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::SeriesTooShort { needed: k, got: n });
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Scores one fitted-and-evaluated fold per entry of `folds`, handing the
/// callback disjoint `(train, validation)` position lists.
pub fn cross_validate<F>(n: usize, folds: &[Range<usize>], mut score: F) -> Result<Vec<f64>>
where
    F: FnMut(&[usize], &[usize]) -> Result<f64>,
{
    folds
        .iter()
        .map(|fold| {
            let train: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
            let val: Vec<usize> = fold.clone().collect();
            score(&train, &val)
        })
        .collect()
}

fn fold_score(d: &LabeledDataset, spec: &ModelSpec, metric: SelectionMetric, seed: u64, train: &[usize], val: &[usize]) -> Result<f64> {
    let xt = d.x.select(Axis(0), train);
    let yt: Vec<Label> = train.iter().map(|&i| d.y[i]).collect();
    let xv = d.x.select(Axis(0), val);
    let yv: Vec<Label> = val.iter().map(|&i| d.y[i]).collect();
    let model = spec.fit(xt.view(), &yt, seed)?;
    let pred = model.predict(xv.view())?;
    Ok(metric.score(&evaluate(&yv, &pred)?))
}

/// Every grid entry is scored on the same contiguous folds with the same
/// seed. The highest mean wins; ties keep the earliest entry.
pub fn kfold_grid_search(d: &LabeledDataset, grid: &[ModelSpec], k_folds: usize, metric: SelectionMetric, seed: u64) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::Empty("parameter grid"));
    }
    let folds = contiguous_folds(d.len(), k_folds)?;
    let mut scores = Vec::with_capacity(grid.len());
    for spec in grid {
        let fold_scores = cross_validate(d.len(), &folds, |train, val| fold_score(d, spec, metric, seed, train, val))?;
        let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        log::info!("grid {spec}: mean {metric} {mean:.4}");
        scores.push(GridScore {
            spec: spec.clone(),
            fold_scores,
            mean,
        });
    }
    let mut selected = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.mean > scores[selected].mean {
            selected = i;
        }
    }
    Ok(GridSearchResult {
        scores,
        selected,
        metric,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{MaxFeatures, RfParams};
    use crate::resampling::Provenance;
    use ndarray::Array2;
    use rand::Rng;

    fn dataset(n: usize, seed: u64) -> LabeledDataset {
        let mut rng = crate::rng::substream(seed, "grid");
        let x = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
        let y = (0..n).map(|i| if x[[i, 0]] > 0.5 { Label::Up } else { Label::Down }).collect();
        LabeledDataset::new(x, vec!["a".into(), "b".into(), "c".into()], y, Provenance::Base).unwrap()
    }

    #[test]
    fn fold_shapes() {
        let f = contiguous_folds(10, 3).unwrap();
        assert_eq!(f, vec![0..4, 4..7, 7..10]);
        let loo = contiguous_folds(10, 10).unwrap();
        assert_eq!(loo.len(), 10);
        assert!(loo.iter().all(|r| r.len() == 1));
        assert!(contiguous_folds(3, 1).is_err());
        assert!(contiguous_folds(3, 4).is_err());
    }

    #[test]
    fn no_leakage() {
        let folds = contiguous_folds(103, 5).unwrap();
        let mut seen = Vec::new();
        cross_validate(103, &folds, |train, val| {
            assert!(train.iter().all(|t| !val.contains(t)));
            assert_eq!(train.len() + val.len(), 103);
            seen.extend_from_slice(val);
            Ok(0.0)
        })
        .unwrap();
        assert_eq!(seen, (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn single_entry_grid() {
        let d = dataset(60, 1);
        let r = kfold_grid_search(&d, &[ModelSpec::Gnb], 3, SelectionMetric::default(), 0).unwrap();
        assert_eq!(r.selected, 0);
        assert_eq!(r.scores[0].fold_scores.len(), 3);
    }

    #[test]
    fn dominant_setting_selected() {
        // a depth-0 forest predicts one class everywhere; depth-unlimited
        // forests learn the threshold on column 0
        let d = dataset(200, 2);
        let stump = ModelSpec::Rf(RfParams {
            n_estimators: 5,
            max_depth: Some(0),
            ..RfParams::default()
        });
        let full = ModelSpec::Rf(RfParams {
            n_estimators: 5,
            max_features: MaxFeatures::All,
            ..RfParams::default()
        });
        let r = kfold_grid_search(&d, &[stump.clone(), full.clone(), stump], 4, SelectionMetric::Accuracy, 3).unwrap();
        assert_eq!(r.selected, 1);
        assert!(r.best().mean > 90.0);
    }

    #[test]
    fn ties_keep_first() {
        let d = dataset(40, 3);
        let r = kfold_grid_search(&d, &[ModelSpec::Gnb, ModelSpec::Gnb], 2, SelectionMetric::Accuracy, 0).unwrap();
        assert_eq!(r.selected, 0);
    }
}
