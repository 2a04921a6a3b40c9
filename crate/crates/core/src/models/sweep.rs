//! Smoothing-parameter sweep: one labeled, trained and evaluated dataset
//! per `(S, alpha)` pair.

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::{train_test_split, ModelSpec, SplitPolicy};
use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::labeling::{smoothed_labels, Label, LabelParams, ThresholdForm};
use crate::metrics::{evaluate, EvaluationReport};
use crate::resampling::{LabeledDataset, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub window: usize,
    pub alpha: f64,
    pub report: EvaluationReport,
    /// Label counts over the whole labeled series, by [`Label::index`].
    pub counts: [usize; 3],
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "S,alpha,Accuracy,F1w,F1mic,Acc0,Acc+1,Acc-1,N_0,N_+1,N_-1";

    pub fn to_csv_row(&self) -> String {
        let r = &self.report;
        let acc = |l: Label| r.per_class_accuracy.get(&l).map(|v| format!("{v:.2}")).unwrap_or_default();
        format!(
            "{},{},{:.2},{:.2},{:.2},{},{},{},{},{},{}",
            self.window,
            self.alpha,
            r.accuracy,
            r.f1_weighted,
            r.f1_unweighted_mean,
            acc(Label::Flat),
            acc(Label::Up),
            acc(Label::Down),
            self.counts[Label::Flat.index()],
            self.counts[Label::Up.index()],
            self.counts[Label::Down.index()],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub threshold: ThresholdForm,
    pub split: SplitPolicy,
    pub train_fraction: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            threshold: ThresholdForm::Additive,
            split: SplitPolicy::Chronological,
            train_fraction: super::split::DEFAULT_TRAIN_FRACTION,
        }
    }
}

/// Rows come out with `S` as the outer loop and `alpha` inner, in the order
/// given. `mid` and `features` must cover the same series.
pub fn smoothing_sweep(
    mid: &[f64],
    features: &FeatureMatrix,
    windows: &[usize],
    alphas: &[f64],
    spec: &ModelSpec,
    options: &SweepOptions,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(windows.len() * alphas.len());
    for &s in windows {
        for &alpha in alphas {
            let params = LabelParams::smoothed(s, alpha).with_threshold(options.threshold);
            let labels = smoothed_labels(mid, &params)?;
            let data = LabeledDataset::join(features, &labels, Provenance::Smoothed)?;
            let (train, test) = train_test_split(data.len(), options.train_fraction, options.split, seed)?;
            let tr = data.subset(&train);
            let model = spec.fit(tr.x.view(), &tr.y, seed)?;
            let xt = data.x.select(Axis(0), &test);
            let yt: Vec<Label> = test.iter().map(|&i| data.y[i]).collect();
            let report = evaluate(&yt, &model.predict(xt.view())?)?;
            log::info!("sweep S={s} alpha={alpha}: accuracy {:.2}", report.accuracy);
            rows.push(SweepRow {
                window: s,
                alpha,
                report,
                counts: labels.counts(),
            });
        }
    }
    Ok(rows)
}
